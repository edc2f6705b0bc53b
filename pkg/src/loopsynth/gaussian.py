"""Multimode Gaussian states and the channels acting on them.

States are kept as a mean vector and covariance matrix over the quadratures
(x1, p1, x2, p2, ...), i.e. mode-interleaved ordering.  Units follow the
hbar = 1/2 convention throughout: a vacuum mode has variance 1/4 in both
quadratures.  All angles at the public interfaces are in degrees.

Every operation is a pure function returning a new state, so states can be
shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VACUUM_VARIANCE = 0.25

# Symmetry is restored after every transform; PSD drift beyond this is a bug.
SYMMETRY_TOL = 1e-8
PSD_TOL = 1e-9


def _x(mode: int) -> int:
    return 2 * mode


def _p(mode: int) -> int:
    return 2 * mode + 1


def _rad(deg: float) -> float:
    return float(deg) * np.pi / 180.0


def rotation_matrix(theta_deg: float) -> np.ndarray:
    """2x2 phase-space rotation: x' = x cos - p sin, p' = x sin + p cos."""
    t = _rad(theta_deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def beamsplitter_matrix(transmissivity: float) -> np.ndarray:
    """Two-mode coupling [[sqrt(T), -sqrt(1-T)], [sqrt(1-T), sqrt(T)]].

    Applied identically to the x and p quadratures of the mode pair.
    """
    t = np.sqrt(transmissivity)
    r = np.sqrt(1.0 - transmissivity)
    return np.array([[t, -r], [r, t]])


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Zero or more optical modes with Gaussian statistics.

    mean has length 2N and cov is 2N x 2N, both in (x1, p1, x2, p2, ...)
    ordering.  The constructor symmetrizes cov and rejects matrices that are
    asymmetric beyond tolerance or not positive semidefinite within -1e-9.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(f"inconsistent shapes: mean {mean.shape}, cov {cov.shape}")
        if mean.size % 2 != 0:
            raise ValueError("quadrature vector length must be even")
        if mean.size and (not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov))):
            raise ValueError("non-finite entries in state")
        if mean.size:
            asym = np.max(np.abs(cov - cov.T))
            if asym > SYMMETRY_TOL:
                raise ValueError(f"covariance asymmetric by {asym:.3g}")
            cov = 0.5 * (cov + cov.T)
            lo = np.linalg.eigvalsh(cov)[0]
            if lo < -PSD_TOL:
                raise ValueError(f"covariance not PSD: min eigenvalue {lo:.3g}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def num_modes(self) -> int:
        return self.mean.size // 2

    def mode_variances(self, mode: int) -> tuple[float, float]:
        """(var x, var p) of one mode."""
        return float(self.cov[_x(mode), _x(mode)]), float(self.cov[_p(mode), _p(mode)])


@dataclass(frozen=True)
class SqueezerSpec:
    """Squeezed-vacuum source levels in dB.

    squeeze_db is the variance reduction of x below vacuum, antisqueeze_db
    the increase of p.  Physicality requires antisqueeze >= squeeze so that
    var_x * var_p >= 1/16.
    """

    squeeze_db: float = 5.0
    antisqueeze_db: float = 8.0

    def __post_init__(self):
        if self.squeeze_db < 0:
            raise ValueError("squeeze_db must be >= 0")
        if self.antisqueeze_db < self.squeeze_db:
            raise ValueError(
                f"unphysical squeezer: antisqueeze {self.antisqueeze_db} dB "
                f"< squeeze {self.squeeze_db} dB"
            )

    def variances(self) -> tuple[float, float]:
        var_x = 10.0 ** (-self.squeeze_db / 10.0) * VACUUM_VARIANCE
        var_p = 10.0 ** (self.antisqueeze_db / 10.0) * VACUUM_VARIANCE
        return var_x, var_p


@dataclass(frozen=True)
class MeasurementPlan:
    """Homodyne angle per measured mode (degrees) and a shot count."""

    angles_deg: tuple[float, ...]
    shots: int = 5000

    def __post_init__(self):
        object.__setattr__(self, "angles_deg", tuple(float(a) for a in self.angles_deg))
        if not self.angles_deg:
            raise ValueError("plan needs at least one angle")
        if self.shots < 2:
            raise ValueError("shots must be >= 2")


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Shot-by-shot quadrature samples, one column per measured mode."""

    plan: MeasurementPlan
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.plan.shots, len(self.plan.angles_deg)):
            raise ValueError(
                f"sample shape {values.shape} does not match plan "
                f"({self.plan.shots} shots x {len(self.plan.angles_deg)} modes)"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite samples")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def vacuum(num_modes: int) -> GaussianState:
    """Vacuum of num_modes modes: zero mean, cov = I/4."""
    if num_modes < 1:
        raise ValueError("need at least one mode")
    n = 2 * num_modes
    return GaussianState(np.zeros(n), VACUUM_VARIANCE * np.eye(n))


def squeezed_vacuum(spec: SqueezerSpec) -> GaussianState:
    """Single x-squeezed mode with the spec's squeeze/antisqueeze levels."""
    var_x, var_p = spec.variances()
    return GaussianState(np.zeros(2), np.diag([var_x, var_p]))


# ---------------------------------------------------------------------------
# raw-array channel updates, shared by the public ops and the loop engine
# ---------------------------------------------------------------------------


def _apply_pair_inplace(cov: np.ndarray, mean: np.ndarray, i: int, j: int,
                        coupling: np.ndarray) -> None:
    idx = [_x(i), _p(i), _x(j), _p(j)]
    s = np.kron(coupling, np.eye(2))
    cov[np.ix_(idx, range(cov.shape[0]))] = s @ cov[idx, :]
    cov[np.ix_(range(cov.shape[0]), idx)] = cov[:, idx] @ s.T
    mean[idx] = s @ mean[idx]


def _apply_rotation_inplace(cov: np.ndarray, mean: np.ndarray, mode: int,
                            theta_deg: float) -> None:
    r = rotation_matrix(theta_deg)
    idx = [_x(mode), _p(mode)]
    cov[np.ix_(idx, range(cov.shape[0]))] = r @ cov[idx, :]
    cov[np.ix_(range(cov.shape[0]), idx)] = cov[:, idx] @ r.T
    mean[idx] = r @ mean[idx]


def _apply_loss_inplace(cov: np.ndarray, mean: np.ndarray, mode: int,
                        eta: float) -> None:
    idx = [_x(mode), _p(mode)]
    root = np.sqrt(eta)
    block = cov[np.ix_(idx, idx)].copy()
    cov[idx, :] *= root
    cov[:, idx] *= root
    cov[np.ix_(idx, idx)] = eta * block + (1.0 - eta) * VACUUM_VARIANCE * np.eye(2)
    mean[idx] *= root


def dephasing_moments(sigma_deg: float) -> tuple[float, float, float]:
    """(E[cos], E[cos^2], E[sin^2]) of a centered Gaussian angle."""
    var = _rad(sigma_deg) ** 2
    e1 = np.exp(-var / 2.0)
    e2 = np.exp(-2.0 * var)
    return e1, 0.5 * (1.0 + e2), 0.5 * (1.0 - e2)


def _apply_dephasing_inplace(cov: np.ndarray, mean: np.ndarray, mode: int,
                             sigma_deg: float, mean_term: bool = True) -> None:
    """Moment-averaged random-rotation channel on one mode.

    With mean_term=False the mean is contracted but its randomization is not
    folded back into the covariance; this linear-Gaussian surrogate keeps the
    covariance independent of conditioning outcomes (used by the sampling
    engine, identical to the full channel for zero-mean states).
    """
    e1, c2, s2 = dephasing_moments(sigma_deg)
    ix, ip = _x(mode), _p(mode)
    bxx, bpp, bxp = cov[ix, ix], cov[ip, ip], cov[ix, ip]
    block = np.array([[c2 * bxx + s2 * bpp, (c2 - s2) * bxp],
                      [(c2 - s2) * bxp, s2 * bxx + c2 * bpp]])
    if mean_term:
        mu = mean[[ix, ip]]
        gmu = np.array([mu[1], -mu[0]])
        block += c2 * np.outer(mu, mu) + s2 * np.outer(gmu, gmu) \
            - e1 * e1 * np.outer(mu, mu)
    cov[[ix, ip], :] *= e1
    cov[:, [ix, ip]] *= e1
    cov[np.ix_([ix, ip], [ix, ip])] = block
    mean[[ix, ip]] *= e1


def _condition_on_x(cov: np.ndarray, mean: np.ndarray, mode: int,
                    outcome: float) -> tuple[np.ndarray, np.ndarray]:
    """Condition on the x quadrature of `mode`, then drop the mode."""
    ix = _x(mode)
    var = cov[ix, ix]
    if var < 1e-12:
        raise ValueError("measured quadrature variance is singular")
    gain = cov[:, ix] / var
    cov2 = cov - np.outer(cov[:, ix], cov[ix, :]) / var
    mean2 = mean + gain * (outcome - mean[ix])
    drop = (ix, _p(mode))
    keep = [k for k in range(cov.shape[0]) if k not in drop]
    return cov2[np.ix_(keep, keep)], mean2[keep]


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def _check_mode(state: GaussianState, mode: int) -> None:
    if not 0 <= mode < state.num_modes:
        raise ValueError(f"mode {mode} out of range for {state.num_modes} modes")


def apply_phase(state: GaussianState, mode: int, theta_deg: float) -> GaussianState:
    """Rotate one mode's quadratures by theta (degrees)."""
    _check_mode(state, mode)
    cov, mean = state.cov.copy(), state.mean.copy()
    _apply_rotation_inplace(cov, mean, mode, theta_deg)
    return GaussianState(mean, cov)


def apply_beamsplitter(state: GaussianState, i: int, j: int,
                       transmissivity: float) -> GaussianState:
    """Couple modes i and j with the fixed-sign beam splitter convention."""
    _check_mode(state, i)
    _check_mode(state, j)
    if i == j:
        raise ValueError("beam splitter needs two distinct modes")
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError(f"transmissivity {transmissivity} outside [0, 1]")
    return apply_coupling(state, i, j, beamsplitter_matrix(transmissivity))


def apply_coupling(state: GaussianState, i: int, j: int,
                   coupling: np.ndarray) -> GaussianState:
    """Apply an orthogonal 2x2 mode coupling to (i, j), same on x and p."""
    _check_mode(state, i)
    _check_mode(state, j)
    cov, mean = state.cov.copy(), state.mean.copy()
    _apply_pair_inplace(cov, mean, i, j, np.asarray(coupling, dtype=float))
    return GaussianState(mean, cov)


def apply_loss(state: GaussianState, mode: int, eta: float) -> GaussianState:
    """Attenuate one mode: cov block -> eta*S + (1-eta)/4 I, cross *= sqrt(eta)."""
    _check_mode(state, mode)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmittance {eta} outside [0, 1]")
    cov, mean = state.cov.copy(), state.mean.copy()
    _apply_loss_inplace(cov, mean, mode, eta)
    return GaussianState(mean, cov)


def apply_dephasing(state: GaussianState, mode: int, sigma_deg: float) -> GaussianState:
    """Average one mode over Gaussian random rotations of std sigma (degrees).

    Closed form of the moment average; validated against explicit Monte-Carlo
    rotation averaging in the test suite.
    """
    _check_mode(state, mode)
    if sigma_deg < 0:
        raise ValueError("jitter std-dev must be >= 0")
    cov, mean = state.cov.copy(), state.mean.copy()
    _apply_dephasing_inplace(cov, mean, mode, sigma_deg, mean_term=True)
    return GaussianState(mean, cov)


def tensor(a: GaussianState, b: GaussianState) -> GaussianState:
    """Block-diagonal composition of two states."""
    n_a = a.mean.size
    n = n_a + b.mean.size
    cov = np.zeros((n, n))
    cov[:n_a, :n_a] = a.cov
    cov[n_a:, n_a:] = b.cov
    return GaussianState(np.concatenate([a.mean, b.mean]), cov)


def marginalize(state: GaussianState, keep) -> GaussianState:
    """Restrict to the given modes (order preserved); exact for Gaussians."""
    keep = list(keep)
    if not keep:
        raise ValueError("keep list must be nonempty")
    for m in keep:
        _check_mode(state, m)
    idx = [q for m in keep for q in (_x(m), _p(m))]
    return GaussianState(state.mean[idx], state.cov[np.ix_(idx, idx)])


def homodyne_condition(state: GaussianState, mode: int, phi_deg: float,
                       outcome: float) -> GaussianState:
    """Condition the remaining modes on measuring x_phi = outcome on `mode`.

    The measured mode is removed; an empty state is a valid terminal result.
    """
    _check_mode(state, mode)
    cov, mean = state.cov.copy(), state.mean.copy()
    _apply_rotation_inplace(cov, mean, mode, -phi_deg)
    cov2, mean2 = _condition_on_x(cov, mean, mode, float(outcome))
    return GaussianState(mean2, cov2)


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def sample_quadratures(state: GaussianState, plan: MeasurementPlan,
                       seed=None) -> SampleSet:
    """Draw i.i.d. shots of one commuting quadrature per mode.

    Mode k is measured at plan angle phi_k: x cos(phi) + p sin(phi).
    Deterministic for a fixed seed.
    """
    if len(plan.angles_deg) != state.num_modes:
        raise ValueError(
            f"plan has {len(plan.angles_deg)} angles for {state.num_modes} modes"
        )
    proj = np.zeros((state.num_modes, 2 * state.num_modes))
    for m, phi in enumerate(plan.angles_deg):
        t = _rad(phi)
        proj[m, _x(m)] = np.cos(t)
        proj[m, _p(m)] = np.sin(t)
    mu = proj @ state.mean
    sigma = proj @ state.cov @ proj.T
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((plan.shots, state.num_modes)) @ _sqrt_psd(sigma).T
    return SampleSet(plan, mu + draws)
