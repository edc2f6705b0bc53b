"""Entanglement criteria: nullifier construction and evaluation.

Small-scale targets are certified by inseparability parameters (a sum of
two nullifier-type variances, inseparable below 1 in hbar = 1/2 units);
linear-cluster chains by the per-mode nullifier family (inseparable below
1/2 for every mode).

Star-shaped clusters are locally equivalent to GHZ states: the generating
schedule differs only in the final loop phase, and the cluster nullifiers
live in the frame where each leaf mode's quadratures are swapped (x -> p,
p -> -x).  The criteria returned for star targets therefore carry the
cluster-frame labels together with the lab-frame terms they correspond to,
so analytic and sampled evaluation act on the simulated state directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gaussian as g
from .compiler import TargetState, compile_target, fibonacci
from .engine import run_loop, run_unrolled
from .gaussian import GaussianState, MeasurementPlan, SampleSet, SqueezerSpec
from .schedule import ControlSchedule, NoiseConfig

NULLIFIER_THRESHOLD = 0.5
INSEPARABILITY_THRESHOLD = 1.0


@dataclass(frozen=True)
class NullifierSpec:
    """Linear combination of mode quadratures; modes are 1-based.

    terms: tuple of (mode, "x" | "p", coefficient).  A spec may use at most
    one quadrature kind per mode so that it is measurable in a single run.
    """

    terms: tuple[tuple[int, str, float], ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "terms",
                           tuple((int(m), q, float(c)) for m, q, c in self.terms))
        if not self.terms:
            raise ValueError("nullifier needs at least one term")
        kinds: dict[int, str] = {}
        for mode, quad, coeff in self.terms:
            if quad not in ("x", "p"):
                raise ValueError(f"unknown quadrature {quad!r}")
            if not math.isfinite(coeff):
                raise ValueError("non-finite coefficient")
            if kinds.setdefault(mode, quad) != quad:
                raise ValueError(
                    f"mode {mode} would need both x and p in one run")
        if not self.label:
            object.__setattr__(self, "label", _format_terms(self.terms))

    def modes(self) -> tuple[int, ...]:
        return tuple(sorted({m for m, _, _ in self.terms}))

    def vacuum_variance(self) -> float:
        return g.VACUUM_VARIANCE * sum(c * c for _, _, c in self.terms)


def _format_terms(terms) -> str:
    parts = []
    for mode, quad, coeff in terms:
        sign = "-" if coeff < 0 else "+"
        mag = abs(coeff)
        body = f"{quad}{mode}" if abs(mag - 1.0) < 1e-12 else f"{mag:g}*{quad}{mode}"
        parts.append((sign, body))
    first_sign, first = parts[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        out += sign + body
    return out


@dataclass(frozen=True)
class InseparabilitySpec:
    """Pair of nullifiers whose summed variance certifies inseparability."""

    first: NullifierSpec
    second: NullifierSpec
    threshold: float = INSEPARABILITY_THRESHOLD
    label: str = ""

    def __post_init__(self):
        if not self.label:
            object.__setattr__(
                self, "label",
                f"var({self.first.label})+var({self.second.label})")

    def vacuum_variance(self) -> float:
        return self.first.vacuum_variance() + self.second.vacuum_variance()


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    shots: int


def _n(*terms, label: str = "") -> NullifierSpec:
    return NullifierSpec(tuple(terms), label=label)


def _ghz_pair_order(n: int) -> list[tuple[int, int]]:
    # adjacent differences first, then wider ones
    return [(i, i + gap) for gap in range(1, n) for i in range(1, n - gap + 1)]


def nullifiers_for(target: TargetState):
    """Complete criterion set for a supported target.

    Returns a list of InseparabilitySpec (threshold 1) for the small-scale
    states, or a list of NullifierSpec (threshold 1/2 each) for linear
    cluster chains of four or more modes.
    """
    n = target.n
    if target.kind == "epr" or (target.kind == "ghz" and n == 2):
        pair = InseparabilitySpec(
            _n((1, "x", 1), (2, "x", -1)), _n((1, "p", 1), (2, "p", 1)))
        return [pair]

    if target.kind == "ghz":
        total_p = _n(*[(k, "p", 1) for k in range(1, n + 1)])
        return [
            InseparabilitySpec(_n((i, "x", 1), (j, "x", -1)), total_p)
            for i, j in _ghz_pair_order(n)
        ]

    if target.kind == "star":
        if n == 2:
            return nullifiers_for(TargetState.linear_cluster(2))
        # Lab-frame terms come from the GHZ criteria; labels are the
        # cluster-frame ones (leaf k: p_k <-> lab x_k; hub n: x_n <-> lab p_n).
        hub_label = "p%d%s" % (n, "".join(f"-x{k}" for k in range(1, n)))
        hub = _n(*([(k, "p", 1) for k in range(1, n)] + [(n, "x", -1)]),
                 label=hub_label)
        pairs = []
        order = [(i, n) for i in range(1, n)] + \
            [(i, j) for i, j in _ghz_pair_order(n - 1)]
        for i, j in order:
            if j == n:
                first = _n((i, "x", 1), (n, "p", -1), label=f"p{i}-x{n}")
            else:
                first = _n((i, "x", 1), (j, "x", -1), label=f"p{i}-p{j}")
            pairs.append(InseparabilitySpec(first, hub))
        return pairs

    if target.kind == "linear" and n == 2:
        return [InseparabilitySpec(
            _n((1, "p", 1), (2, "x", -1)), _n((2, "p", 1), (1, "x", -1)))]

    if target.kind == "linear" and n == 3:
        middle = _n((2, "p", 1), (1, "x", -1), (3, "x", -1))
        return [
            InseparabilitySpec(_n((1, "p", 1), (2, "x", -1)), middle),
            InseparabilitySpec(_n((3, "p", 1), (2, "x", -1)), middle),
            InseparabilitySpec(_n((1, "p", 1), (3, "p", -1)), middle),
        ]

    if target.kind == "linear":
        family = [cluster_nullifier(1)]
        family += [cluster_nullifier(k) for k in range(2, n)]
        family.append(_n((n, "p", 1), (n - 1, "x", -1)))
        return family

    if target.kind == "infinite":
        return [cluster_nullifier(k) for k in range(1, n)]

    raise ValueError(f"unsupported target {target}")


def cluster_nullifier(k: int) -> NullifierSpec:
    """p_k - x_(k-1) - x_(k+1), with the one-sided form at the chain head."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return _n((1, "p", 1), (2, "x", -1))
    return _n((k, "p", 1), (k - 1, "x", -1), (k + 1, "x", -1))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _coefficient_vector(spec: NullifierSpec, num_modes: int,
                        mode_map: dict[int, int] | None) -> np.ndarray:
    c = np.zeros(2 * num_modes)
    for mode, quad, coeff in spec.terms:
        col = mode_map[mode] if mode_map is not None else mode - 1
        if col is None or not 0 <= col < num_modes:
            raise ValueError(f"mode {mode} not present in state")
        c[2 * col + (0 if quad == "x" else 1)] += coeff
    return c


def variance_analytic(state: GaussianState, spec: NullifierSpec,
                      mode_map: dict[int, int] | None = None) -> float:
    """Variance of the spec's combination, second moment about zero.

    mode_map translates the spec's 1-based mode labels to state columns;
    by default mode k is column k-1.
    """
    for mode in spec.modes():
        col = mode_map[mode] if mode_map is not None else mode - 1
        if not 0 <= col < state.num_modes:
            raise ValueError(f"mode {mode} not present in state")
    c = _coefficient_vector(spec, state.num_modes, mode_map)
    value = float(c @ state.cov @ c)
    shift = float(c @ state.mean)
    return value + shift * shift


def estimate(samples: SampleSet, spec: NullifierSpec) -> Estimate:
    """Unbiased sample variance of the combination, with Gaussian stderr.

    Every quadrature in the spec must match the basis the samples were
    taken in (0 degrees for x, 90 for p).
    """
    combo = np.zeros(samples.plan.shots)
    for mode, quad, coeff in spec.terms:
        col = mode - 1
        if not 0 <= col < len(samples.plan.angles_deg):
            raise ValueError(f"mode {mode} not covered by the sample set")
        want = 0.0 if quad == "x" else 90.0
        have = samples.plan.angles_deg[col] % 360.0
        if abs(have - want) > 1e-9:
            raise ValueError(
                f"mode {mode} was measured at {have} deg, spec needs {want}")
        combo += coeff * samples.values[:, col]
    n = samples.plan.shots
    value = float(np.var(combo, ddof=1))
    stderr = value * math.sqrt(2.0 / (n - 1))
    return Estimate(value=value, stderr=stderr, shots=n)


def measurement_plan(specs, num_modes: int | None = None,
                     shots: int = 5000) -> MeasurementPlan:
    """Single plan measuring every quadrature a spec (or family) needs.

    Raises if any mode would need both x and p in one run.  Modes the specs
    do not constrain are measured at 0 degrees.
    """
    if isinstance(specs, NullifierSpec):
        specs = [specs]
    required: dict[int, float] = {}
    for spec in specs:
        for mode, quad, _ in spec.terms:
            want = 0.0 if quad == "x" else 90.0
            if required.setdefault(mode, want) != want:
                raise ValueError(
                    f"mode {mode} would need both x and p in one run")
    if num_modes is None:
        num_modes = max(required)
    angles = [required.get(m, 0.0) for m in range(1, num_modes + 1)]
    return MeasurementPlan(tuple(angles), shots=shots)


def plan_measurements(criteria, num_modes: int,
                      shots: int = 5000) -> list[tuple[MeasurementPlan, list[NullifierSpec]]]:
    """Greedily group the criteria's nullifiers into compatible plans."""
    specs: list[NullifierSpec] = []
    for crit in criteria:
        if isinstance(crit, InseparabilitySpec):
            for spec in (crit.first, crit.second):
                if spec not in specs:
                    specs.append(spec)
        elif crit not in specs:
            specs.append(crit)

    groups: list[tuple[dict[int, float], list[NullifierSpec]]] = []
    for spec in specs:
        want = {m: (0.0 if q == "x" else 90.0) for m, q, _ in spec.terms}
        for angles, members in groups:
            if all(angles.get(m, w) == w for m, w in want.items()):
                angles.update(want)
                members.append(spec)
                break
        else:
            groups.append((dict(want), [spec]))
    return [
        (MeasurementPlan(tuple(angles.get(m, 0.0) for m in range(1, num_modes + 1)),
                         shots=shots), members)
        for angles, members in groups
    ]


# ---------------------------------------------------------------------------
# closed-form linear-cluster covariance (independent of the circuit code)
# ---------------------------------------------------------------------------


def linear_cluster_oracle_cov(n: int, source: SqueezerSpec) -> GaussianState:
    """Output covariance of the n-mode linear cluster from the closed form.

    The chain of Fibonacci-ratio splitters with 90-degree phases has a
    closed-form input-output map: output k receives Fibonacci-weighted
    contributions from inputs 1..k+1 with quarter-turn phase factors.  The
    covariance is assembled directly from those coefficients, with no
    circuit simulation involved.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    fib = [fibonacci(k) for k in range(n + 2)]
    u = np.zeros((n, n + 1), dtype=complex)
    for k in range(1, n + 1):
        u[k - 1, 0] = (1j ** k) * fib[n - k + 1] / math.sqrt(fib[n] * fib[n + 1])
        for l in range(2, k + 1):
            u[k - 1, l - 1] = (1j ** (k - l + 1)) * fib[n - k + 1] \
                / math.sqrt(fib[n - l + 1] * fib[n - l + 3])
        if k + 1 <= n + 1:
            u[k - 1, k] = -math.sqrt(fib[n - k] / fib[n - k + 2])

    gram = u @ u.conj().T
    if np.max(np.abs(gram - np.eye(n))) > 1e-10:
        raise AssertionError("closed-form rows are not orthonormal")

    # a_out = sum_l u_l a_in,l maps quadratures via Re/Im parts of u
    m = np.zeros((2 * n, 2 * (n + 1)))
    for k in range(n):
        for l in range(n + 1):
            re, im = u[k, l].real, u[k, l].imag
            m[2 * k, 2 * l] = re
            m[2 * k, 2 * l + 1] = -im
            m[2 * k + 1, 2 * l] = im
            m[2 * k + 1, 2 * l + 1] = re
    var_x, var_p = source.variances()
    diag = np.tile([var_x, var_p], n + 1)
    return GaussianState(np.zeros(2 * n), m @ np.diag(diag) @ m.T)


# ---------------------------------------------------------------------------
# streaming evaluation and detection-efficiency calibration
# ---------------------------------------------------------------------------


def stream_nullifier_variances(schedule: ControlSchedule, source: SqueezerSpec,
                               specs, window: int = 3) -> list[float]:
    """Analytic variance of each spec from a windowed streaming run.

    Each spec is evaluated at the first record whose window covers all of
    its modes; the window must be large enough for the widest spec.
    """
    pending = {i: set(spec.modes()) for i, spec in enumerate(specs)}
    values: dict[int, float] = {}
    for record in run_loop(schedule, source, window=window):
        covered = set(record.window_modes)
        mode_map = {m: i for i, m in enumerate(record.window_modes)}
        done = []
        for i, modes in pending.items():
            if modes <= covered:
                values[i] = variance_analytic(record.state, specs[i], mode_map)
                done.append(i)
        for i in done:
            del pending[i]
        if not pending:
            break
    if pending:
        missing = [specs[i].label for i in sorted(pending)]
        raise ValueError(f"window never covered: {', '.join(missing)}")
    return [values[i] for i in range(len(specs))]


CALIBRATION_TARGETS: tuple[tuple[str, TargetState, int, float], ...] = (
    ("epr", TargetState.epr(), 0, 0.44),
    ("ghz3", TargetState.ghz(3), 0, 0.65),
    ("ghz3", TargetState.ghz(3), 1, 0.67),
    ("ghz3", TargetState.ghz(3), 2, 0.70),
    ("cluster2", TargetState.linear_cluster(2), 0, 0.42),
    ("linear3", TargetState.linear_cluster(3), 0, 0.56),
    ("linear3", TargetState.linear_cluster(3), 1, 0.54),
    ("linear3", TargetState.linear_cluster(3), 2, 0.60),
    ("star3", TargetState.star_cluster(3), 0, 0.69),
    ("star3", TargetState.star_cluster(3), 1, 0.65),
    ("star3", TargetState.star_cluster(3), 2, 0.63),
)


@dataclass(frozen=True)
class CalibrationRow:
    name: str
    label: str
    measured: float
    base_value: float
    vacuum_value: float
    predicted: float
    residual: float


@dataclass(frozen=True)
class CalibrationResult:
    efficiency: float
    epr_row_efficiency: float
    rows: tuple[CalibrationRow, ...]

    def max_abs_residual(self) -> float:
        return max(abs(r.residual) for r in self.rows)


def calibrate_efficiency(source: SqueezerSpec | None = None,
                         noise: NoiseConfig | None = None,
                         targets=CALIBRATION_TARGETS) -> CalibrationResult:
    """Fit one detection efficiency to the measured reference values.

    Base values are simulated with the given loop noise (realistic defaults)
    and unit detection efficiency; an exiting-mode loss channel of
    transmittance eta then maps any criterion value v to
    eta*v + (1-eta)*vacuum, so the least-squares fit is closed form.
    Also reports the efficiency the EPR row alone implies against the
    noise-free value (a one-dimensional root find).
    """
    source = source or SqueezerSpec()
    noise = noise or NoiseConfig(mode="realistic")

    base: dict[str, list[tuple[str, float, float]]] = {}
    ideal_epr = None
    for name, target, _, _ in targets:
        if name in base:
            continue
        criteria = nullifiers_for(target)
        state = run_unrolled(compile_target(target, noise=noise), source)
        base[name] = [
            (crit.label,
             variance_analytic(state, crit.first)
             + variance_analytic(state, crit.second),
             crit.vacuum_variance())
            for crit in criteria
        ]
        if name == "epr":
            ideal = run_unrolled(compile_target(target), source)
            crit = criteria[0]
            ideal_epr = variance_analytic(ideal, crit.first) \
                + variance_analytic(ideal, crit.second)

    rows_raw = []
    for name, _, row_index, measured in targets:
        label, value, vac = base[name][row_index]
        rows_raw.append((name, label, measured, value, vac))

    d = np.array([vac - value for _, _, _, value, vac in rows_raw])
    gap = np.array([vac - measured for _, _, measured, _, vac in rows_raw])
    eta = float(d @ gap / (d @ d))
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"fitted efficiency {eta:.4f} is not bracketed in (0, 1]")

    eta_epr = float("nan")
    if ideal_epr is not None:
        epr_measured = next(m for nm, _, m, _, _ in rows_raw if nm == "epr")
        epr_vac = next(v for nm, _, _, _, v in rows_raw if nm == "epr")
        eta_epr = (epr_vac - epr_measured) / (epr_vac - ideal_epr)

    rows = tuple(
        CalibrationRow(
            name=name, label=label, measured=measured, base_value=value,
            vacuum_value=vac,
            predicted=eta * value + (1.0 - eta) * vac,
            residual=eta * value + (1.0 - eta) * vac - measured)
        for name, label, measured, value, vac in rows_raw
    )
    return CalibrationResult(efficiency=eta, epr_row_efficiency=float(eta_epr),
                             rows=rows)
