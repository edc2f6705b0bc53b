"""Time-binned simulation of the loop circuit.

Two execution paths cover the same physics:

* ``run_unrolled`` builds the dense equivalent chain (one mode per pulse) and
  is the readable reference for small schedules.
* ``run_loop`` streams bin by bin, keeping only the circulating loop mode
  plus a sliding window of recently exited modes, so memory is independent
  of the schedule length.  With a measurement plan it also produces exact
  joint homodyne samples by sequential conditioning.

Per bin, the variable beam splitter couples (loop mode, incoming pulse) into
(exiting mode, new loop mode); the bin's phase is applied to the loop mode,
and in realistic mode the loop mode suffers loss and phase-jitter dephasing
once per round trip.  The mode exiting bin 1 is the pre-existing loop
content and is always discarded.

Transmissivities below 1/2 are realized on the flipped-sign branch of the
variable splitter, which the compiler compensates via 180-degree phase
entries; this engine therefore applies the branch-dependent coupling.  A
bin with T = 0 is a storage bin: the incoming pulse reflects and the loop
mode circulates unchanged.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import gaussian as g
from .gaussian import GaussianState, MeasurementPlan, SampleSet, SqueezerSpec
from .schedule import BinSetting, ControlSchedule, NoiseConfig

MAX_UNROLLED_BINS = 24

_ACTIVE_FAULTS: set[str] = set()


@contextmanager
def inject_fault(name: str):
    """Deliberately corrupt an engine convention (self-test hook)."""
    _ACTIVE_FAULTS.add(name)
    try:
        yield
    finally:
        _ACTIVE_FAULTS.discard(name)


def bin_coupling(transmissivity: float, faulty: bool = False) -> np.ndarray:
    """2x2 coupling (rows: exiting mode, loop mode) for one bin.

    T >= 1/2 sits on the default branch of the variable splitter; T < 1/2 is
    only reachable on the branch whose off-diagonal signs flip.  T = 0 acts
    as storage: pulse reflects out, loop mode unchanged.
    """
    t = float(transmissivity)
    if faulty:
        return g.beamsplitter_matrix(t)
    if t == 0.0:
        return np.array([[0.0, 1.0], [1.0, 0.0]])
    if t >= 0.5:
        return g.beamsplitter_matrix(t)
    root_t = np.sqrt(t)
    root_r = np.sqrt(1.0 - t)
    return np.array([[root_t, root_r], [-root_r, root_t]])


def _pulse_variances(setting: BinSetting, source: SqueezerSpec) -> tuple[float, float]:
    if setting.source == "squeezer":
        return source.variances()
    return g.VACUUM_VARIANCE, g.VACUUM_VARIANCE


@dataclass(frozen=True)
class RunRecord:
    """One exited mode: either a windowed analytic state or sampled values.

    ``window_modes`` lists the 1-based output indices covered by ``state``
    (the newest is ``index`` itself).  In sampling runs ``values`` holds one
    measured quadrature per shot and ``state`` is None.
    """

    index: int
    exit_bin: int
    phi_deg: float
    window_modes: tuple[int, ...] | None = None
    state: GaussianState | None = None
    values: np.ndarray | None = None


# ---------------------------------------------------------------------------
# dense reference
# ---------------------------------------------------------------------------


def run_unrolled(schedule: ControlSchedule, source: SqueezerSpec) -> GaussianState:
    """Dense equivalent-chain simulation; returns output modes 1..n jointly.

    Realistic noise (round-trip loss/jitter on the loop mode, detection
    efficiency on each exiting mode) is included when the schedule asks for
    it, so the result is detector-referred.
    """
    num_bins = len(schedule.bins)
    if num_bins > MAX_UNROLLED_BINS:
        raise ValueError(
            f"{num_bins} bins exceeds the dense reference limit of "
            f"{MAX_UNROLLED_BINS}; use run_loop")
    noise = schedule.noise
    realistic = noise.mode == "realistic"

    # slot 0: initial loop content (vacuum); slot k: pulse arriving at bin k
    dim = 2 * (num_bins + 1)
    cov = g.VACUUM_VARIANCE * np.eye(dim)
    mean = np.zeros(dim)
    for k, setting in enumerate(schedule.bins, start=1):
        var_x, var_p = _pulse_variances(setting, source)
        cov[2 * k, 2 * k] = var_x
        cov[2 * k + 1, 2 * k + 1] = var_p

    loop_slot = 0
    for k, setting in enumerate(schedule.bins, start=1):
        g._apply_pair_inplace(cov, mean, loop_slot, k, bin_coupling(setting.T))
        exit_slot, loop_slot = loop_slot, k
        g._apply_rotation_inplace(cov, mean, loop_slot, setting.theta_deg)
        if realistic:
            if k >= 2 and noise.detection_efficiency < 1.0:
                g._apply_loss_inplace(cov, mean, exit_slot,
                                      noise.detection_efficiency)
            if noise.loop_loss_per_trip > 0.0:
                g._apply_loss_inplace(cov, mean, loop_slot,
                                      1.0 - noise.loop_loss_per_trip)
            if noise.phase_jitter_deg_per_trip > 0.0:
                g._apply_dephasing_inplace(cov, mean, loop_slot,
                                           noise.phase_jitter_deg_per_trip)

    keep = [q for m in range(1, num_bins) for q in (2 * m, 2 * m + 1)]
    return GaussianState(mean[keep], cov[np.ix_(keep, keep)])


# ---------------------------------------------------------------------------
# streaming loop
# ---------------------------------------------------------------------------


class _LiveState:
    """Raw-array state for the streaming paths: exited modes then loop, last."""

    def __init__(self, shots: int | None):
        self.cov = g.VACUUM_VARIANCE * np.eye(2)  # the initial loop content
        self.shots = shots
        self.means = np.zeros((shots, 2)) if shots else None

    @property
    def num_slots(self) -> int:
        return self.cov.shape[0] // 2

    def append_pulse(self, var_x: float, var_p: float) -> None:
        d = self.cov.shape[0]
        cov = np.zeros((d + 2, d + 2))
        cov[:d, :d] = self.cov
        cov[d, d] = var_x
        cov[d + 1, d + 1] = var_p
        self.cov = cov
        if self.means is not None:
            self.means = np.hstack([self.means, np.zeros((self.shots, 2))])

    def couple(self, i: int, j: int, coupling: np.ndarray) -> None:
        idx = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1]
        s = np.kron(coupling, np.eye(2))
        self.cov[idx, :] = s @ self.cov[idx, :]
        self.cov[:, idx] = self.cov[:, idx] @ s.T
        if self.means is not None:
            self.means[:, idx] = self.means[:, idx] @ s.T

    def rotate(self, slot: int, theta_deg: float) -> None:
        r = g.rotation_matrix(theta_deg)
        idx = [2 * slot, 2 * slot + 1]
        self.cov[idx, :] = r @ self.cov[idx, :]
        self.cov[:, idx] = self.cov[:, idx] @ r.T
        if self.means is not None:
            self.means[:, idx] = self.means[:, idx] @ r.T

    def loss(self, slot: int, eta: float) -> None:
        idx = [2 * slot, 2 * slot + 1]
        root = np.sqrt(eta)
        block = self.cov[np.ix_(idx, idx)].copy()
        self.cov[idx, :] *= root
        self.cov[:, idx] *= root
        self.cov[np.ix_(idx, idx)] = eta * block \
            + (1.0 - eta) * g.VACUUM_VARIANCE * np.eye(2)
        if self.means is not None:
            self.means[:, idx] *= root

    def dephase(self, slot: int, sigma_deg: float,
                ref_block: np.ndarray | None = None) -> None:
        """Averaged jitter channel on one slot.

        When ``ref_block`` is given (the unconditioned covariance block of
        the same slot from a reference propagation), the additive part of
        the channel is taken from it, which keeps a conditioned covariance
        consistent with the unconditioned second moments.
        """
        e1, c2, s2 = g.dephasing_moments(sigma_deg)
        ix, ip = 2 * slot, 2 * slot + 1
        src = ref_block if ref_block is not None \
            else self.cov[np.ix_([ix, ip], [ix, ip])].copy()
        noise = np.array([
            [(c2 - e1 * e1) * src[0, 0] + s2 * src[1, 1], (c2 - s2 - e1 * e1) * src[0, 1]],
            [(c2 - s2 - e1 * e1) * src[0, 1], s2 * src[0, 0] + (c2 - e1 * e1) * src[1, 1]],
        ])
        self.cov[[ix, ip], :] *= e1
        self.cov[:, [ix, ip]] *= e1
        self.cov[np.ix_([ix, ip], [ix, ip])] += noise
        if self.means is not None:
            self.means[:, [ix, ip]] *= e1

    def block(self, slot: int) -> np.ndarray:
        idx = [2 * slot, 2 * slot + 1]
        return self.cov[np.ix_(idx, idx)].copy()

    def drop(self, slot: int) -> None:
        idx = [2 * slot, 2 * slot + 1]
        self.cov = np.delete(np.delete(self.cov, idx, axis=0), idx, axis=1)
        if self.means is not None:
            self.means = np.delete(self.means, idx, axis=1)

    def measure_x(self, slot: int, rng: np.random.Generator) -> np.ndarray:
        """Draw the x quadrature of ``slot`` per shot, condition, drop it."""
        ix = 2 * slot
        var = self.cov[ix, ix]
        if var < 1e-12:
            raise ValueError("measured quadrature variance is singular")
        draws = self.means[:, ix] + np.sqrt(var) * rng.standard_normal(self.shots)
        gain = self.cov[:, ix] / var
        self.means = self.means + np.outer(draws - self.means[:, ix], gain)
        self.cov = self.cov - np.outer(self.cov[:, ix], self.cov[ix, :]) / var
        self.drop(slot)
        return draws

    def snapshot(self, slots: list[int]) -> GaussianState:
        idx = [q for m in slots for q in (2 * m, 2 * m + 1)]
        return GaussianState(np.zeros(len(idx)), self.cov[np.ix_(idx, idx)])


def run_loop(schedule: ControlSchedule, source: SqueezerSpec, window: int = 8,
             seed=None, sampling: MeasurementPlan | None = None,
             ) -> Iterator[RunRecord]:
    """Stream the loop simulation, one record per non-discarded output.

    Without a plan, each record carries the joint Gaussian state of the last
    ``window`` exited modes (older modes are marginalized out, which is
    exact).  With a plan, each exiting mode is measured at its angle by
    drawing from its marginal and conditioning the live state, which yields
    exact joint samples across the entire run; records then carry the
    per-shot values.
    """
    if window < 3:
        raise ValueError("window must be >= 3 (nullifier support)")
    num_outputs = schedule.num_outputs
    if sampling is not None and len(sampling.angles_deg) != num_outputs:
        raise ValueError(
            f"plan has {len(sampling.angles_deg)} angles but the schedule "
            f"produces {num_outputs} outputs")

    noise = schedule.noise
    realistic = noise.mode == "realistic"
    faulty = "bs-sign" in _ACTIVE_FAULTS
    rng = np.random.default_rng(seed)

    live = _LiveState(shots=sampling.shots if sampling else None)
    # Unconditioned twin of the sampling state; its loop block feeds the
    # dephasing noise term so conditioning never distorts second moments.
    ref = _LiveState(shots=None) if sampling else None
    window_modes: list[int] = []

    for k, setting in enumerate(schedule.bins, start=1):
        var_x, var_p = _pulse_variances(setting, source)
        for st in (live, ref) if ref is not None else (live,):
            st.append_pulse(var_x, var_p)
            loop_slot = st.num_slots - 1
            exit_slot = loop_slot - 1
            st.couple(exit_slot, loop_slot, bin_coupling(setting.T, faulty))
            st.rotate(loop_slot, setting.theta_deg)
        if realistic and k >= 2 and noise.detection_efficiency < 1.0:
            for st in (live, ref) if ref is not None else (live,):
                st.loss(st.num_slots - 2, noise.detection_efficiency)
        if realistic and noise.loop_loss_per_trip > 0.0:
            for st in (live, ref) if ref is not None else (live,):
                st.loss(st.num_slots - 1, 1.0 - noise.loop_loss_per_trip)
        if realistic and noise.phase_jitter_deg_per_trip > 0.0:
            if ref is not None:
                ref_block = ref.block(ref.num_slots - 1)
                ref.dephase(ref.num_slots - 1, noise.phase_jitter_deg_per_trip)
                live.dephase(live.num_slots - 1, noise.phase_jitter_deg_per_trip,
                             ref_block=ref_block)
            else:
                live.dephase(live.num_slots - 1, noise.phase_jitter_deg_per_trip)

        if k == 1:
            live.drop(live.num_slots - 2)  # pre-existing loop content
            if ref is not None:
                ref.drop(ref.num_slots - 2)
            continue

        mode_index = k - 1
        phi = sampling.angles_deg[mode_index - 1] if sampling else setting.phi_deg
        if sampling:
            exit_slot = live.num_slots - 2
            live.rotate(exit_slot, -phi)
            values = live.measure_x(exit_slot, rng)
            ref.drop(ref.num_slots - 2)
            yield RunRecord(index=mode_index, exit_bin=k, phi_deg=phi,
                            values=values)
        else:
            window_modes.append(mode_index)
            if len(window_modes) > window:
                window_modes.pop(0)
                live.drop(0)
            yield RunRecord(index=mode_index, exit_bin=k, phi_deg=phi,
                            window_modes=tuple(window_modes),
                            state=live.snapshot(list(range(len(window_modes)))))


def run_loop_sampled(schedule: ControlSchedule, source: SqueezerSpec,
                     plan: MeasurementPlan, seed=None) -> SampleSet:
    """Collect a full sampling run into one shots-by-modes SampleSet."""
    columns = [rec.values for rec in
               run_loop(schedule, source, seed=seed, sampling=plan)]
    return SampleSet(plan, np.column_stack(columns))


def run_loop_per_shot_jitter(schedule: ControlSchedule, source: SqueezerSpec,
                             plan: MeasurementPlan, seed=None) -> SampleSet:
    """Sampling run with explicit random phase jitter per shot and trip.

    Slow path (one sequential simulation per shot) drawing an actual
    rotation angle for every round trip instead of using the averaged
    channel; the two must agree on second moments.
    """
    noise = schedule.noise
    realistic = noise.mode == "realistic"
    if len(plan.angles_deg) != schedule.num_outputs:
        raise ValueError("plan length mismatch")
    rng = np.random.default_rng(seed)
    sigma = noise.phase_jitter_deg_per_trip
    values = np.zeros((plan.shots, schedule.num_outputs))

    for shot in range(plan.shots):
        live = _LiveState(shots=1)
        for k, setting in enumerate(schedule.bins, start=1):
            var_x, var_p = _pulse_variances(setting, source)
            live.append_pulse(var_x, var_p)
            loop_slot = live.num_slots - 1
            exit_slot = loop_slot - 1
            live.couple(exit_slot, loop_slot, bin_coupling(setting.T))
            theta = setting.theta_deg
            if realistic and sigma > 0.0:
                theta += rng.normal(0.0, sigma)  # one jitter draw per trip
            live.rotate(loop_slot, theta)
            if realistic and k >= 2 and noise.detection_efficiency < 1.0:
                live.loss(exit_slot, noise.detection_efficiency)
            if realistic and noise.loop_loss_per_trip > 0.0:
                live.loss(loop_slot, 1.0 - noise.loop_loss_per_trip)
            if k == 1:
                live.drop(exit_slot)
                continue
            phi = plan.angles_deg[k - 2]
            live.rotate(exit_slot, -phi)
            values[shot, k - 2] = live.measure_x(exit_slot, rng)[0]
    return SampleSet(plan, values)


# ---------------------------------------------------------------------------
# quantum memory experiment
# ---------------------------------------------------------------------------


def epr_pair(source: SqueezerSpec) -> GaussianState:
    """Two-mode squeezed pair as the loop generates it.

    Pulse 1 rotated by 90 degrees, then mixed 50/50 with pulse 2; arm 1
    exits, arm 2 is the loop mode.
    """
    state = g.tensor(g.squeezed_vacuum(source), g.squeezed_vacuum(source))
    state = g.apply_phase(state, 0, 90.0)
    return g.apply_beamsplitter(state, 0, 1, 0.5)


def memory_experiment(n_delay: int, source: SqueezerSpec, noise: NoiseConfig,
                      accumulation: str = "random_walk") -> float:
    """Inseparability of an EPR pair after storing one arm for n round trips.

    Per stored trip the arm suffers the loop loss; the phase jitter
    accumulates as a random walk (total std = per-trip std * sqrt(n)), or
    linearly as a coherent drift (total = per-trip * n) when
    ``accumulation="linear"`` is selected.  Detection efficiency, when
    below 1, applies to both arms at measurement.
    """
    if n_delay < 0:
        raise ValueError("n_delay must be >= 0")
    if accumulation not in ("random_walk", "linear"):
        raise ValueError(f"unknown accumulation {accumulation!r}")
    state = epr_pair(source)
    if noise.mode == "realistic" and n_delay > 0:
        if noise.loop_loss_per_trip > 0.0:
            state = g.apply_loss(state, 1,
                                 (1.0 - noise.loop_loss_per_trip) ** n_delay)
        if noise.phase_jitter_deg_per_trip > 0.0:
            scale = np.sqrt(n_delay) if accumulation == "random_walk" else n_delay
            state = g.apply_dephasing(state, 1,
                                      noise.phase_jitter_deg_per_trip * scale)
    if noise.mode == "realistic" and noise.detection_efficiency < 1.0:
        state = g.apply_loss(state, 0, noise.detection_efficiency)
        state = g.apply_loss(state, 1, noise.detection_efficiency)
    c = state.cov
    var_minus = c[0, 0] + c[2, 2] - 2.0 * c[0, 2]
    var_plus = c[1, 1] + c[3, 3] + 2.0 * c[1, 3]
    return float(var_minus + var_plus)
