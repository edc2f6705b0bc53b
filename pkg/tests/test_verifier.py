import numpy as np
import pytest

from loopsynth.compiler import TargetState, compile_target
from loopsynth.engine import run_unrolled
from loopsynth.gaussian import (GaussianState, MeasurementPlan, SqueezerSpec,
                                apply_beamsplitter, apply_phase,
                                sample_quadratures, vacuum)
from loopsynth.schedule import NoiseConfig
from loopsynth.verifier import (CALIBRATION_TARGETS, NullifierSpec,
                                calibrate_efficiency,
                                cluster_nullifier, estimate,
                                linear_cluster_oracle_cov, measurement_plan,
                                nullifiers_for, plan_measurements,
                                stream_nullifier_variances, variance_analytic)

SOURCE = SqueezerSpec(5.0, 8.0)


# ---------------------------------------------------------------------------
# criterion construction
# ---------------------------------------------------------------------------


def test_epr_criteria():
    crits = nullifiers_for(TargetState.epr())
    assert len(crits) == 1
    assert crits[0].first.terms == ((1, "x", 1.0), (2, "x", -1.0))
    assert crits[0].second.terms == ((1, "p", 1.0), (2, "p", 1.0))
    assert crits[0].threshold == 1.0


def test_ghz3_criteria_share_total_momentum():
    crits = nullifiers_for(TargetState.ghz(3))
    assert len(crits) == 3
    total_p = ((1, "p", 1.0), (2, "p", 1.0), (3, "p", 1.0))
    assert all(c.second.terms == total_p for c in crits)
    firsts = [c.first.terms for c in crits]
    assert ((1, "x", 1.0), (2, "x", -1.0)) in firsts
    assert ((2, "x", 1.0), (3, "x", -1.0)) in firsts
    assert ((1, "x", 1.0), (3, "x", -1.0)) in firsts


def test_cluster_nullifier_forms():
    assert cluster_nullifier(1).terms == ((1, "p", 1.0), (2, "x", -1.0))
    assert cluster_nullifier(4).terms == ((4, "p", 1.0), (3, "x", -1.0),
                                          (5, "x", -1.0))


def test_linear5_family_has_boundary_forms():
    family = nullifiers_for(TargetState.linear_cluster(5))
    assert len(family) == 5
    assert family[0].terms == ((1, "p", 1.0), (2, "x", -1.0))
    assert family[-1].terms == ((5, "p", 1.0), (4, "x", -1.0))
    assert all(len(spec.terms) == 3 for spec in family[1:-1])


def test_star3_labels_match_cluster_frame():
    crits = nullifiers_for(TargetState.star_cluster(3))
    assert [c.first.label for c in crits] == ["p1-x3", "p2-x3", "p1-p2"]
    assert all(c.second.label == "p3-x1-x2" for c in crits)
    # lab-frame terms are the GHZ ones pushed through the local rotation
    assert crits[0].first.terms == ((1, "x", 1.0), (3, "p", -1.0))
    assert crits[2].first.terms == ((1, "x", 1.0), (2, "x", -1.0))


def test_spec_rejects_conflicting_quadratures():
    with pytest.raises(ValueError, match="both x and p"):
        NullifierSpec(((1, "x", 1.0), (1, "p", 1.0)))


# ---------------------------------------------------------------------------
# analytic evaluation
# ---------------------------------------------------------------------------


def test_vacuum_two_term_baseline():
    spec = NullifierSpec(((1, "p", 1.0), (2, "x", -1.0)))
    assert variance_analytic(vacuum(2), spec) == pytest.approx(0.5, abs=1e-15)


def test_vacuum_three_term_baseline():
    spec = cluster_nullifier(2)
    assert variance_analytic(vacuum(3), spec) == pytest.approx(0.75, abs=1e-15)


def test_mean_contributes_to_second_moment():
    state = GaussianState(np.array([0.3, 0.0]), 0.25 * np.eye(2))
    spec = NullifierSpec(((1, "x", 1.0),))
    assert variance_analytic(state, spec) == pytest.approx(0.25 + 0.09, abs=1e-12)


def test_relabeling_invariance():
    state = run_unrolled(compile_target(TargetState.linear_cluster(3)), SOURCE)
    spec = cluster_nullifier(2)
    direct = variance_analytic(state, spec)
    # present the same state with modes listed in reverse order
    perm = [2, 1, 0]
    idx = [q for m in perm for q in (2 * m, 2 * m + 1)]
    relabeled = GaussianState(state.mean[idx], state.cov[np.ix_(idx, idx)])
    mode_map = {1: 2, 2: 1, 3: 0}
    assert variance_analytic(relabeled, spec, mode_map) == pytest.approx(
        direct, abs=1e-14)


def test_passive_transforms_keep_vacuum_baselines():
    state = vacuum(3)
    state = apply_beamsplitter(state, 0, 1, 0.37)
    state = apply_phase(state, 2, 123.0)
    state = apply_beamsplitter(state, 1, 2, 0.81)
    for spec in (cluster_nullifier(1), cluster_nullifier(2)):
        assert variance_analytic(state, spec) == pytest.approx(
            spec.vacuum_variance(), abs=1e-12)


def test_ideal_cluster_nullifiers_equal_and_inseparable():
    sched = compile_target(TargetState.infinite_cluster(12))
    specs = [cluster_nullifier(k) for k in range(1, 12)]
    values = stream_nullifier_variances(sched, SOURCE, specs, window=3)
    interior = values[1:]
    assert max(interior) - min(interior) < 1e-12
    assert all(v < 0.5 for v in values)
    assert interior[0] == pytest.approx(3 * 10.0 ** -0.5 / 4.0, abs=1e-12)


def test_table_values_sit_between_zero_and_vacuum():
    pure = SqueezerSpec(5.0, 5.0)
    for name, target, row, _ in CALIBRATION_TARGETS:
        crit = nullifiers_for(target)[row]
        state = run_unrolled(compile_target(target), pure)
        value = variance_analytic(state, crit.first) \
            + variance_analytic(state, crit.second)
        assert 0.0 < value < crit.vacuum_variance(), name


def test_star_criteria_equal_ghz_criteria_values():
    noise = NoiseConfig(mode="realistic")
    ghz_state = run_unrolled(compile_target(TargetState.ghz(3), noise=noise), SOURCE)
    star_state = run_unrolled(
        compile_target(TargetState.star_cluster(3), noise=noise), SOURCE)
    ghz_crits = nullifiers_for(TargetState.ghz(3))
    star_crits = nullifiers_for(TargetState.star_cluster(3))
    # star pair ordering (1,3), (2,3), (1,2) versus GHZ (1,2), (2,3), (1,3)
    pairing = [(0, 2), (1, 1), (2, 0)]
    for star_i, ghz_i in pairing:
        star_v = variance_analytic(star_state, star_crits[star_i].first) \
            + variance_analytic(star_state, star_crits[star_i].second)
        ghz_v = variance_analytic(ghz_state, ghz_crits[ghz_i].first) \
            + variance_analytic(ghz_state, ghz_crits[ghz_i].second)
        assert star_v == pytest.approx(ghz_v, abs=1e-12)


# ---------------------------------------------------------------------------
# sampled estimation
# ---------------------------------------------------------------------------


def test_vacuum_estimate_reproduces_expected_stderr():
    plan = MeasurementPlan((0.0, 0.0), shots=5000)
    samples = sample_quadratures(vacuum(2), plan, seed=101)
    spec = NullifierSpec(((1, "x", 1.0), (2, "x", -1.0)))
    result = estimate(samples, spec)
    assert result.value == pytest.approx(0.5, abs=3 * 0.5 * np.sqrt(2 / 4999))
    assert result.stderr == pytest.approx(0.01, abs=0.002)


def test_estimate_consistent_with_analytic():
    state = run_unrolled(compile_target(TargetState.linear_cluster(3)), SOURCE)
    spec = cluster_nullifier(2)
    plan = measurement_plan([spec], num_modes=3, shots=20_000)
    samples = sample_quadratures(state, plan, seed=55)
    result = estimate(samples, spec)
    assert result.value == pytest.approx(variance_analytic(state, spec),
                                         abs=3 * result.stderr)


def test_two_shot_estimate_edge():
    plan = MeasurementPlan((0.0,), shots=2)
    samples = sample_quadratures(vacuum(1), plan, seed=5)
    result = estimate(samples, NullifierSpec(((1, "x", 1.0),)))
    assert result.stderr == pytest.approx(result.value * np.sqrt(2.0), abs=1e-12)


def test_estimate_rejects_wrong_basis():
    plan = MeasurementPlan((0.0, 0.0), shots=100)
    samples = sample_quadratures(vacuum(2), plan, seed=6)
    with pytest.raises(ValueError, match="measured at"):
        estimate(samples, NullifierSpec(((1, "p", 1.0), (2, "x", 1.0))))


def test_measurement_plan_for_epr_terms():
    spec = NullifierSpec(((1, "x", 1.0), (2, "x", -1.0)))
    assert measurement_plan([spec], num_modes=2).angles_deg == (0.0, 0.0)


def test_measurement_plan_even_family_alternates():
    even = [cluster_nullifier(k) for k in (2, 4)]
    plan = measurement_plan(even, num_modes=5)
    assert plan.angles_deg == (0.0, 90.0, 0.0, 90.0, 0.0)


def test_measurement_plan_odd_family_is_parity_shifted():
    odd = [cluster_nullifier(k) for k in (1, 3)]
    plan = measurement_plan(odd, num_modes=4)
    assert plan.angles_deg == (90.0, 0.0, 90.0, 0.0)


def test_measurement_plan_conflict_raises():
    with pytest.raises(ValueError, match="both x and p"):
        measurement_plan([cluster_nullifier(1), cluster_nullifier(2)],
                         num_modes=3)


def test_plan_measurements_splits_cluster_family_by_parity():
    family = [cluster_nullifier(k) for k in range(1, 8)]
    groups = plan_measurements(family, num_modes=8)
    assert len(groups) == 2
    sizes = sorted(len(members) for _, members in groups)
    assert sizes == [3, 4]


# ---------------------------------------------------------------------------
# closed-form oracle
# ---------------------------------------------------------------------------


def test_oracle_matches_circuit_for_all_small_sizes():
    for n in range(2, 9):
        circuit = run_unrolled(compile_target(TargetState.linear_cluster(n)), SOURCE)
        direct = linear_cluster_oracle_cov(n, SOURCE)
        assert np.max(np.abs(circuit.cov - direct.cov)) < 1e-10, n


def test_oracle_zero_db_source_gives_vacuum():
    state = linear_cluster_oracle_cov(4, SqueezerSpec(0.0, 0.0))
    assert np.allclose(state.cov, 0.25 * np.eye(8), atol=1e-12)


def test_oracle_nullifiers_scale_with_squeezing():
    # nullifier variances decay like the squeezed variance itself
    spec = cluster_nullifier(2)
    v0 = variance_analytic(linear_cluster_oracle_cov(5, SqueezerSpec(0, 0)), spec)
    v10 = variance_analytic(linear_cluster_oracle_cov(5, SqueezerSpec(10, 10)), spec)
    assert v10 / v0 == pytest.approx(0.1, abs=1e-12)


def test_stream_reports_uncoverable_specs():
    sched = compile_target(TargetState.linear_cluster(6))
    wide = NullifierSpec(((1, "x", 1.0), (6, "x", 1.0)))
    with pytest.raises(ValueError, match="window never covered"):
        stream_nullifier_variances(sched, SOURCE, [wide], window=3)


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


def test_epr_row_alone_efficiency():
    result = calibrate_efficiency()
    # eta solving eta*0.3162 + (1-eta)*1.0 = 0.44
    assert result.epr_row_efficiency == pytest.approx(0.820, abs=0.01)
    assert 0.77 <= result.epr_row_efficiency <= 0.87


def test_fitted_efficiency_reproduces_reference_rows():
    result = calibrate_efficiency()
    assert 0.0 < result.efficiency <= 1.0
    assert result.max_abs_residual() <= 0.08
    assert len(result.rows) == 11


def test_unit_efficiency_fits_worse_than_calibrated():
    result = calibrate_efficiency()
    sse_fit = sum(r.residual ** 2 for r in result.rows)
    sse_unit = sum((r.base_value - r.measured) ** 2 for r in result.rows)
    assert sse_unit > sse_fit
