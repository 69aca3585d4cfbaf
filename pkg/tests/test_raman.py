import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ybqudit.atom import GHZ, KHZ, MHZ, TWO_PI, FieldConfig, builtin_spec
from ybqudit.dynamics import validate_effective
from ybqudit.effective import effective_hamiltonian, lower_labels
from ybqudit.raman import (
    Thresholds,
    best_over_rabi,
    describe_transition,
    effective_splitting,
    evaluate_point,
    feasibility_cells,
    leakage_bounds,
    magic_angle,
    numeric_magic_angle,
    raman_rabi,
    scan_phase_diagram,
    summarize_cells,
    summarize_vs_B,
)

SPEC = builtin_spec("Yb173_3P1")


@pytest.fixture(scope="module")
def refpoint_model():
    return effective_hamiltonian(SPEC, FieldConfig(500.0, -3 * GHZ, 15 * MHZ))


def test_refpoint_magic_angle_exists(refpoint_model):
    res = magic_angle(refpoint_model, -0.5)
    assert res.exists
    assert res.residual <= TWO_PI * 1.0
    assert 0 < res.theta_star < math.pi / 2


def test_closed_form_matches_golden_section(refpoint_model):
    res = magic_angle(refpoint_model, -0.5)
    assert abs(numeric_magic_angle(refpoint_model, -0.5) - res.theta_star) <= 1e-8


def test_splitting_vanishes_at_magic_angle_for_each_transition(refpoint_model):
    for m in lower_labels(SPEC):
        res = magic_angle(refpoint_model, m)
        if res.exists:
            scale = abs(effective_splitting(refpoint_model, m, 0.0))
            assert abs(effective_splitting(refpoint_model, m, res.theta_star)) <= 1e-9 * scale


def test_raman_rate_is_matrix_element(refpoint_model):
    # twice |<m+1|H_eff|m>| at theta* equals Omega_R
    res = magic_angle(refpoint_model, -0.5)
    h = refpoint_model.hamiltonian(theta=res.theta_star)
    lo = refpoint_model.index(-0.5)
    assert 2 * abs(h[lo - 1, lo]) == pytest.approx(res.raman_rabi, rel=1e-12)
    assert raman_rabi(refpoint_model, -0.5, 0.0) == 0.0


def test_zero_drive_has_no_magic_angle():
    m = effective_hamiltonian(SPEC, FieldConfig(500.0, -3 * GHZ, 0.0))
    res = magic_angle(m, -0.5)
    assert not res.exists and res.reason == "no magic angle"


def test_population_bound_failure_reason():
    # 100 MHz drive 300 MHz from the nearest level violates p_E <= 1e-2
    from ybqudit.atom import excited_spectrum

    evals, _ = excited_spectrum(SPEC, 500.0)
    det = evals.min() - 300 * MHZ
    rec = evaluate_point(SPEC, FieldConfig(500.0, det, 100 * MHZ), -0.5)
    assert rec.p_excited_bound > 1e-2
    assert not rec.feasible
    assert rec.reason in ("population bound", "no magic angle")


def test_refpoint_leakage_estimate_reported(refpoint_model):
    res = magic_angle(refpoint_model, -0.5)
    channels, worst = leakage_bounds(refpoint_model, -0.5, res.theta_star)
    assert worst == max(c.leakage for c in channels)
    assert all(0 <= c.leakage <= 1 for c in channels)
    # nearest and next-nearest spectators of a 6-level ladder: 4 + 4
    assert len(channels) == 8


@pytest.mark.xfail(strict=True, reason="two-level leakage estimate at the reference point is "
                   "about 0.063 (the +1/2<->+3/2 spectator), above 1e-2; see decisions ledger")
def test_refpoint_point_feasible_under_estimate(refpoint_cfg):
    assert evaluate_point(SPEC, refpoint_cfg, -0.5).feasible


def test_leakage_estimate_bounds_simulated_leakage(refpoint_cfg, refpoint_model):
    res = magic_angle(refpoint_model, -0.5)
    _, worst = leakage_bounds(refpoint_model, -0.5, res.theta_star)
    rep = validate_effective(SPEC, refpoint_cfg, -0.5)
    assert rep.max_leakage <= worst


@pytest.mark.parametrize("B", [300.0, 700.0])
def test_vectorized_matches_scalar(B):
    rng = np.random.default_rng(int(B))
    cells = feasibility_cells(SPEC, B, rabis=MHZ * np.array([5.0, 15.0, 40.0]))
    picks = rng.choice(cells.detunings.size, 12, replace=False)
    for d in picks:
        for o, rabi in enumerate(cells.rabis):
            for t, m in enumerate(cells.transitions):
                rec = evaluate_point(SPEC, FieldConfig(B, cells.detunings[d], rabi), m)
                assert rec.feasible == bool(cells.feasible[d, o, t])
                assert rec.magic.exists == bool(cells.exists[d, o, t])
                if rec.magic.exists:
                    assert cells.theta[d, o, t] == pytest.approx(rec.magic.theta_star, rel=1e-9)
                    assert cells.raman_rabi[d, o, t] == pytest.approx(rec.raman_rabi, rel=1e-9)
                    assert cells.leakage[d, o, t] == pytest.approx(rec.leakage_max, rel=1e-8, abs=1e-14)


def test_records_match_cells_and_residual_certificate():
    cells = feasibility_cells(SPEC, 500.0, rabis=MHZ * np.array([10.0, 30.0]))
    recs = list(cells.records())
    assert len(recs) == cells.feasible.size
    assert sum(r.feasible for r in recs) == int(cells.feasible.sum())
    ok = cells.exists
    assert np.all(cells.residual[ok] <= TWO_PI * 1.0)


def test_every_transition_feasible_at_500G():
    cells = feasibility_cells(SPEC, 500.0)
    assert cells.feasible.any(axis=(0, 1)).all()


@pytest.mark.parametrize("B", [500.0, 750.0, 1000.0])
def test_fast_raman_cells_exist(B):
    cells = feasibility_cells(SPEC, B)
    assert np.max(np.where(cells.feasible, cells.raman_rabi, 0.0)) >= 100 * KHZ


@given(scale=st.floats(1.05, 3.0))
def test_raman_rate_monotone_in_drive(scale):
    # at fixed geometry Omega_R scales as Omega^2 when theta is held fixed
    m1 = effective_hamiltonian(SPEC, FieldConfig(500.0, -3 * GHZ, 10 * MHZ))
    m2 = effective_hamiltonian(SPEC, FieldConfig(500.0, -3 * GHZ, 10 * scale * MHZ))
    assert raman_rabi(m2, -0.5, 0.5) == pytest.approx(scale**2 * raman_rabi(m1, -0.5, 0.5), rel=1e-12)


def test_summary_paths_agree_and_order():
    B_grid = [400.0, 800.0]
    rabis = MHZ * np.logspace(0, 2, 12)
    recs = list(scan_phase_diagram(SPEC, B_grid, rabi_grid=rabis))
    summ = summarize_vs_B(recs)
    assert [s.B for s in summ] == B_grid
    for s, B in zip(summ, B_grid):
        alt = summarize_cells(feasibility_cells(SPEC, B, rabis=rabis))
        assert alt.n_feasible == s.n_feasible
        assert alt.median_of_medians == pytest.approx(s.median_of_medians)
        assert s.median_of_medians <= s.median_of_maxima


def test_best_over_rabi_picks_maximum():
    cells = feasibility_cells(SPEC, 600.0, rabis=MHZ * np.array([5.0, 20.0, 60.0]))
    for cell, (d, t) in zip(best_over_rabi(cells), np.ndindex(cells.detunings.size, cells.transitions.size)):
        rates = np.where(cells.feasible[d, :, t], cells.raman_rabi[d, :, t], 0.0)
        assert cell.feasible == bool(cells.feasible[d, :, t].any())
        assert cell.best_raman_rabi == pytest.approx(rates.max())


def test_threshold_tightening_is_monotone():
    loose = feasibility_cells(SPEC, 500.0, rabis=MHZ * np.array([10.0, 30.0]),
                              thresholds=Thresholds(leak_max=5e-2))
    tight = feasibility_cells(SPEC, 500.0, rabis=MHZ * np.array([10.0, 30.0]))
    assert np.all(loose.feasible | ~tight.feasible)


def test_describe_transition():
    assert describe_transition(-0.5) == "-1/2<->+1/2"
