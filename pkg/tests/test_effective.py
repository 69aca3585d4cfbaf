import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from ybqudit.atom import GHZ, MHZ, FieldConfig, builtin_spec, excited_block, excited_spectrum
from ybqudit.effective import (
    DELTA_FLOOR,
    basis_index,
    coefficient_grid,
    effective_hamiltonian,
    excited_population_bound,
    five_diagonal_hamiltonian,
    lower_labels,
    polarizability,
    scattered_photons_bound,
)
from ybqudit.exceptions import SingularExcitedManifold
from ybqudit.spinops import dipole_components

SPEC = builtin_spec("Yb173_3P1")


def near_manifold_point(B, offset_mhz):
    evals, _ = excited_spectrum(SPEC, B)
    center = 0.5 * (evals.min() + evals.max())
    det = center + offset_mhz * MHZ
    assume(np.min(np.abs(evals - det)) > DELTA_FLOOR)
    return det


@given(B=st.floats(50, 2000), off=st.floats(-5e3, 5e3), theta=st.floats(0, math.pi / 2),
       rabi=st.floats(1, 100))
def test_h_eff_is_five_diagonal_and_hermitian(B, off, theta, rabi):
    det = near_manifold_point(B, off)
    h = effective_hamiltonian(SPEC, FieldConfig(B, det, rabi * MHZ, theta)).h_eff
    norm = np.abs(h).max()
    i, j = np.indices(h.shape)
    assert np.abs(h[np.abs(i - j) > 2]).max() <= 1e-12 * norm
    assert np.abs(h - h.conj().T).max() <= 1e-12 * norm


@given(B=st.floats(50, 2000), off=st.floats(-5e3, 5e3))
def test_polarizability_block_hermiticity(B, off):
    det = near_manifold_point(B, off)
    a = polarizability(SPEC, B, det).alpha
    swapped = np.conj(np.transpose(a, (1, 0, 3, 2)))
    assert np.abs(a - swapped).max() <= 1e-12 * np.abs(a).max()


@pytest.mark.parametrize("B,det_ghz", [(50, -1.0), (500, -3.0), (500, 1.2), (1500, -4.5)])
def test_resolvent_matches_linear_solve(B, det_ghz):
    # independent path: solve (H_E - Delta) x = D_j |g, m> column by column
    det = det_ghz * GHZ
    tensor = polarizability(SPEC, B, det)
    n = SPEC.n_nuclear
    h = excited_block(SPEC, B, det)
    d = [np.kron(op[1:, :1], np.eye(n)) for op in dipole_components()]
    ref = np.empty_like(tensor.alpha)
    for i in range(3):
        for j in range(3):
            x = np.linalg.solve(h, d[j])
            ref[i, j] = d[i].conj().T @ x
    assert np.abs(tensor.alpha - ref).max() <= 1e-10 * np.abs(ref).max()


@given(B=st.floats(50, 2000), off=st.floats(-5e3, 5e3), theta=st.floats(0, math.pi / 2),
       rabi=st.floats(1, 100))
def test_reconstruction_from_coefficients(B, off, theta, rabi):
    det = near_manifold_point(B, off)
    model = effective_hamiltonian(SPEC, FieldConfig(B, det, rabi * MHZ, theta))
    rebuilt = five_diagonal_hamiltonian(model.ground, model.s_z, model.s_x, model.g, model.h,
                                        rabi * MHZ, theta)
    assert np.abs(rebuilt - model.h_eff).max() <= 1e-12 * np.abs(model.h_eff).max()


def test_theta_quadrature():
    t = polarizability(SPEC, 500.0, -3 * GHZ)
    a = t.alpha
    for theta in (0.0, 0.3, math.pi / 4, math.pi / 2):
        s, c = math.sin(theta), math.cos(theta)
        expected = s * s * t.component("xx") + c * c * t.component("zz") + s * c * (a[0, 2] + a[2, 0])
        np.testing.assert_allclose(t.contract(theta), expected, rtol=0, atol=1e-15 * np.abs(a).max())


@pytest.mark.parametrize("det", [-2 * math.pi * 1e12, 2 * math.pi * 1e12, -2 * math.pi * 5e12])
def test_far_detuned_asymptote(det):
    m = effective_hamiltonian(SPEC, FieldConfig(500.0, det, 0.0))
    np.testing.assert_allclose(m.s_z, -1 / det, rtol=1e-2)
    np.testing.assert_allclose(m.s_x, -1 / det, rtol=1e-2)


def test_theta_zero_is_diagonal():
    m = effective_hamiltonian(SPEC, FieldConfig(500.0, -3 * GHZ, 15 * MHZ, 0.0))
    off = m.h_eff - np.diag(np.diag(m.h_eff))
    assert np.abs(off).max() <= 1e-12 * np.abs(m.h_eff).max()


def test_coefficient_grid_matches_pointwise():
    dets = np.array([-4.0, -3.0, -1.7, 2.0]) * GHZ
    grid = coefficient_grid(SPEC, 700.0, dets)
    for k, det in enumerate(dets):
        m = effective_hamiltonian(SPEC, FieldConfig(700.0, det, 0.0))
        for a, b in ((grid.s_z[k], m.s_z), (grid.s_x[k], m.s_x), (grid.g[k], m.g), (grid.h[k], m.h)):
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-14 * np.abs(b).max())
        assert grid.delta_min[k] == pytest.approx(m.delta_min)


def test_singular_point_raises_and_grid_marks_nan():
    evals, _ = excited_spectrum(SPEC, 500.0)
    with pytest.raises(SingularExcitedManifold):
        polarizability(SPEC, 500.0, evals[3] + 0.1 * MHZ)
    grid = coefficient_grid(SPEC, 500.0, [evals[3] + 0.1 * MHZ, -3 * GHZ])
    assert grid.singular.tolist() == [True, False]
    assert np.isnan(grid.s_z[0]).all() and np.isfinite(grid.s_z[1]).all()


def test_excited_population_bound_example():
    # Omega_E / 2pi = 20 MHz, delta_min / 2pi = 1 GHz
    assert excited_population_bound(20 * MHZ, 1 * GHZ) == pytest.approx(1e-4, rel=1e-12)
    with pytest.raises(ValueError):
        excited_population_bound(1.0, 0.0)


def test_excited_population_bound_tracks_full_space(refpoint_cfg):
    # the crude bound should upper-bound the stationary excited population
    from ybqudit.atom import full_hamiltonian

    model = effective_hamiltonian(SPEC, refpoint_cfg)
    bound = excited_population_bound(refpoint_cfg.rabi, model.delta_min)
    h = full_hamiltonian(SPEC, refpoint_cfg)
    evals, vecs = np.linalg.eigh(h)
    n = SPEC.n_nuclear
    # dressed ground states: the 6 eigenvectors with the most ground weight
    weight = (np.abs(vecs[:n]) ** 2).sum(axis=0)
    dressed = vecs[:, np.argsort(weight)[-n:]]
    p_exc = (np.abs(dressed[n:]) ** 2).sum(axis=0)
    assert p_exc.max() <= bound


def test_scattered_photons_example(spec3):
    # p_E = 0.01, f_op = 100 kHz, Gamma = 2pi x 183 kHz
    assert scattered_photons_bound(spec3, 0.01, 1e5) == pytest.approx(0.115, abs=1e-3)


def test_labels_and_indices():
    np.testing.assert_array_equal(lower_labels(SPEC), [-2.5, -1.5, -0.5, 0.5, 1.5])
    assert basis_index(SPEC, 2.5) == 0 and basis_index(SPEC, -2.5) == 5
    m = effective_hamiltonian(SPEC, FieldConfig(500.0, -3 * GHZ, 15 * MHZ, 0.4))
    k = m.transition(-0.5)
    lo, up = m.index(-0.5), m.index(0.5)
    cross = m.g[k]
    pref = (15 * MHZ) ** 2 / 4
    assert m.h_eff[lo, up] == pytest.approx(-pref * np.conj(cross) * math.sin(0.4) * math.cos(0.4)) or \
        m.h_eff[up, lo] == pytest.approx(-pref * cross * math.sin(0.4) * math.cos(0.4))
