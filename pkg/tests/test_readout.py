import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ybqudit.atom import KHZ, MHZ, builtin_spec, excited_spectrum
from ybqudit.readout import (
    Addressing,
    bright_rate,
    channel_couplings,
    dark_rates,
    default_addressing,
    describe_addressing,
    readout_point,
    scan_readout,
)
from ybqudit.spinops import m_values

SPECS = [builtin_spec("Yb173_3P1"), builtin_spec("Yb173_1P1")]
FIELDS = np.arange(100.0, 1000.0 + 1e-9, 50.0)


def test_bright_rate_examples():
    g = 2.0
    assert bright_rate(g, g / math.sqrt(2)) == pytest.approx(g / 4)  # s = 1
    assert bright_rate(g, g / math.sqrt(2), g) == pytest.approx(g / 12)
    assert bright_rate(g, 1e6 * g) == pytest.approx(g / 2, rel=1e-9)
    with pytest.raises(ValueError):
        bright_rate(0.0, 1.0)


@given(rabi=st.floats(0, 1e9), det=st.floats(-1e9, 1e9), scale=st.floats(1.0, 10.0))
def test_bright_rate_bounds_and_monotone(rabi, det, scale):
    g = SPECS[0].decay_rate
    r = bright_rate(g, rabi, det)
    assert 0 <= r <= g / 2
    assert bright_rate(g, scale * rabi, det) >= r * (1 - 1e-12)


def test_vectorized_bright_rate():
    rabis = np.array([0.1, 1.0, 10.0]) * MHZ
    out = bright_rate(SPECS[1].decay_rate, rabis)
    assert out.shape == (3,)
    assert [bright_rate(SPECS[1].decay_rate, r) for r in rabis] == pytest.approx(out.tolist())


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
def test_addressed_channel_has_maximal_coupling(spec):
    add = default_addressing(spec)
    _, beta, _ = channel_couplings(spec, 500.0, add.sign)
    k = int(np.flatnonzero(m_values(spec.nuclear_spin) == add.sign * spec.nuclear_spin)[0])
    assert beta[:, k].max() == pytest.approx(1.0, abs=1e-12)
    assert beta.max() <= 1.0 + 1e-12


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
def test_addressed_excited_state_is_stretched(spec):
    add = default_addressing(spec)
    evals, evecs = excited_spectrum(spec, 500.0)
    _, beta, _ = channel_couplings(spec, 500.0, add.sign)
    k = int(np.flatnonzero(m_values(spec.nuclear_spin) == add.sign * spec.nuclear_spin)[0])
    nu = int(np.argmax(beta[:, k]))
    # |m_J = sign, m_I = sign*I> is row (1 - sign) * n + k in the (m_J=+1, 0, -1) x m_I ordering
    row = (1 - add.sign) * spec.n_nuclear + k
    assert abs(evecs[row, nu]) == pytest.approx(1.0, abs=1e-10)


def test_default_sides():
    assert default_addressing(SPECS[0]).side == "lower"
    assert default_addressing(SPECS[1]).side == "upper"
    assert describe_addressing(SPECS[0], Addressing("lower")).startswith("sigma-")
    with pytest.raises(ValueError):
        Addressing("middle")


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
def test_point_invariants(spec):
    for p in scan_readout(spec, [100.0, 700.0, 1500.0], MHZ * np.logspace(-2, 2, 9)):
        assert p.bright <= spec.decay_rate / 2
        assert p.dark >= 0 and all(c.rate >= 0 for c in p.channels)
        assert p.contrast == p.bright / p.dark
        assert p.dark == max(c.rate for c in p.channels)
        assert len({c.ground for c in p.channels}) == 5
        assert p.addressed[1] not in {c.ground for c in p.channels}


def test_weak_drive_limit():
    spec = SPECS[0]
    p = readout_point(spec, 500.0, 1e-6 * MHZ)
    assert p.bright < 1e-9 * spec.decay_rate and p.dark < 1e-9 * spec.decay_rate
    q = readout_point(spec, 500.0, 2e-6 * MHZ)
    # both rates scale as Omega^2 in the weak limit, so the contrast is finite and fixed
    assert q.contrast == pytest.approx(p.contrast, rel=1e-6)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
def test_bright_rate_monotone_in_drive(spec):
    pts = list(scan_readout(spec, [500.0], MHZ * np.logspace(-2, 2, 30)))
    rb = [p.bright for p in pts]
    assert all(b >= a for a, b in zip(rb, rb[1:]))


def test_narrow_line_regime():
    spec = SPECS[0]
    p = readout_point(spec, 500.0, 1.0 * MHZ)
    assert p.dark_over_gamma <= 1e-5
    assert p.contrast >= 1e5
    assert p.bright <= spec.decay_rate / 2


def test_broad_line_regime():
    spec = SPECS[1]
    p = readout_point(spec, 1000.0, 10.0 * MHZ)
    assert p.bright > 1 * MHZ
    assert 10**1.5 <= p.contrast <= 1e3
    assert 1e-4 <= p.dark_over_gamma <= 1e-2


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
def test_field_hardening(spec):
    pts = [readout_point(spec, B, 1.0 * MHZ) for B in FIELDS]
    dom = [abs(p.dominant.detuning) for p in pts]
    assert all(b > a for a, b in zip(dom, dom[1:]))
    c = [p.contrast for p in pts]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(c, c[1:]))


@pytest.mark.parametrize("spec,delta", [(SPECS[0], 0.5 * KHZ), (SPECS[1], 100 * KHZ)],
                         ids=lambda x: getattr(x, "label", ""))
def test_small_detuning_trades_speed_for_contrast(spec, delta):
    base = readout_point(spec, 500.0, 1.0 * MHZ)
    away = -math.copysign(delta, base.dominant.detuning)
    shifted = readout_point(spec, 500.0, 1.0 * MHZ, probe_detuning=away)
    assert shifted.bright < base.bright
    assert shifted.contrast > base.contrast


def test_dark_channel_detunings_are_transition_differences():
    spec = SPECS[0]
    add = default_addressing(spec)
    evals, beta, eg = channel_couplings(spec, 800.0, add.sign)
    k0 = 5
    nu0 = int(np.argmax(beta[:, k0]))
    for ch in dark_rates(spec, 800.0, 1.0 * MHZ, add):
        k = int(np.flatnonzero(m_values(2.5) == ch.ground)[0])
        expected = (evals[ch.excited] - eg[k]) - (evals[nu0] - eg[k0])
        assert ch.detuning == pytest.approx(expected, rel=1e-12, abs=1e-3)
        assert ch.beta > 1e-6


def test_empty_grid_rejected():
    with pytest.raises(ValueError):
        list(scan_readout(SPECS[0], [], [1.0]))
