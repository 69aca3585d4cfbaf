"""Exact propagation of the rotating-frame Hamiltonian.

The rotating-frame Hamiltonian is time independent, so states are evolved
by exact exponentiation through an eigendecomposition. Used to check the
effective model: flop frequency, excited population and leakage out of the
target pair.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares

from .atom import TWO_PI, AtomSpec, FieldConfig, full_hamiltonian
from .effective import EffectiveModel, basis_index, effective_hamiltonian, scattered_photons_bound
from .exceptions import FitError, InfeasiblePoint
from .raman import Thresholds, evaluate_point

__all__ = [
    "PropagationTrace",
    "ValidationReport",
    "propagate",
    "simulate_flip",
    "fit_oscillation",
    "validate_effective",
    "effective_propagate",
    "trace_csv",
    "VALIDATION_DEVIATION",
    "VALIDATION_P_EXCITED",
    "VALIDATION_LEAKAGE",
]

VALIDATION_DEVIATION = 0.10
VALIDATION_P_EXCITED = 2e-2
VALIDATION_LEAKAGE = 2e-2
_EIG_RESIDUAL = 1e-8


@dataclass(frozen=True)
class PropagationTrace:
    """State history on a time grid (seconds).

    ``excited`` flags the excited-manifold rows; ``pair`` holds the basis
    indices (lower, upper) of the driven transition when there is one.
    """

    times: np.ndarray
    amplitudes: np.ndarray  # (n_t, dim)
    excited: np.ndarray
    pair: tuple | None = None
    decay: float = 0.0

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self) -> np.ndarray:
        return np.sqrt(self.populations.sum(axis=1))

    @property
    def p_excited(self) -> np.ndarray:
        return self.populations[:, self.excited].sum(axis=1)

    @property
    def pair_populations(self) -> np.ndarray:
        if self.pair is None:
            raise ValueError("trace has no target pair")
        return self.populations[:, list(self.pair)]

    @property
    def leakage(self) -> np.ndarray:
        """Ground population outside the target pair."""
        p = self.populations
        ground = p[:, ~self.excited].sum(axis=1)
        return ground - self.pair_populations.sum(axis=1)

    def window(self, t_end: float) -> "PropagationTrace":
        keep = self.times <= t_end * (1 + 1e-12)
        return PropagationTrace(self.times[keep], self.amplitudes[keep], self.excited,
                                self.pair, self.decay)


def _check_state(psi0, dim):
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    if psi0.shape != (dim,):
        raise ValueError(f"state has length {psi0.size}, expected {dim}")
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("initial state is not normalized")
    return psi0


def propagate(h: np.ndarray, psi0, times, decay: float | None = None, excited=None,
              pair=None) -> PropagationTrace:
    """``psi(t) = exp(-i H t) psi0`` on ``times`` (s), H in rad/s.

    With ``decay`` (Gamma, rad/s) the excited rows get ``-i Gamma/2`` and the
    norm decreases; the general eigendecomposition is used when its residual
    is below 1e-8 relative, otherwise a scaling-and-squaring exponential.
    """
    h = np.asarray(h, dtype=complex)
    dim = h.shape[0]
    psi0 = _check_state(psi0, dim)
    t = np.asarray(times, dtype=float).ravel()
    mask = np.zeros(dim, bool) if excited is None else np.asarray(excited, bool)
    if decay:
        if not mask.any():
            raise ValueError("decay needs an excited-state mask")
        h = h - 0.5j * decay * np.diag(mask.astype(float))
        amps = _nonhermitian_evolve(h, psi0, t)
    else:
        e, v = np.linalg.eigh(h)
        c = v.conj().T @ psi0
        amps = (np.exp(-1j * np.outer(t, e)) * c) @ v.T
    return PropagationTrace(t, amps, mask, None if pair is None else tuple(pair), float(decay or 0.0))


def _nonhermitian_evolve(h, psi0, t):
    e, v = np.linalg.eig(h)
    scale = max(np.abs(h).max(), 1e-300)
    resid = np.abs(h @ v - v * e).max() / scale
    try:
        cond = np.linalg.cond(v)
    except np.linalg.LinAlgError:
        cond = math.inf
    if resid <= _EIG_RESIDUAL and cond < 1e8:
        c = np.linalg.solve(v, psi0)
        return (np.exp(-1j * np.outer(t, e)) * c) @ v.T
    out = np.empty((t.size, h.shape[0]), complex)
    for i, ti in enumerate(t):
        out[i] = expm(-1j * h * ti) @ psi0
    return out


def simulate_flip(spec: AtomSpec, cfg: FieldConfig, m: float, duration: float | None = None,
                  n_points: int = 2001, thresholds: Thresholds = Thresholds(),
                  decay: bool = False) -> PropagationTrace:
    """Full-space evolution from ``|g, m>`` at the magic angle of ``m -> m+1``.

    The point must have a magic angle and satisfy the excited-population
    bound; ``cfg.theta`` is replaced by theta*. ``duration`` defaults to one
    flop, ``2 pi / Omega_R``.
    """
    rec = evaluate_point(spec, cfg, m, thresholds)
    if not rec.magic.exists:
        raise InfeasiblePoint(f"no magic angle ({rec.magic.reason})", "no magic angle")
    if not rec.p_excited_bound <= thresholds.p_max:
        raise InfeasiblePoint(f"p_E bound {rec.p_excited_bound:.3g} exceeds {thresholds.p_max}",
                              "population bound")
    run = cfg.with_theta(rec.magic.theta_star)
    h = full_hamiltonian(spec, run)
    if duration is None:
        duration = TWO_PI / rec.raman_rabi
    n = spec.n_nuclear
    lo = basis_index(spec, m)
    psi0 = np.zeros(spec.dim, complex)
    psi0[lo] = 1
    mask = np.arange(spec.dim) >= n
    t = np.linspace(0.0, duration, n_points)
    return propagate(h, psi0, t, spec.decay_rate if decay else None, mask, (lo, lo - 1))


def fit_oscillation(t, y, pad: int = 8):
    """Fit ``a + b cos(w t + phi)``; returns (w, b, phi, a) with w in rad/s.

    The start value comes from the zero-padded FFT peak; least squares
    refines all four parameters.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if t.size < 8:
        raise FitError("too few samples")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise FitError("time grid must be uniform")
    yc = y - y.mean()
    if np.ptp(yc) <= 1e-12 * max(1.0, np.abs(y).max()):
        raise FitError("trace is not oscillatory")
    nfft = pad * t.size
    spec = np.abs(np.fft.rfft(yc, nfft))
    freqs = np.fft.rfftfreq(nfft, dt[0])
    k = int(np.argmax(spec[1:]) + 1)
    w0 = TWO_PI * freqs[k]
    basis = np.column_stack([np.ones_like(t), np.cos(w0 * t), np.sin(w0 * t)])
    (a0, c0, s0), *_ = np.linalg.lstsq(basis, y, rcond=None)
    b0 = math.hypot(c0, s0)
    phi0 = math.atan2(-s0, c0)

    tau = t - t[0]
    span = tau[-1]

    def resid(q):
        # frequency enters as w * span so all parameters are O(1)
        return q[3] + q[1] * np.cos(q[0] * tau / span + q[2]) - y

    sol = least_squares(resid, [w0 * span, b0, phi0 + w0 * t[0], a0],
                        method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if not sol.success:
        raise FitError(sol.message)
    w, b, phi, a = sol.x[0] / span, sol.x[1], sol.x[2] - sol.x[0] / span * t[0], sol.x[3]
    if b < 0:
        b, phi = -b, phi + math.pi
    return float(abs(w)), float(b), float(phi), float(a)


@dataclass(frozen=True)
class ValidationReport:
    """Full-space check of an effective-model flip.

    ``max_p_excited`` and ``max_leakage`` cover the first flop; the
    ``*_window`` fields cover the whole fitted window.
    """

    B: float
    detuning: float
    rabi: float
    transition: float
    theta_star: float
    fitted_frequency: float
    raman_rabi: float
    relative_deviation: float
    max_p_excited: float
    max_leakage: float
    max_target_population: float
    max_p_excited_window: float
    max_leakage_window: float
    n_scattered: float
    verdict: bool
    periods: float
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "extra"}
        out["verdict"] = "pass" if self.verdict else "fail"
        out.update(self.extra)
        return out


def validate_effective(spec: AtomSpec, cfg: FieldConfig, m: float, periods: float = 3.0,
                       samples_per_period: int = 800,
                       thresholds: Thresholds = Thresholds()) -> ValidationReport:
    """Compare full-space flopping with the effective Raman frequency.

    The population difference of the target pair is fitted over ``periods``
    flops; excited population and leakage are judged over the first flop,
    the window a single gate occupies. The scattered-photon estimate uses
    the mean excited population over that flop and ``f_op = Omega_R/2pi``.
    """
    if periods < 3:
        raise ValueError("fit window must cover at least three periods")
    rec = evaluate_point(spec, cfg, m, thresholds)
    if not rec.magic.exists or not rec.p_excited_bound <= thresholds.p_max:
        reason = rec.reason or "infeasible"
        raise InfeasiblePoint(f"cannot validate: {reason}", reason)
    period = TWO_PI / rec.raman_rabi
    n = int(math.ceil(periods * samples_per_period)) + 1
    trace = simulate_flip(spec, cfg, m, periods * period, n, thresholds)
    pops = trace.pair_populations
    w, *_ = fit_oscillation(trace.times, pops[:, 0] - pops[:, 1])
    gate = trace.window(period)
    p_e = gate.p_excited
    mean_pe = float(np.trapezoid(p_e, gate.times) / gate.times[-1])
    dev = abs(w - rec.raman_rabi) / rec.raman_rabi
    max_pe = float(p_e.max())
    max_leak = float(gate.leakage.max())
    verdict = (dev <= VALIDATION_DEVIATION and max_pe <= VALIDATION_P_EXCITED
               and max_leak <= VALIDATION_LEAKAGE)
    return ValidationReport(
        cfg.B, cfg.detuning, cfg.rabi, m, rec.magic.theta_star, w, rec.raman_rabi, dev,
        max_pe, max_leak, float(gate.pair_populations[:, 1].max()),
        float(trace.p_excited.max()), float(trace.leakage.max()),
        scattered_photons_bound(spec, mean_pe, rec.raman_rabi / TWO_PI), bool(verdict),
        float(periods), {"mean_p_excited": mean_pe, "leakage_estimate": rec.leakage_max,
                         "p_excited_bound": rec.p_excited_bound})


def effective_propagate(model: EffectiveModel, psi0, times, pair=None) -> PropagationTrace:
    """Evolve under the 6x6 effective Hamiltonian (no excited rows)."""
    return propagate(model.h_eff, psi0, times, excited=np.zeros(model.h_eff.shape[0], bool),
                     pair=pair)


def trace_csv(trace: PropagationTrace, labels=None) -> str:
    """CSV text: time_s, one population column per basis state, norm."""
    dim = trace.amplitudes.shape[1]
    labels = labels or [f"P{k}" for k in range(dim)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s"] + list(labels) + ["norm"])
    pops = trace.populations
    for t, row, nrm in zip(trace.times, pops, trace.norm):
        w.writerow([f"{t:.12e}"] + [f"{p:.12e}" for p in row] + [f"{nrm:.15f}"])
    return buf.getvalue()
