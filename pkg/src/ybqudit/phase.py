"""Diagonal phase gates from state-dependent light shifts.

At theta = 0 only the pi (m_J = 0) channel couples, H_eff is diagonal and
each nuclear level picks up a light shift ``-(Omega^2/4) s_m^z``. The
relative phases are generated by the centered shifts ``S_m``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .atom import MHZ, AtomSpec, excited_spectrum, min_detuning
from .effective import DELTA_FLOOR, EffectiveModel, coefficient_grid
from .exceptions import SingularExcitedManifold
from .spinops import m_values

__all__ = [
    "PhaseShiftProfile",
    "PhaseSummary",
    "diagonal_hamiltonian",
    "centered_shifts",
    "max_rabi_under_population",
    "scan_phase_rates",
    "summarize_phase_vs_B",
    "dominant_level",
    "default_phase_detunings",
]


@dataclass(frozen=True)
class PhaseShiftProfile:
    """Centered light shifts (rad/s, descending m_I order) at one detuning."""

    B: float
    detuning: float
    rabi_max: float
    shifts: np.ndarray
    dominant_level: float
    delta_min: float
    feasible: bool = True
    theta: float = 0.0


def diagonal_hamiltonian(model: EffectiveModel, rtol: float = 1e-12) -> np.ndarray:
    """Diagonal of H_eff for a theta = 0 model, certified diagonal."""
    if model.cfg.theta != 0:
        raise ValueError(f"phase gates need theta = 0, got {model.cfg.theta}")
    h = model.h_eff
    off = h - np.diag(np.diag(h))
    scale = max(float(np.max(np.abs(h))), np.finfo(float).tiny)
    if np.max(np.abs(off)) > rtol * scale:
        raise ValueError("H_eff at theta = 0 is not diagonal")
    return np.real(np.diag(h)).copy()


def centered_shifts(model: EffectiveModel) -> np.ndarray:
    """Zero-mean light shifts ``-(Omega^2/4)(s_m^z - <s^z>)`` (rad/s)."""
    if model.cfg.theta != 0:
        raise ValueError(f"phase gates need theta = 0, got {model.cfg.theta}")
    return -model.cfg.rabi**2 / 4 * (model.s_z - np.mean(model.s_z))


def max_rabi_under_population(spec: AtomSpec, B: float, detuning: float, p_max: float,
                              delta_floor: float = DELTA_FLOOR) -> float:
    """Largest Omega_E with ``Omega^2 / (4 delta_min^2) <= p_max``."""
    if p_max < 0:
        raise ValueError("p_max must be non-negative")
    dmin = min_detuning(spec, B, detuning)
    if dmin <= delta_floor:
        raise SingularExcitedManifold(f"laser within the floor of an excited level at B={B} G")
    return 2 * dmin * math.sqrt(p_max)


def dominant_level(shifts: np.ndarray, m_vals: np.ndarray) -> float:
    """Label with the largest |S_m|; ties go to the lower m_I."""
    order = np.argsort(m_vals)  # ascending m, so argmax picks the lowest on ties
    mags = np.abs(shifts)[order]
    return float(m_vals[order][int(np.argmax(mags))])


def default_phase_detunings(spec: AtomSpec, B: float, margin: float = 3e3 * MHZ,
                            step: float = 5 * MHZ) -> np.ndarray:
    """Detunings spanning the whole excited manifold plus ``margin``, on a ``step`` lattice."""
    evals, _ = excited_spectrum(spec, B)
    lo = math.floor((evals.min() - margin) / step)
    hi = math.ceil((evals.max() + margin) / step)
    return step * np.arange(lo, hi + 1)


def scan_phase_rates(spec: AtomSpec, B: float, detunings, p_max: float = 1e-2,
                     delta_floor: float = DELTA_FLOOR, theta: float = 0.0) -> Iterator[PhaseShiftProfile]:
    """Profiles at the maximal population-limited drive for each detuning.

    ``theta = pi/2`` evaluates the diagonal of H_eff(pi/2) instead (the
    s^x shifts); that variant ignores the next-nearest couplings it carries.
    Cells within ``delta_floor`` of a resonance are emitted infeasible with
    NaN shifts.
    """
    if theta not in (0.0, math.pi / 2):
        raise ValueError("theta must be 0 or pi/2")
    det = np.atleast_1d(np.asarray(detunings, float))
    cg = coefficient_grid(spec, B, det, delta_floor)
    mv = m_values(spec.nuclear_spin)
    coeff = cg.s_z if theta == 0.0 else cg.s_x
    rabi = 2 * cg.delta_min * math.sqrt(p_max)
    shifts = -(rabi**2 / 4)[:, None] * (coeff - np.mean(coeff, axis=1, keepdims=True))
    for d, dv in enumerate(det):
        if cg.singular[d]:
            yield PhaseShiftProfile(float(B), float(dv), 0.0, np.full(len(mv), np.nan), math.nan,
                                    float(cg.delta_min[d]), False, theta)
            continue
        yield PhaseShiftProfile(float(B), float(dv), float(rabi[d]), shifts[d],
                                dominant_level(shifts[d], mv), float(cg.delta_min[d]), True, theta)


@dataclass(frozen=True)
class PhaseSummary:
    B: float
    median_of_medians: float
    median_of_maxima: float
    rabi_median_of_medians: float
    rabi_median_of_maxima: float
    n_detunings: int
    empty: bool


def summarize_phase_vs_B(profiles: Iterable[PhaseShiftProfile]) -> list[PhaseSummary]:
    """Per-field medians of |S_m| over feasible detunings.

    For each level: the median and the maximum of |S_m| over the detuning
    range, and the drive used at those points (median drive, drive at the
    maximum). Each statistic is then medianed across levels.
    """
    grouped: dict[float, list[PhaseShiftProfile]] = defaultdict(list)
    for p in profiles:
        grouped[p.B].append(p)
    out = []
    for B in sorted(grouped):
        ok = [p for p in grouped[B] if p.feasible]
        if not ok:
            out.append(PhaseSummary(B, math.nan, math.nan, math.nan, math.nan, 0, True))
            continue
        mags = np.abs(np.array([p.shifts for p in ok]))
        rabis = np.array([p.rabi_max for p in ok])
        med = np.median(mags, axis=0)
        mx = np.max(mags, axis=0)
        rabi_at_max = rabis[np.argmax(mags, axis=0)]
        out.append(PhaseSummary(B, float(np.median(med)), float(np.median(mx)),
                                float(np.median(rabis)), float(np.median(rabi_at_max)),
                                len(ok), False))
    return out
