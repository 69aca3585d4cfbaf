"""Magic-angle Raman flips between neighboring nuclear-spin states.

For a transition m -> m+1 the effective splitting is affine in sin^2(theta),

    dE(theta) = dE_G - (Omega^2/4) [ds_z cos^2 theta + ds_x sin^2 theta],

so the resonance angle has a closed form. A cell of parameter space is
feasible when an interior magic angle exists, the excited-population bound
holds and every spectator channel of H_eff(theta*) leaks less than the
threshold.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .atom import KHZ, MHZ, TWO_PI, AtomSpec, FieldConfig, fmt_half, lower_manifold_energies
from .effective import (
    DELTA_FLOOR,
    EffectiveModel,
    coefficient_grid,
    effective_hamiltonian,
    excited_population_bound,
    lower_labels,
)
from .exceptions import SingularExcitedManifold

__all__ = [
    "Thresholds",
    "MagicAngleResult",
    "LeakageChannel",
    "FeasibilityRecord",
    "RamanCells",
    "effective_splitting",
    "magic_angle",
    "numeric_magic_angle",
    "raman_rabi",
    "leakage_bounds",
    "shifted_detuning",
    "evaluate_point",
    "feasibility_cells",
    "default_rabi_grid",
    "default_field_grid",
    "default_detuning_grid",
    "scan_phase_diagram",
    "best_over_rabi",
    "summarize_vs_B",
    "summarize_cells",
    "MapCell",
    "FieldSummary",
    "describe_transition",
]

GOLDEN_TOL = 1e-10


@dataclass(frozen=True)
class Thresholds:
    """Feasibility thresholds; rates in rad/s."""

    p_max: float = 1e-2
    leak_max: float = 1e-2
    delta_floor: float = DELTA_FLOOR
    residual_max: float = TWO_PI * 1.0
    degenerate_tol: float = 1e-30


@dataclass(frozen=True)
class MagicAngleResult:
    transition: float
    exists: bool
    sin2: float
    theta_star: float | None = None
    residual: float | None = None
    raman_rabi: float | None = None
    reason: str = ""


@dataclass(frozen=True)
class LeakageChannel:
    upper: float
    lower: float
    coupling: float  # Rabi frequency, twice the matrix element
    detuning: float
    leakage: float


@dataclass(frozen=True)
class FeasibilityRecord:
    B: float
    detuning: float
    rabi: float
    transition: float
    magic: MagicAngleResult
    p_excited_bound: float
    leakage_max: float
    feasible: bool
    raman_rabi: float
    reason: str = ""
    shifted_detuning: float = float("nan")


def _pair(model: EffectiveModel, m: float):
    lo = model.index(m)
    return lo, lo - 1


def effective_splitting(model: EffectiveModel, m: float, theta) -> np.ndarray | float:
    """``E_eff(m+1) - E_eff(m)`` at polarization angle ``theta`` (rad/s)."""
    lo, up = _pair(model, m)
    pref = model.cfg.rabi**2 / 4
    d_ground = model.ground[up] - model.ground[lo]
    dsz = model.s_z[up] - model.s_z[lo]
    dsx = model.s_x[up] - model.s_x[lo]
    c2 = np.cos(theta) ** 2
    out = d_ground - pref * (dsz * c2 + dsx * (1 - c2))
    return float(out) if np.ndim(out) == 0 else out


def raman_rabi(model: EffectiveModel, m: float, theta: float) -> float:
    """Raman Rabi frequency ``(Omega^2/2) |g_m sin(theta) cos(theta)|``."""
    g = model.g[model.transition(m)]
    return float(model.cfg.rabi**2 / 2 * abs(g * math.sin(theta) * math.cos(theta)))


def magic_angle(model: EffectiveModel, m: float, thresholds: Thresholds = Thresholds()) -> MagicAngleResult:
    """Closed-form magic angle for the transition with lower label ``m``.

    An angle exists only strictly inside (0, pi/2); boundary solutions and
    degenerate coefficient differences come back with ``exists=False`` and
    a ``reason``.
    """
    lo, up = _pair(model, m)
    rabi = model.cfg.rabi
    dsz = model.s_z[up] - model.s_z[lo]
    dsx = model.s_x[up] - model.s_x[lo]
    if rabi == 0:
        return MagicAngleResult(m, False, math.nan, reason="no magic angle")
    if abs(dsx - dsz) <= thresholds.degenerate_tol:
        return MagicAngleResult(m, False, math.nan, reason="degenerate coefficients")
    d_ground = model.ground[up] - model.ground[lo]
    sin2 = (4 * d_ground / rabi**2 - dsz) / (dsx - dsz)
    if not 0.0 < sin2 < 1.0:
        return MagicAngleResult(m, False, float(sin2), reason="no magic angle")
    theta = math.asin(math.sqrt(sin2))
    residual = abs(effective_splitting(model, m, theta))
    return MagicAngleResult(m, True, float(sin2), theta, residual, raman_rabi(model, m, theta))


def numeric_magic_angle(model: EffectiveModel, m: float, tol: float = GOLDEN_TOL) -> float:
    """Golden-section minimizer of ``|dE_eff(theta)|`` on [0, pi/2].

    ``|dE_eff|`` is unimodal in theta because dE_eff is monotone there.
    Ties (flat objective) resolve to the smallest theta.
    """
    f = lambda t: abs(effective_splitting(model, m, t))
    a, b = 0.0, math.pi / 2
    if f(a) == f(b) and f(a) == f((a + b) / 2):
        return a
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2


def leakage_bounds(model: EffectiveModel, m: float, theta: float) -> tuple[list[LeakageChannel], float]:
    """Two-level leakage estimate for every spectator coupling of H_eff(theta).

    Channels are all nonzero entries with |delta m| = 1 or 2 except the target
    pair. ``L = Omega_k^2 / (Omega_k^2 + delta_k^2)`` with Omega_k twice the
    matrix element and delta_k the diagonal difference.
    """
    h = model.hamiltonian(theta=theta)
    target = set(_pair(model, m))
    mvals = model.spec.nuclear_spin - np.arange(len(h))
    channels = []
    n = len(h)
    for step in (1, 2):
        for up in range(n - step):
            lo = up + step
            if {up, lo} == target:
                continue
            coupling = 2 * abs(h[up, lo])
            if coupling == 0:
                continue
            det = float(np.real(h[up, up] - h[lo, lo]))
            leak = coupling**2 / (coupling**2 + det**2)
            channels.append(LeakageChannel(float(mvals[up]), float(mvals[lo]), coupling, det, leak))
    worst = max((c.leakage for c in channels), default=0.0)
    return channels, worst


def shifted_detuning(spec: AtomSpec, B: float, detuning):
    """Detuning measured from the mean of the adiabatic m_J = -1 levels."""
    return detuning - float(np.mean(lower_manifold_energies(spec, B)))


def evaluate_point(spec: AtomSpec, cfg: FieldConfig, m: float,
                   thresholds: Thresholds = Thresholds()) -> FeasibilityRecord:
    """Feasibility of one (B, detuning, rabi) cell for one transition.

    ``cfg.theta`` is ignored; the magic angle is solved for.
    """
    shifted = shifted_detuning(spec, cfg.B, cfg.detuning)
    try:
        model = effective_hamiltonian(spec, cfg, thresholds.delta_floor)
    except SingularExcitedManifold:
        magic = MagicAngleResult(m, False, math.nan, reason="singular excited manifold")
        return FeasibilityRecord(cfg.B, cfg.detuning, cfg.rabi, m, magic, math.inf, math.nan,
                                 False, 0.0, "singular excited manifold", shifted)
    magic = magic_angle(model, m, thresholds)
    p_e = excited_population_bound(cfg.rabi, model.delta_min)
    if magic.exists:
        _, leak = leakage_bounds(model, m, magic.theta_star)
    else:
        leak = math.nan
    reason = _first_failure(magic.exists, p_e, leak, thresholds)
    rate = magic.raman_rabi if magic.exists else 0.0
    return FeasibilityRecord(cfg.B, cfg.detuning, cfg.rabi, m, magic, p_e, leak,
                             not reason, rate, reason, shifted)


def _first_failure(exists, p_e, leak, th: Thresholds) -> str:
    if not exists:
        return "no magic angle"
    if not p_e <= th.p_max:
        return "population bound"
    if not leak <= th.leak_max:
        return "leakage bound"
    return ""


# ---------------------------------------------------------------------------
# vectorized scan


def default_field_grid() -> np.ndarray:
    """50 ... 2000 G in 25 G steps."""
    return np.arange(50.0, 2000.0 + 1e-9, 25.0)


def default_rabi_grid() -> np.ndarray:
    """Omega_E / 2pi from 1 to 100 MHz, 40 log-spaced points (rad/s)."""
    return MHZ * np.logspace(0, 2, 40)


def default_detuning_grid(spec: AtomSpec, B: float, margin: float = 3e3 * MHZ,
                          step: float = 10 * MHZ) -> np.ndarray:
    """Absolute detunings covering the m_J = -1 manifold plus ``margin``.

    Points lie on multiples of ``step`` in the shifted detuning.
    """
    levels = lower_manifold_energies(spec, B)
    center = float(np.mean(levels))
    lo = math.floor((levels.min() - center - margin) / step)
    hi = math.ceil((levels.max() - center + margin) / step)
    return center + step * np.arange(lo, hi + 1)


@dataclass
class RamanCells:
    """Feasibility arrays for one field; axes are (detuning, rabi, transition)."""

    spec: AtomSpec
    B: float
    detunings: np.ndarray
    rabis: np.ndarray
    transitions: np.ndarray
    shifted: np.ndarray
    sin2: np.ndarray
    exists: np.ndarray
    theta: np.ndarray
    residual: np.ndarray
    raman_rabi: np.ndarray
    p_excited: np.ndarray
    leakage: np.ndarray
    feasible: np.ndarray
    singular: np.ndarray = field(repr=False)
    thresholds: Thresholds = field(default_factory=Thresholds, repr=False)

    def records(self) -> Iterator[FeasibilityRecord]:
        """Records in detuning, rabi, transition order."""
        th = self.thresholds
        for d, det in enumerate(self.detunings):
            for o, rabi in enumerate(self.rabis):
                for t, m in enumerate(self.transitions):
                    ex = bool(self.exists[d, o, t])
                    if self.singular[d]:
                        reason = "singular excited manifold"
                        magic = MagicAngleResult(float(m), False, math.nan, reason=reason)
                    else:
                        magic = MagicAngleResult(
                            float(m), ex, float(self.sin2[d, o, t]),
                            float(self.theta[d, o, t]) if ex else None,
                            float(self.residual[d, o, t]) if ex else None,
                            float(self.raman_rabi[d, o, t]) if ex else None,
                            "" if ex else "no magic angle",
                        )
                        reason = _first_failure(ex, self.p_excited[d, o], self.leakage[d, o, t], th)
                    yield FeasibilityRecord(
                        self.B, float(det), float(rabi), float(m), magic,
                        float(self.p_excited[d, o]), float(self.leakage[d, o, t]),
                        bool(self.feasible[d, o, t]),
                        float(self.raman_rabi[d, o, t]) if ex else 0.0,
                        reason, float(self.shifted[d]),
                    )


def feasibility_cells(spec: AtomSpec, B: float, detunings=None, rabis=None,
                      transitions: Sequence[float] | None = None,
                      thresholds: Thresholds = Thresholds()) -> RamanCells:
    """Evaluate every (detuning, rabi, transition) cell at field ``B`` at once."""
    det = default_detuning_grid(spec, B) if detunings is None else np.atleast_1d(np.asarray(detunings, float))
    rab = default_rabi_grid() if rabis is None else np.atleast_1d(np.asarray(rabis, float))
    labels = lower_labels(spec)
    trans = labels if transitions is None else np.asarray(transitions, float)
    tidx = np.array([int(np.flatnonzero(np.isclose(labels, m))[0]) for m in trans], dtype=int)
    cg = coefficient_grid(spec, B, det, thresholds.delta_floor)
    n = len(cg.ground)
    rows_lo = n - 1 - tidx
    rows_up = rows_lo - 1

    pref = (rab**2 / 4)[None, :, None]
    dground = (cg.ground[rows_up] - cg.ground[rows_lo])[None, None, :]
    dsz = (cg.s_z[:, rows_up] - cg.s_z[:, rows_lo])[:, None, :]
    dsx = (cg.s_x[:, rows_up] - cg.s_x[:, rows_lo])[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        sin2 = (dground / pref - dsz) / (dsx - dsz)
    sin2 = np.broadcast_to(sin2, (det.size, rab.size, tidx.size)).copy()
    degenerate = np.abs(dsx - dsz) <= thresholds.degenerate_tol
    exists = (sin2 > 0) & (sin2 < 1) & ~degenerate & (rab[None, :, None] > 0)
    exists &= ~cg.singular[:, None, None]
    s2 = np.where(exists, sin2, np.nan)
    theta = np.arcsin(np.sqrt(s2))
    c2 = 1 - s2
    sc = np.sqrt(s2 * c2)
    residual = np.abs(dground - pref * (dsz * c2 + dsx * s2))
    g_t = np.abs(cg.g[:, tidx])[:, None, :]
    rate = np.where(exists, 2 * pref * g_t * sc, 0.0)

    # diagonal of H_eff(theta*) for all levels: (det, rabi, trans, level)
    diag = (cg.ground[None, None, None, :]
            - pref[..., None] * (cg.s_z[:, None, None, :] * c2[..., None]
                                 + cg.s_x[:, None, None, :] * s2[..., None]))
    leak = np.zeros(exists.shape)
    n_lab = len(labels)
    for k in range(n_lab):  # nearest-neighbour spectators
        lo, up = n - 1 - k, n - 2 - k
        coup = 2 * pref * np.abs(cg.g[:, k])[:, None, None] * sc
        dlt = diag[..., up] - diag[..., lo]
        lk = _two_level_leak(coup, dlt)
        lk = np.where(tidx[None, None, :] == k, 0.0, lk)
        leak = np.maximum(leak, lk)
    for k in range(n_lab - 1):  # next-nearest spectators
        lo, up = n - 1 - k, n - 3 - k
        coup = 2 * pref * np.abs(cg.h[:, k])[:, None, None] * s2
        dlt = diag[..., up] - diag[..., lo]
        leak = np.maximum(leak, _two_level_leak(coup, dlt))
    leak = np.where(exists, leak, np.nan)

    with np.errstate(divide="ignore"):
        p_e = np.where(cg.singular[:, None], np.inf,
                       rab[None, :] ** 2 / (4 * cg.delta_min[:, None] ** 2))
    feasible = exists & (p_e[..., None] <= thresholds.p_max) & (leak <= thresholds.leak_max)
    shifted = det - float(np.mean(lower_manifold_energies(spec, B)))
    return RamanCells(spec, float(B), det, rab, trans, shifted, sin2, exists, theta, residual,
                      rate, p_e, leak, feasible, cg.singular, thresholds)


def _two_level_leak(coupling, detuning):
    num = coupling**2
    den = num + detuning**2
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def scan_phase_diagram(spec: AtomSpec, B_grid=None, detuning_grid=None, rabi_grid=None,
                       transitions=None, thresholds: Thresholds = Thresholds()) -> Iterator[FeasibilityRecord]:
    """Stream feasibility records ordered by field, detuning, rabi, transition.

    ``detuning_grid`` holds absolute detunings (rad/s); ``None`` picks the
    default grid around the m_J = -1 manifold at each field.
    """
    B_grid = default_field_grid() if B_grid is None else np.atleast_1d(B_grid)
    rabis = default_rabi_grid() if rabi_grid is None else np.atleast_1d(np.asarray(rabi_grid, float))
    if rabis.size == 0:
        return
    for B in B_grid:
        cells = feasibility_cells(spec, float(B), detuning_grid, rabis, transitions, thresholds)
        yield from cells.records()


@dataclass(frozen=True)
class MapCell:
    """One (B, detuning, transition) cell with the rabi axis collapsed."""

    B: float
    detuning: float
    shifted_detuning: float
    transition: float
    feasible: bool
    best_raman_rabi: float
    best_rabi: float


def best_over_rabi(cells: RamanCells) -> Iterator[MapCell]:
    """Feasible if any rabi value works; keeps the largest Raman rate."""
    rate = np.where(cells.feasible, cells.raman_rabi, -1.0)
    best = np.argmax(rate, axis=1)
    for d, det in enumerate(cells.detunings):
        for t, m in enumerate(cells.transitions):
            o = best[d, t]
            ok = bool(cells.feasible[d, o, t])
            yield MapCell(cells.B, float(det), float(cells.shifted[d]), float(m), ok,
                          float(cells.raman_rabi[d, o, t]) if ok else 0.0,
                          float(cells.rabis[o]) if ok else math.nan)


@dataclass(frozen=True)
class FieldSummary:
    B: float
    min_rabi_for_magic: float
    median_of_medians: float
    median_of_maxima: float
    n_feasible: int
    empty: bool


def summarize_vs_B(records: Iterable[FeasibilityRecord]) -> list[FieldSummary]:
    """Per-field Raman-rate summary.

    For each transition, take the median and maximum Raman rate over its
    feasible cells; report the median across transitions of each. Transitions
    with no feasible cell do not enter the medians. ``min_rabi_for_magic`` is
    the smallest electronic Rabi frequency at which any magic angle exists.
    """
    rates: dict[float, dict[float, list[float]]] = defaultdict(lambda: defaultdict(list))
    min_rabi: dict[float, float] = {}
    for rec in records:
        min_rabi.setdefault(rec.B, math.inf)
        if rec.magic.exists:
            min_rabi[rec.B] = min(min_rabi[rec.B], rec.rabi)
        if rec.feasible:
            rates[rec.B][rec.transition].append(rec.raman_rabi)
    out = []
    for B in sorted(min_rabi):
        per = rates.get(B, {})
        if not per:
            out.append(FieldSummary(B, min_rabi[B], math.nan, math.nan, 0, True))
            continue
        meds = [float(np.median(v)) for v in per.values()]
        maxs = [float(np.max(v)) for v in per.values()]
        out.append(FieldSummary(B, min_rabi[B], float(np.median(meds)), float(np.median(maxs)),
                                sum(len(v) for v in per.values()), False))
    return out


def summarize_cells(cells: RamanCells) -> FieldSummary:
    """Array-level equivalent of :func:`summarize_vs_B` for one field."""
    exists_any = cells.exists.any(axis=(0, 2))
    min_rabi = float(cells.rabis[exists_any].min()) if exists_any.any() else math.inf
    meds, maxs, count = [], [], 0
    for t in range(len(cells.transitions)):
        v = cells.raman_rabi[..., t][cells.feasible[..., t]]
        if v.size:
            meds.append(float(np.median(v)))
            maxs.append(float(np.max(v)))
            count += v.size
    if not meds:
        return FieldSummary(cells.B, min_rabi, math.nan, math.nan, 0, True)
    return FieldSummary(cells.B, min_rabi, float(np.median(meds)), float(np.median(maxs)), count, False)


def describe_transition(m: float) -> str:
    return f"{fmt_half(m)}<->{fmt_half(m + 1)}"
