"""Lie-algebraic controllability of the nuclear-spin qudit.

Flip Hamiltonians at the magic angles and one diagonal phase Hamiltonian
generate su(d). The constructive route isolates each nearest-neighbor
coupling with a polynomial in ``L(A) = [H_phi, [H_phi, A]]``, builds the
local su(2) on every neighboring pair, and the brute-force route computes
the dimension of the real Lie closure directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .atom import AtomSpec, FieldConfig
from .effective import basis_index, effective_hamiltonian
from .exceptions import DistinctnessViolation, InfeasiblePoint
from .phase import scan_phase_rates
from .raman import Thresholds, describe_transition, evaluate_point, feasibility_cells
from .spinops import commutator, is_hermitian

__all__ = [
    "ControlSet",
    "LieClosureReport",
    "FlipPoint",
    "PhasePoint",
    "build_control_set",
    "control_points_from_scan",
    "check_distinct_gaps",
    "lie_closure",
    "isolation_nodes",
    "isolate_coupling",
    "pair_su2",
    "pair_operators",
    "traceless",
    "transition_pair",
]


@dataclass(frozen=True)
class FlipPoint:
    detuning: float
    rabi: float
    transition: float


@dataclass(frozen=True)
class PhasePoint:
    detuning: float
    rabi: float


@dataclass
class ControlSet:
    """Traceless Hermitian generators (rad/s) with provenance tags."""

    generators: list
    tags: list
    B: float
    metadata: dict = field(default_factory=dict)

    @property
    def phase_generators(self) -> list:
        return [g for g, t in zip(self.generators, self.tags) if t.startswith("phase")]


@dataclass
class LieClosureReport:
    dimension: int
    rank_history: list
    converged: bool
    tolerance: float
    max_dimension: int

    def as_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "rank_history": list(self.rank_history),
            "converged": self.converged,
            "tolerance": self.tolerance,
            "max_dimension": self.max_dimension,
        }


def traceless(h: np.ndarray) -> np.ndarray:
    """Remove the identity component (global phase)."""
    n = h.shape[0]
    return h - np.trace(h) / n * np.eye(n)


def pair_operators(d: int, j: int, k: int = 1):
    """``X^(k)_j, Y^(k)_j`` coupling basis states j and j+k, and ``Z_j``."""
    x = np.zeros((d, d), dtype=complex)
    y = np.zeros((d, d), dtype=complex)
    z = np.zeros((d, d), dtype=complex)
    x[j, j + k] = x[j + k, j] = 1
    y[j, j + k], y[j + k, j] = -1j, 1j
    z[j, j], z[j + 1, j + 1] = 1, -1
    return x, y, z


def check_distinct_gaps(h_phi: np.ndarray, rtol: float = 1e-6) -> np.ndarray:
    """Neighboring gaps ``lambda_j - lambda_{j+1}``; raise unless their squares
    are nonzero and pairwise distinct to ``rtol`` of the largest."""
    lam = np.real(np.diag(h_phi))
    gaps = lam[:-1] - lam[1:]
    sq = gaps**2
    scale = float(np.max(sq)) if sq.size else 0.0
    if scale == 0 or np.min(sq) <= rtol * scale:
        raise DistinctnessViolation("phase profile has a vanishing neighboring gap")
    diff = np.abs(sq[:, None] - sq[None, :]) + np.eye(len(sq)) * scale
    if np.min(diff) < rtol * scale:
        j, k = np.unravel_index(np.argmin(diff), diff.shape)
        raise DistinctnessViolation(
            f"squared gaps {j} and {k} coincide ({sq[j]:.6g} vs {sq[k]:.6g}); "
            "supply another phase profile"
        )
    return gaps


def build_control_set(spec: AtomSpec, B: float, flips: Sequence[FlipPoint],
                      phases: Sequence[PhasePoint], thresholds: Thresholds = Thresholds(),
                      gap_rtol: float = 1e-6) -> ControlSet:
    """Generators from real operating points.

    Each flip is evaluated at its magic angle and must be feasible; each
    phase point is taken at theta = 0. Generators are projected traceless.
    At least one phase profile must pass :func:`check_distinct_gaps`.
    """
    gens, tags, meta = [], [], {"flips": [], "phases": []}
    for fp in flips:
        rec = evaluate_point(spec, FieldConfig(B, fp.detuning, fp.rabi), fp.transition, thresholds)
        if not rec.feasible:
            raise InfeasiblePoint(f"flip {describe_transition(fp.transition)}: {rec.reason}")
        model = effective_hamiltonian(spec, FieldConfig(B, fp.detuning, fp.rabi, rec.magic.theta_star),
                                      thresholds.delta_floor)
        gens.append(traceless(model.h_eff))
        tags.append(f"flip {describe_transition(fp.transition)}")
        meta["flips"].append({"detuning_rad_s": fp.detuning, "rabi_rad_s": fp.rabi,
                              "transition": fp.transition, "theta_star_rad": rec.magic.theta_star,
                              "raman_rabi_rad_s": rec.raman_rabi})
    errors = []
    for i, pp in enumerate(phases):
        model = effective_hamiltonian(spec, FieldConfig(B, pp.detuning, pp.rabi, 0.0),
                                      thresholds.delta_floor)
        h = traceless(np.diag(np.diag(model.h_eff)))
        try:
            check_distinct_gaps(h, gap_rtol)
            meta["phases"].append({"detuning_rad_s": pp.detuning, "rabi_rad_s": pp.rabi,
                                   "distinct": True})
        except DistinctnessViolation as exc:
            errors.append(str(exc))
            meta["phases"].append({"detuning_rad_s": pp.detuning, "rabi_rad_s": pp.rabi,
                                   "distinct": False})
        gens.append(h)
        tags.append(f"phase {i}")
    if phases and len(errors) == len(phases):
        raise DistinctnessViolation("; ".join(errors))
    return ControlSet(gens, tags, float(B), meta)


def control_points_from_scan(spec: AtomSpec, B: float, detunings=None, rabis=None,
                             phase_detunings=None, p_max: float = 1e-2,
                             thresholds: Thresholds = Thresholds(), gap_rtol: float = 1e-6):
    """Pick the fastest feasible flip per transition and a generic phase point.

    The phase point is the detuning with the largest centered shift whose
    squared neighboring gaps are pairwise distinct.
    """
    cells = feasibility_cells(spec, B, detunings, rabis, thresholds=thresholds)
    flips = []
    for t, m in enumerate(cells.transitions):
        rate = np.where(cells.feasible[..., t], cells.raman_rabi[..., t], -1.0)
        if rate.max() < 0:
            raise InfeasiblePoint(f"no feasible cell for {describe_transition(m)} at B={B} G")
        d, o = np.unravel_index(np.argmax(rate), rate.shape)
        flips.append(FlipPoint(float(cells.detunings[d]), float(cells.rabis[o]), float(m)))
    det = cells.detunings if phase_detunings is None else phase_detunings
    best = None
    for prof in scan_phase_rates(spec, B, det, p_max, thresholds.delta_floor):
        if not prof.feasible:
            continue
        try:
            check_distinct_gaps(np.diag(prof.shifts), gap_rtol)
        except DistinctnessViolation:
            continue
        size = float(np.max(np.abs(prof.shifts)))
        if best is None or size > best[0]:
            best = (size, PhasePoint(prof.detuning, prof.rabi_max))
    if best is None:
        raise DistinctnessViolation(f"no phase profile with distinct gaps at B={B} G")
    return flips, [best[1]]


def _as_real(h: np.ndarray) -> np.ndarray:
    return np.concatenate([h.real.ravel(), h.imag.ravel()])


def lie_closure(generators: Sequence[np.ndarray], tol: float = 1e-9,
                max_passes: int = 50) -> LieClosureReport:
    """Dimension of the real Lie algebra generated by Hermitian matrices.

    Works with ``i[A, B]`` (Hermitian for Hermitian A, B). Each candidate is
    normalized to unit Hilbert-Schmidt norm, then kept if its component
    orthogonal to the current basis exceeds ``tol``.
    """
    if not generators:
        raise ValueError("need at least one generator")
    n = generators[0].shape[0]
    traceless_all = all(abs(np.trace(g)) <= 1e-12 * max(np.abs(g).max(), 1e-300) for g in generators)
    max_dim = n * n - 1 if traceless_all else n * n
    basis: list[np.ndarray] = []  # orthonormal real vectors
    mats: list[np.ndarray] = []

    def add(h: np.ndarray) -> bool:
        norm = np.linalg.norm(h)
        if norm == 0:
            return False
        v = _as_real(h / norm)
        for _ in range(2):
            for b in basis:
                v = v - (b @ v) * b
        r = np.linalg.norm(v)
        if r <= tol:
            return False
        basis.append(v / r)
        mats.append(h / norm)
        return True

    for g in generators:
        if not is_hermitian(g, 1e-10):
            raise ValueError("generators must be Hermitian")
        add(np.asarray(g, dtype=complex))
    history = [len(basis)]
    frontier = list(range(len(mats)))
    converged = False
    for _ in range(max_passes):
        start = len(mats)
        for i in frontier:
            for k in range(len(mats)):
                if k == i or (k in frontier and k < i):
                    continue
                add(1j * commutator(mats[i], mats[k]))
                if len(basis) >= max_dim:
                    break
            if len(basis) >= max_dim:
                break
        history.append(len(basis))
        frontier = list(range(start, len(mats)))
        if not frontier or len(basis) >= max_dim:
            converged = True
            break
    stack = np.array(basis)
    sv = np.linalg.svd(stack, compute_uv=False)
    rank = int(np.sum(sv > tol * sv[0]))
    return LieClosureReport(rank, history, converged, tol, max_dim)


def isolation_nodes(h_phi: np.ndarray, j: int, h_flip: np.ndarray | None = None,
                    rtol: float = 1e-8, coupling_atol: float = 1e-12):
    """Target node and the nodes the isolating polynomial must annihilate.

    Nodes are 0, the other squared nearest gaps, and the squared next-nearest
    gaps for couplings actually present in ``h_flip``.
    """
    lam = np.real(np.diag(h_phi))
    d = len(lam)
    if not 0 <= j < d - 1:
        raise ValueError(f"pair index {j} out of range for d={d}")
    target = (lam[j] - lam[j + 1]) ** 2
    nodes = [0.0] + [(lam[k] - lam[k + 1]) ** 2 for k in range(d - 1) if k != j]
    if h_flip is not None:
        scale = max(float(np.abs(h_flip).max()), 1e-300)
        for k in range(d - 2):
            if abs(h_flip[k, k + 2]) > coupling_atol * scale:
                nodes.append((lam[k] - lam[k + 2]) ** 2)
    scale = max([target] + nodes)
    uniq: list[float] = []
    for x in sorted(nodes):
        if abs(x - target) <= rtol * scale:
            raise DistinctnessViolation(
                f"squared gap of pair {j} coincides with another node ({x:.6g})")
        if not uniq or abs(x - uniq[-1]) > rtol * scale:
            uniq.append(x)
    return target, uniq


def isolate_coupling(h_flip: np.ndarray, h_phi: np.ndarray, j: int, rtol: float = 1e-8,
                     band_rtol: float = 1e-10) -> np.ndarray:
    """Apply the Lagrange polynomial ``p_j(L)`` to ``h_flip``.

    ``p_j`` is 1 on the squared gap of pair ``j`` and 0 on every other node,
    so the result is ``a_j X^(1)_j``. The polynomial is applied in product
    form, one linear factor at a time, with ``H_phi`` rescaled to unit gap
    scale; its degree equals ``len(isolation_nodes(...)[1])``.

    Entries with ``|m - m'| > 2`` must stay below ``band_rtol`` of the
    largest element and are zeroed first: far-band gaps sit outside the
    node set, so the polynomial would amplify their rounding noise by
    many orders of magnitude.
    """
    h_flip = np.asarray(h_flip, dtype=complex)
    r, c = np.indices(h_flip.shape)
    outside = np.abs(r - c) > 2
    scale = max(float(np.abs(h_flip).max()), 1e-300)
    if outside.any() and np.abs(h_flip[outside]).max() > band_rtol * scale:
        raise ValueError("flip generator is not five-diagonal")
    h_flip = np.where(outside, 0.0, h_flip)
    target, nodes = isolation_nodes(h_phi, j, h_flip, rtol)
    scale = math.sqrt(max([target] + nodes))
    hs = np.asarray(h_phi, dtype=complex) / scale
    t = target / scale**2
    a = h_flip.copy()
    for x in nodes:
        x = x / scale**2
        a = (commutator(hs, commutator(hs, a)) - x * a) / (t - x)
    return a


def pair_su2(x_j: np.ndarray, h_phi: np.ndarray, j: int, rtol: float = 1e-12):
    """Normalized (X, Y, Z) on pair ``j`` from an isolated coupling.

    ``Y = [H_phi, X] / (i Delta_j)`` and ``Z = [X, Y] / (2i)``.
    """
    a = x_j[j, j + 1]
    if abs(a) == 0:
        raise ValueError(f"x_j has no ({j}, {j + 1}) coupling")
    x = x_j / abs(a)
    lam = np.real(np.diag(h_phi))
    gap = lam[j] - lam[j + 1]
    if abs(gap) <= rtol * max(np.abs(lam).max(), 1e-300):
        raise DistinctnessViolation(f"gap of pair {j} vanishes")
    y = commutator(h_phi, x) / (1j * gap)
    z = commutator(x, y) / 2j
    return x, y, z


def transition_pair(spec: AtomSpec, m: float) -> int:
    """Pair index (upper row) in the descending basis for lower label ``m``."""
    return basis_index(spec, m + 1)
