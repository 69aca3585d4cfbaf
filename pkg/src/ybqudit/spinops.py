"""Angular-momentum operators and small dense-matrix helpers.

Every operator in the package is a plain ``numpy`` complex array. Spin
matrices use the descending-m basis (m = +j, j-1, ..., -j); composite
electronic x nuclear spaces put the electronic index slowest, so the full
index is ``electronic_index * (2I + 1) + nuclear_index``.

Units: hbar = 1, energies are angular frequencies in rad/s.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "SpinOperators",
    "spin_matrices",
    "m_values",
    "kron",
    "dipole_components",
    "commutator",
    "dagger",
    "max_abs",
    "is_hermitian",
    "hermitian_eig",
]


@dataclass(frozen=True)
class SpinOperators:
    """Cartesian and ladder operators for one spin ``j`` (units of hbar)."""

    j: float
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    jplus: np.ndarray
    jminus: np.ndarray

    @property
    def dim(self) -> int:
        return self.jz.shape[0]


def _check_half_integer(j) -> float:
    twice = Fraction(j).limit_denominator(1000) * 2
    if twice.denominator != 1 or twice < 0 or abs(float(twice) - 2 * float(j)) > 1e-12:
        raise ValueError(f"spin quantum number must be a non-negative half-integer, got {j!r}")
    return float(twice) / 2


def m_values(j) -> np.ndarray:
    """Projection quantum numbers in basis order (descending)."""
    j = _check_half_integer(j)
    return j - np.arange(int(round(2 * j)) + 1)


def spin_matrices(j) -> SpinOperators:
    """Build ``jx, jy, jz, j+, j-`` for spin ``j`` in the descending-m basis.

    Raises
    ------
    ValueError
        If ``2j`` is not a non-negative integer.
    """
    j = _check_half_integer(j)
    m = m_values(j)
    # <m+1| j+ |m> sits one row above the column of m
    ladder = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jplus = np.diag(ladder, k=1).astype(complex)
    jminus = jplus.conj().T
    jx = (jplus + jminus) / 2
    jy = (jplus - jminus) / 2j
    jz = np.diag(m).astype(complex)
    for op in (jx, jy, jz, jplus, jminus):
        op.setflags(write=False)
    return SpinOperators(j, jx, jy, jz, jplus, jminus)


def kron(a, b) -> np.ndarray:
    """Kronecker product with ``a`` as the slow (electronic) factor."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def dipole_components() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized dipole operators on the 4-state electronic space.

    Electronic order is (1S0; excited m_J = +1, 0, -1). Each operator maps
    the singlet ground state to the excited triplet components.
    """
    g, ep, e0, em = range(4)
    dx = np.zeros((4, 4), dtype=complex)
    dy = np.zeros((4, 4), dtype=complex)
    dz = np.zeros((4, 4), dtype=complex)
    r2 = np.sqrt(2.0)
    dx[em, g], dx[ep, g] = 1 / r2, -1 / r2
    dy[em, g], dy[ep, g] = 1j / r2, 1j / r2
    dz[e0, g] = 1.0
    return dx, dy, dz


def _square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def commutator(a, b) -> np.ndarray:
    a, b = _square(a), _square(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def dagger(a) -> np.ndarray:
    return np.conj(_square(a)).T


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_hermitian(a, rtol: float = 1e-12) -> bool:
    """``True`` if ``a == a^dagger`` to ``rtol`` times the max-abs norm."""
    a = _square(a)
    return max_abs(a - a.conj().T) <= rtol * max(max_abs(a), np.finfo(float).tiny)


def hermitian_eig(h, degeneracy_rtol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic eigendecomposition of a Hermitian matrix.

    Eigenvalues come back ascending. Inside each (near-)degenerate cluster the
    eigenvectors are replaced by the Gram-Schmidt orthonormalization of the
    cluster projector applied to the unit vectors in index order, and every
    eigenvector is phased so its largest component is real and positive.
    The result therefore does not depend on LAPACK's arbitrary choices.
    """
    h = _square(np.asarray(h, dtype=complex))
    evals, evecs = np.linalg.eigh(h)
    n = len(evals)
    scale = max(max_abs(h), np.finfo(float).tiny)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and evals[stop] - evals[stop - 1] <= degeneracy_rtol * scale:
            stop += 1
        if stop - start > 1:
            evecs[:, start:stop] = _canonical_basis(evecs[:, start:stop])
        start = stop
    idx = np.argmax(np.abs(evecs) - 1e-12 * np.arange(n)[:, None], axis=0)
    phases = evecs[idx, np.arange(n)]
    evecs = evecs * (np.abs(phases) / phases)[None, :]
    return evals, evecs


def _canonical_basis(block: np.ndarray) -> np.ndarray:
    proj = block @ block.conj().T
    k = block.shape[1]
    basis: list[np.ndarray] = []
    for col in range(proj.shape[0]):
        v = proj[:, col].copy()
        for u in basis:
            v -= (u.conj() @ v) * u
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            basis.append(v / norm)
        if len(basis) == k:
            break
    return np.stack(basis, axis=1)
