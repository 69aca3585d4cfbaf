"""Atomic constants and the Zeeman/hyperfine/laser Hamiltonian blocks.

The full Hilbert space is the singlet ground state plus a ``J = 1`` excited
level, each tensored with the nuclear spin ``I``. For I = 5/2 that is
4 x 6 = 24 states, ordered (ground; m_J = +1, 0, -1) x (m_I = +5/2 ... -5/2).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import constants as sc
from scipy.optimize import linear_sum_assignment

from .exceptions import TrackingError
from .spinops import dipole_components, hermitian_eig, kron, m_values, spin_matrices

TWO_PI = 2 * math.pi
MHZ = TWO_PI * 1e6
KHZ = TWO_PI * 1e3
GHZ = TWO_PI * 1e9

BOHR_MAGNETON_HZ_PER_G = 1.399624604e6
NUCLEAR_MAGNETON_HZ_PER_G = 762.2593
AU_DIPOLE_CM = 8.4783536e-30
EPSILON_0 = sc.epsilon_0
SPEED_OF_LIGHT = sc.c
HBAR = sc.hbar

__all__ = [
    "AtomSpec",
    "FieldConfig",
    "SpectrumCurve",
    "builtin_spec",
    "BUILTIN_SPECS",
    "constants_document",
    "h_zeeman",
    "h_hyperfine",
    "full_hamiltonian",
    "excited_block",
    "excited_spectrum",
    "ground_energies",
    "breit_rabi",
    "min_detuning",
    "lower_manifold_energies",
    "rabi_to_intensity",
    "intensity_to_rabi",
    "power_for_waist",
    "intensity_for_power",
    "fmt_half",
]


@dataclass(frozen=True)
class AtomSpec:
    """Constants of one ground -> excited transition.

    ``hyperfine_A``, ``hyperfine_Q`` and ``decay_rate`` are in rad/s,
    ``dipole_moment`` in atomic units (e a0), ``wavelength`` in meters.
    """

    label: str
    nuclear_spin: float
    excited_J: float
    g_J: float
    g_I: float
    hyperfine_A: float
    hyperfine_Q: float
    decay_rate: float
    dipole_moment: float
    wavelength: float

    def __post_init__(self):
        if self.decay_rate <= 0 or self.dipole_moment <= 0:
            raise ValueError("decay_rate and dipole_moment must be positive")
        if self.excited_J != 1:
            raise ValueError("only J = 1 excited levels are supported")

    @property
    def n_nuclear(self) -> int:
        return int(round(2 * self.nuclear_spin)) + 1

    @property
    def n_excited(self) -> int:
        return 3 * self.n_nuclear

    @property
    def dim(self) -> int:
        return 4 * self.n_nuclear


@dataclass(frozen=True)
class FieldConfig:
    """One operating point: B in Gauss, detuning and Rabi frequency in rad/s,
    polarization angle from the field axis in radians."""

    B: float
    detuning: float
    rabi: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.B < 0 or self.rabi < 0:
            raise ValueError("B and rabi must be non-negative")

    def with_theta(self, theta: float) -> "FieldConfig":
        return replace(self, theta=float(theta))


BUILTIN_SPECS = {
    "Yb173_3P1": AtomSpec(
        label="Yb173_3P1",
        nuclear_spin=2.5,
        excited_J=1,
        g_J=1.5,
        g_I=-0.67989,
        hyperfine_A=TWO_PI * -1094.361e6,
        hyperfine_Q=TWO_PI * -836.351e6,
        decay_rate=TWO_PI * 183e3,
        dipole_moment=0.54 / math.sqrt(3),
        wavelength=556e-9,
    ),
    "Yb173_1P1": AtomSpec(
        label="Yb173_1P1",
        nuclear_spin=2.5,
        excited_J=1,
        # pure singlet L=1, S=0; not quoted for this level, override with replace()
        g_J=1.0,
        g_I=-0.67989,
        hyperfine_A=TWO_PI * 57.91e6,
        hyperfine_Q=TWO_PI * 610.47e6,
        decay_rate=TWO_PI * 29.1e6,
        dipole_moment=4.4 / math.sqrt(3),
        wavelength=399e-9,
    ),
}


def builtin_spec(name: str, **overrides) -> AtomSpec:
    """Look up a built-in transition by name, optionally overriding fields."""
    try:
        spec = BUILTIN_SPECS[name]
    except KeyError:
        raise KeyError(f"unknown spec {name!r}; known: {sorted(BUILTIN_SPECS)}") from None
    return replace(spec, **overrides) if overrides else spec


def constants_document(spec: AtomSpec) -> dict:
    """JSON-ready dump of a spec plus the physical constants in use."""
    doc = asdict(spec)
    doc["hyperfine_A_MHz"] = spec.hyperfine_A / MHZ
    doc["hyperfine_Q_MHz"] = spec.hyperfine_Q / MHZ
    doc["decay_rate_kHz"] = spec.decay_rate / KHZ
    doc["constants"] = {
        "bohr_magneton_Hz_per_G": BOHR_MAGNETON_HZ_PER_G,
        "nuclear_magneton_Hz_per_G": NUCLEAR_MAGNETON_HZ_PER_G,
        "au_dipole_C_m": AU_DIPOLE_CM,
        "epsilon_0_F_per_m": EPSILON_0,
        "speed_of_light_m_per_s": SPEED_OF_LIGHT,
        "hbar_J_s": HBAR,
    }
    return doc


def fmt_half(x: float) -> str:
    """Render a half-integer as ``+5/2``, ``-1``, ``0``."""
    twice = int(round(2 * x))
    if twice % 2:
        return f"{'+' if twice > 0 else '-'}{abs(twice)}/2"
    return f"{twice // 2:+d}" if twice else "0"


@lru_cache(maxsize=None)
def _operators(nuclear_spin: float):
    """Electronic x nuclear operators shared by all Hamiltonian builders."""
    ispin = spin_matrices(nuclear_spin)
    jspin = spin_matrices(1)
    n = ispin.dim

    def excited(op3):
        out = np.zeros((4, 4), dtype=complex)
        out[1:, 1:] = op3
        return out

    p_exc = excited(np.eye(3))
    ops = {
        "Jz": kron(excited(jspin.jz), np.eye(n)),
        "Iz": kron(np.eye(4), ispin.jz),
        "IdotJ": sum(
            kron(excited(j), i)
            for j, i in ((jspin.jx, ispin.jx), (jspin.jy, ispin.jy), (jspin.jz, ispin.jz))
        ),
        "PE": kron(p_exc, np.eye(n)),
        "PG": kron(np.eye(4) - p_exc, np.eye(n)),
    }
    for op in ops.values():
        op.setflags(write=False)
    return ops


def h_zeeman(spec: AtomSpec, B: float) -> np.ndarray:
    """``(g_J mu_B J_z - g_I mu_N I_z) B`` on the full space (rad/s)."""
    if B < 0:
        raise ValueError("B must be non-negative")
    ops = _operators(spec.nuclear_spin)
    return TWO_PI * B * (
        spec.g_J * BOHR_MAGNETON_HZ_PER_G * ops["Jz"]
        - spec.g_I * NUCLEAR_MAGNETON_HZ_PER_G * ops["Iz"]
    )


def h_hyperfine(spec: AtomSpec) -> np.ndarray:
    """Magnetic-dipole plus electric-quadrupole hyperfine operator (rad/s).

    Acts only on the excited level; ``J`` is zero on the singlet ground state.
    """
    I, J = spec.nuclear_spin, spec.excited_J
    ops = _operators(I)
    ij, pe = ops["IdotJ"], ops["PE"]
    h = spec.hyperfine_A * ij
    if spec.hyperfine_Q:
        if I < 1:
            raise ValueError("quadrupole term needs I >= 1")
        quad = 1.5 * ij @ (2 * ij + pe) - I * (I + 1) * J * (J + 1) * pe
        h = h + spec.hyperfine_Q * quad / (2 * I * J * (2 * I - 1) * (2 * J - 1))
    return h


def _polarization(theta: float) -> np.ndarray:
    return np.array([math.sin(theta), 0.0, math.cos(theta)])


def laser_coupling(spec: AtomSpec, rabi: float, theta: float) -> np.ndarray:
    """``(Omega/2)(eps . D + h.c.)`` with the nuclear identity attached."""
    eps = _polarization(theta)
    d = sum(e * op for e, op in zip(eps, dipole_components()))
    d_full = kron(d, np.eye(spec.n_nuclear))
    return 0.5 * rabi * (d_full + d_full.conj().T)


def full_hamiltonian(spec: AtomSpec, cfg: FieldConfig) -> np.ndarray:
    """Rotating-frame Hamiltonian on the full space (rad/s).

    The excited level carries ``-detuning`` with detuning = omega_0 - omega.
    """
    ops = _operators(spec.nuclear_spin)
    h = h_zeeman(spec, cfg.B) + h_hyperfine(spec) - cfg.detuning * ops["PE"]
    if cfg.rabi:
        h = h + laser_coupling(spec, cfg.rabi, cfg.theta)
    return h


def excited_block(spec: AtomSpec, B: float, detuning: float = 0.0) -> np.ndarray:
    n = spec.n_nuclear
    h = h_zeeman(spec, B) + h_hyperfine(spec)
    return h[n:, n:] - detuning * np.eye(3 * n)


def ground_energies(spec: AtomSpec, B: float) -> np.ndarray:
    """Ground Zeeman energies in basis order (m_I descending)."""
    return -TWO_PI * B * spec.g_I * NUCLEAR_MAGNETON_HZ_PER_G * m_values(spec.nuclear_spin)


def _excited_quantum_numbers(spec: AtomSpec):
    mj = np.repeat([1.0, 0.0, -1.0], spec.n_nuclear)
    mi = np.tile(m_values(spec.nuclear_spin), 3)
    return mj, mi


def excited_spectrum(spec: AtomSpec, B: float, detuning: float = 0.0):
    """Eigenvalues (ascending, rad/s) and eigenvectors of the excited block."""
    return hermitian_eig(excited_block(spec, B, detuning))


def min_detuning(spec: AtomSpec, B: float, detuning: float) -> float:
    """Smallest distance between the laser and an excited eigenvalue (rad/s)."""
    evals, _ = excited_spectrum(spec, B)
    return float(np.min(np.abs(evals - detuning)))


def _mf_blocks(spec: AtomSpec):
    mj, mi = _excited_quantum_numbers(spec)
    mf = mj + mi
    return [(float(v), np.flatnonzero(np.isclose(mf, v))) for v in np.unique(mf)]


def _block_spectra(spec: AtomSpec, B: float):
    """Per-m_F eigen-decompositions of the excited block (ascending within block)."""
    h = excited_block(spec, B)
    return [(mf, idx, *hermitian_eig(h[np.ix_(idx, idx)])) for mf, idx in _mf_blocks(spec)]


def lower_manifold_energies(spec: AtomSpec, B: float) -> np.ndarray:
    """Energies of the excited levels that connect to m_J = -1 at high field.

    The Zeeman Hamiltonian conserves m_F, and inside one m_F sector the levels
    never cross, so the adiabatic m_J = -1 partner in each sector is simply its
    lowest level (for g_J > 0). Sectors m_F = m_I - 1 run over all 2I + 1 m_I.
    Returned in order of m_F ascending.
    """
    if spec.g_J <= 0:
        raise ValueError("adiabatic manifold labels assume g_J > 0")
    out = []
    for mf, idx, evals, _ in _block_spectra(spec, B):
        if mf <= spec.nuclear_spin - 1 + 1e-9:
            out.append(evals[0])
    return np.array(out)


@dataclass
class SpectrumCurve:
    """Breit-Rabi curves: tracked level energies versus field.

    ``excited_levels`` has shape (n_fields, 3(2I+1)) and ``ground_levels``
    (n_fields, 2I+1), both rad/s. ``characters[b, k]`` is the dominant
    product-basis component (m_J, m_I) of excited curve ``k`` at field ``b``.
    """

    field_grid: np.ndarray
    excited_levels: np.ndarray
    excited_labels: list
    characters: np.ndarray
    ground_levels: np.ndarray
    ground_labels: list
    min_overlap: float = field(default=1.0)


def breit_rabi(spec: AtomSpec, B_grid, min_overlap: float = 0.5) -> SpectrumCurve:
    """Track excited and ground levels across ``B_grid`` (Gauss, ascending).

    Inside each m_F sector, successive eigenvectors are matched by maximal
    overlap; levels of different m_F cross freely. A matched overlap below
    ``min_overlap`` raises :class:`TrackingError` naming the field interval.
    """
    B_grid = np.asarray(B_grid, dtype=float)
    if B_grid.ndim != 1 or B_grid.size == 0:
        raise ValueError("B_grid must be a non-empty 1-D sequence")
    if np.any(np.diff(B_grid) <= 0):
        raise ValueError("B_grid must be strictly ascending")
    mj, mi = _excited_quantum_numbers(spec)
    blocks = _mf_blocks(spec)
    n_exc = spec.n_excited
    levels = np.empty((B_grid.size, n_exc))
    chars = np.empty((B_grid.size, n_exc, 2))
    labels: list[str] = []
    col = 0
    worst = 1.0
    prev = None
    cols = []
    for mf, idx in blocks:
        cols.append(np.arange(col, col + idx.size))
        labels += [f"e[mF={fmt_half(mf)},n={n}]" for n in range(idx.size)]
        col += idx.size
    for b, B in enumerate(B_grid):
        current = []
        h = excited_block(spec, B)
        for _, idx in blocks:
            evals, evecs = hermitian_eig(h[np.ix_(idx, idx)])
            current.append((evals, evecs))
        if prev is not None:
            tracked = []
            for (evals, evecs), (_, pvecs) in zip(current, prev):
                ov = np.abs(pvecs.conj().T @ evecs) ** 2
                rows, perm = linear_sum_assignment(-ov)
                got = ov[rows, perm].min()
                worst = min(worst, got)
                if got < min_overlap:
                    raise TrackingError(
                        f"overlap {got:.3f} < {min_overlap} between B={B_grid[b-1]} G and "
                        f"B={B} G; refine the grid",
                        interval=(float(B_grid[b - 1]), float(B)),
                    )
                tracked.append((evals[perm], evecs[:, perm]))
            current = tracked
        for (mf, idx), cidx, (evals, evecs) in zip(blocks, cols, current):
            levels[b, cidx] = evals
            dom = idx[np.argmax(np.abs(evecs) ** 2, axis=0)]
            chars[b, cidx, 0] = mj[dom]
            chars[b, cidx, 1] = mi[dom]
        prev = current
    ground = np.stack([ground_energies(spec, B) for B in B_grid])
    glabels = [f"g[mI={fmt_half(m)}]" for m in m_values(spec.nuclear_spin)]
    return SpectrumCurve(B_grid, levels, labels, chars, ground, glabels, worst)


def rabi_to_intensity(spec: AtomSpec, rabi: float) -> float:
    """Peak intensity in W/cm^2 for an electronic Rabi frequency in rad/s.

    Inverts ``|hbar Omega| = D sqrt(2 I / (eps0 c))``.
    """
    if rabi < 0:
        raise ValueError("rabi must be non-negative")
    field_amp = HBAR * rabi / (spec.dipole_moment * AU_DIPOLE_CM)
    return 0.5 * EPSILON_0 * SPEED_OF_LIGHT * field_amp**2 / 1e4


def intensity_to_rabi(spec: AtomSpec, intensity: float) -> float:
    """Electronic Rabi frequency (rad/s) for a peak intensity in W/cm^2."""
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    field_amp = math.sqrt(2 * intensity * 1e4 / (EPSILON_0 * SPEED_OF_LIGHT))
    return spec.dipole_moment * AU_DIPOLE_CM * field_amp / HBAR


def power_for_waist(intensity: float, waist: float) -> float:
    """Gaussian-beam power (W) giving peak ``intensity`` (W/cm^2) at ``waist`` (m)."""
    if intensity < 0 or waist <= 0:
        raise ValueError("need intensity >= 0 and waist > 0")
    return intensity * 1e4 * math.pi * waist**2 / 2


def intensity_for_power(power: float, waist: float) -> float:
    """Peak intensity (W/cm^2) of a Gaussian beam of ``power`` W and ``waist`` m."""
    if power < 0 or waist <= 0:
        raise ValueError("need power >= 0 and waist > 0")
    return 2 * power / (math.pi * waist**2) / 1e4
