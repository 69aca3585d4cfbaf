"""Adiabatic elimination of the excited level.

The excited manifold is folded into a (2I+1)-dimensional effective
Hamiltonian on the nuclear-spin ground states,

    H_eff = H_G - (Omega^2 / 4) eps(theta)^dagger alpha eps(theta),

where ``alpha`` is the operator-valued polarizability built from the
excited-state resolvent. Because the dipole operators conserve m_I and the
hyperfine term changes it by at most one unit per J step, H_eff is
five-diagonal in the m_I basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .atom import MHZ, AtomSpec, FieldConfig, excited_spectrum, ground_energies
from .exceptions import SingularExcitedManifold
from .spinops import dipole_components, m_values

DELTA_FLOOR = 1.0 * MHZ
_AXES = "xyz"

__all__ = [
    "DELTA_FLOOR",
    "PolarizabilityTensor",
    "EffectiveModel",
    "CoefficientGrid",
    "polarizability",
    "effective_hamiltonian",
    "coefficient_grid",
    "five_diagonal_hamiltonian",
    "excited_population_bound",
    "scattered_photons_bound",
    "lower_labels",
    "basis_index",
]


def basis_index(spec_or_I, m: float) -> int:
    """Row of ``|m_I = m>`` in the descending basis."""
    I = spec_or_I.nuclear_spin if isinstance(spec_or_I, AtomSpec) else float(spec_or_I)
    k = I - m
    if abs(k - round(k)) > 1e-9 or not 0 <= round(k) <= 2 * I:
        raise ValueError(f"m_I = {m} is not a projection of I = {I}")
    return int(round(k))


def lower_labels(spec: AtomSpec) -> np.ndarray:
    """Lower m_I labels of the neighboring transitions, ascending."""
    return np.sort(m_values(spec.nuclear_spin))[:-1]


@dataclass(frozen=True)
class _DipoleAmplitudes:
    """Excited eigenvalues and ``<nu| D_i |g, m>`` for i = x, y, z."""

    energies: np.ndarray
    amps: np.ndarray  # (3, n_excited, n_ground)


@lru_cache(maxsize=256)
def _dipole_amplitudes(spec: AtomSpec, B: float) -> _DipoleAmplitudes:
    evals, evecs = excited_spectrum(spec, B)
    n = spec.n_nuclear
    amps = []
    for d in dipole_components():
        # electronic ground -> excited columns, nuclear identity
        d_eg = np.kron(d[1:, :1], np.eye(n))
        amps.append(evecs.conj().T @ d_eg)
    out = _DipoleAmplitudes(evals, np.array(amps))
    out.energies.setflags(write=False)
    out.amps.setflags(write=False)
    return out


@dataclass(frozen=True)
class PolarizabilityTensor:
    """``alpha[i, j]`` is the (2I+1)x(2I+1) block for Cartesian axes i, j.

    Units are 1/(rad/s). Axis order is x, y, z.
    """

    B: float
    detuning: float
    alpha: np.ndarray
    delta_min: float

    def component(self, ij: str) -> np.ndarray:
        i, j = (_AXES.index(c) for c in ij)
        return self.alpha[i, j]

    def contract(self, theta: float) -> np.ndarray:
        """``eps(theta)^dagger alpha eps(theta)`` for linear polarization."""
        s, c = math.sin(theta), math.cos(theta)
        a = self.alpha
        return c * c * a[2, 2] + s * s * a[0, 0] + s * c * (a[0, 2] + a[2, 0])


def polarizability(spec: AtomSpec, B: float, detuning: float,
                   delta_floor: float = DELTA_FLOOR) -> PolarizabilityTensor:
    """Polarizability tensor from the excited eigendecomposition.

    Raises
    ------
    SingularExcitedManifold
        If the laser lies within ``delta_floor`` of an excited eigenvalue.
    """
    amp = _dipole_amplitudes(spec, float(B))
    denom = amp.energies - detuning
    delta_min = float(np.min(np.abs(denom)))
    if delta_min <= delta_floor:
        raise SingularExcitedManifold(
            f"minimum detuning {delta_min / MHZ:.4g} MHz is below the floor "
            f"{delta_floor / MHZ:.4g} MHz at B={B} G"
        )
    a = amp.amps
    alpha = np.einsum("ivm,v,jvn->ijmn", a.conj(), 1.0 / denom, a)
    return PolarizabilityTensor(float(B), float(detuning), alpha, delta_min)


def _coefficients(zz, xx, cross, I):
    """s^z, s^x (basis order), g and h (ascending lower label) from blocks.

    Works on stacked arrays with the matrix in the last two axes.
    """
    n = zz.shape[-1]
    s_z = np.real(np.diagonal(zz, axis1=-2, axis2=-1))
    s_x = np.real(np.diagonal(xx, axis1=-2, axis2=-1))
    # lower label m ascending <-> basis row n-1, n-2, ...; partner m+1 one row up
    rows = np.arange(n - 1, 0, -1)
    g = cross[..., rows, rows - 1]
    rows2 = np.arange(n - 1, 1, -1)
    h = xx[..., rows2, rows2 - 2]
    return s_z, s_x, g, h


def five_diagonal_hamiltonian(ground, s_z, s_x, g, h, rabi, theta) -> np.ndarray:
    """Assemble H_eff from its diagonal, nearest and next-nearest coefficients."""
    n = len(ground)
    sn, cs = math.sin(theta), math.cos(theta)
    pref = rabi * rabi / 4
    out = np.diag(np.asarray(ground, float) - pref * (np.asarray(s_z) * cs * cs + np.asarray(s_x) * sn * sn))
    out = out.astype(complex)
    for k, val in enumerate(g):
        lo = n - 1 - k  # row of the lower label m
        out[lo, lo - 1] = -pref * val * sn * cs
        out[lo - 1, lo] = np.conj(out[lo, lo - 1])
    for k, val in enumerate(h):
        lo = n - 1 - k
        out[lo, lo - 2] = -pref * val * sn * sn
        out[lo - 2, lo] = np.conj(out[lo, lo - 2])
    return out


@dataclass(frozen=True)
class EffectiveModel:
    """Effective ground-manifold Hamiltonian and its coefficient sequences.

    ``h_eff`` (rad/s) is in the descending m_I basis, as are ``ground``,
    ``s_z`` and ``s_x``. ``g[k]`` and ``h[k]`` belong to the lower label
    ``labels[k]`` (ascending): ``g_m = <m|alpha_xz + alpha_zx|m+1>``,
    ``h_m = <m|alpha_xx|m+2>``. Coefficients are in 1/(rad/s).
    """

    spec: AtomSpec
    cfg: FieldConfig
    h_eff: np.ndarray
    ground: np.ndarray
    s_z: np.ndarray
    s_x: np.ndarray
    g: np.ndarray
    h: np.ndarray
    delta_min: float
    labels: np.ndarray = field(repr=False)

    def index(self, m: float) -> int:
        return basis_index(self.spec, m)

    def transition(self, m: float) -> int:
        """Position of lower label ``m`` in ``g``."""
        k = np.flatnonzero(np.isclose(self.labels, m))
        if k.size != 1:
            raise ValueError(f"{m} is not a lower transition label {list(self.labels)}")
        return int(k[0])

    def hamiltonian(self, theta: float | None = None, rabi: float | None = None) -> np.ndarray:
        """Rebuild H_eff from the coefficients, optionally at new theta/rabi."""
        theta = self.cfg.theta if theta is None else theta
        rabi = self.cfg.rabi if rabi is None else rabi
        return five_diagonal_hamiltonian(self.ground, self.s_z, self.s_x, self.g, self.h, rabi, theta)


def effective_hamiltonian(spec: AtomSpec, cfg: FieldConfig,
                          delta_floor: float = DELTA_FLOOR,
                          tensor: PolarizabilityTensor | None = None) -> EffectiveModel:
    """Effective Hamiltonian at ``cfg``; ``tensor`` may be passed to reuse work."""
    if tensor is None:
        tensor = polarizability(spec, cfg.B, cfg.detuning, delta_floor)
    ground = ground_energies(spec, cfg.B)
    h_eff = np.diag(ground).astype(complex) - cfg.rabi**2 / 4 * tensor.contract(cfg.theta)
    a = tensor.alpha
    s_z, s_x, g, h = _coefficients(a[2, 2], a[0, 0], a[0, 2] + a[2, 0], spec.nuclear_spin)
    return EffectiveModel(spec, cfg, h_eff, ground, s_z, s_x, g, h, tensor.delta_min,
                          lower_labels(spec))


@dataclass(frozen=True)
class CoefficientGrid:
    """Coefficient sequences for one field and many detunings.

    Leading axis runs over ``detunings``. Singular cells (within the floor)
    hold NaN coefficients and ``singular`` is set.
    """

    B: float
    detunings: np.ndarray
    ground: np.ndarray
    s_z: np.ndarray
    s_x: np.ndarray
    g: np.ndarray
    h: np.ndarray
    delta_min: np.ndarray
    singular: np.ndarray


def coefficient_grid(spec: AtomSpec, B: float, detunings,
                     delta_floor: float = DELTA_FLOOR) -> CoefficientGrid:
    """Vectorized coefficient extraction over a detuning grid at fixed field."""
    det = np.atleast_1d(np.asarray(detunings, dtype=float))
    amp = _dipole_amplitudes(spec, float(B))
    denom = amp.energies[None, :] - det[:, None]
    delta_min = np.min(np.abs(denom), axis=1)
    singular = delta_min <= delta_floor
    inv = np.where(singular[:, None], np.nan, 1.0 / np.where(denom == 0, 1.0, denom))
    ax, az = amp.amps[0], amp.amps[2]
    zz = np.einsum("vm,dv,vn->dmn", az.conj(), inv, az)
    xx = np.einsum("vm,dv,vn->dmn", ax.conj(), inv, ax)
    cross = np.einsum("vm,dv,vn->dmn", ax.conj(), inv, az)
    cross = cross + np.conj(np.swapaxes(cross, -1, -2))
    s_z, s_x, g, h = _coefficients(zz, xx, cross, spec.nuclear_spin)
    return CoefficientGrid(float(B), det, ground_energies(spec, B), s_z, s_x, g, h,
                           delta_min, singular)


def excited_population_bound(rabi, delta_min):
    """Crude excited-population bound ``Omega^2 / (4 delta_min^2)``."""
    delta_min = np.asarray(delta_min, dtype=float)
    if np.any(delta_min <= 0):
        raise ValueError("delta_min must be positive")
    out = np.asarray(rabi, dtype=float) ** 2 / (4 * delta_min**2)
    return float(out) if out.ndim == 0 else out


def scattered_photons_bound(spec: AtomSpec, p_excited: float, f_op: float) -> float:
    """Scattered photons per operation, ``Gamma p_E / f_op`` (f_op in Hz)."""
    if f_op <= 0:
        raise ValueError("f_op must be positive")
    return spec.decay_rate * p_excited / f_op
