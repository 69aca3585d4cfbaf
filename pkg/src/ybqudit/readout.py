"""Stretched-state fluorescence readout.

A circularly polarized probe drives the addressed stretched ground state on
its closed cycling transition. Every other ground state is treated as a set
of independent two-level channels to the field-dressed excited eigenstates;
the brightest of these sets the dark rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

import numpy as np

from .atom import AtomSpec, excited_spectrum, fmt_half, ground_energies
from .spinops import dipole_components, m_values

__all__ = [
    "bright_rate",
    "DarkChannel",
    "ReadoutPoint",
    "Addressing",
    "default_addressing",
    "probe_polarization",
    "channel_couplings",
    "dark_rates",
    "readout_point",
    "scan_readout",
]

BETA_CUTOFF = 1e-6


def bright_rate(gamma, rabi, detuning=0.0):
    """Two-level scattering rate ``(G/2) s / (1 + s + (2 d/G)^2)``, ``s = 2 W^2/G^2``.

    Vectorized over all arguments; rates in the units of ``gamma``.
    """
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0):
        raise ValueError("decay rate must be positive")
    s = 2 * np.asarray(rabi, dtype=float) ** 2 / gamma**2
    out = gamma / 2 * s / (1 + s + (2 * np.asarray(detuning, dtype=float) / gamma) ** 2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Addressing:
    """Addressed stretched state: ``side`` is 'upper' (sigma+) or 'lower' (sigma-)."""

    side: str

    def __post_init__(self):
        if self.side not in ("upper", "lower"):
            raise ValueError("side must be 'upper' or 'lower'")

    @property
    def sign(self) -> int:
        return 1 if self.side == "upper" else -1

    def quantum_numbers(self, spec: AtomSpec) -> tuple[int, float]:
        return self.sign, self.sign * spec.nuclear_spin


# the narrow line cycles on the lower stretched pair, the broad line on the upper
_DEFAULT_SIDE = {"Yb173_3P1": "lower", "Yb173_1P1": "upper"}


def default_addressing(spec: AtomSpec) -> Addressing:
    return Addressing(_DEFAULT_SIDE.get(spec.label, "lower"))


def probe_polarization(sign: int) -> np.ndarray:
    """Electronic operator of a sigma+ (sign=+1) or sigma- probe, ``-/+ (dx +/- i dy)/sqrt 2``."""
    dx, dy, _ = dipole_components()
    if sign > 0:
        return -(dx + 1j * dy) / math.sqrt(2)
    return (dx - 1j * dy) / math.sqrt(2)


@lru_cache(maxsize=256)
def _couplings(spec: AtomSpec, B: float, sign: int):
    evals, evecs = excited_spectrum(spec, B)
    d = probe_polarization(sign)
    amps = evecs.conj().T @ np.kron(d[1:, :1], np.eye(spec.n_nuclear))
    out = (evals, np.abs(amps), ground_energies(spec, B))
    for a in out:
        a.setflags(write=False)
    return out


def channel_couplings(spec: AtomSpec, B: float, sign: int):
    """Excited energies, ``beta[nu, k] = |<nu| eps . D |g, k>|`` and ground energies."""
    return _couplings(spec, float(B), int(sign))


@dataclass(frozen=True)
class DarkChannel:
    ground: float  # m_I of the dark state
    excited: int  # eigenstate index, ascending energy
    beta: float
    detuning: float  # rad/s, channel frequency minus probe frequency
    rate: float

    def as_dict(self) -> dict:
        return {"ground_mI": self.ground, "excited_index": self.excited, "beta": self.beta,
                "detuning": self.detuning, "rate": self.rate}


@dataclass(frozen=True)
class ReadoutPoint:
    B: float
    rabi: float
    probe_detuning: float
    label: str
    addressed: tuple  # (m_J, m_I)
    bright: float
    dark: float
    channels: tuple = field(default=(), repr=False)
    gamma: float = 0.0

    @property
    def contrast(self) -> float:
        return self.bright / self.dark if self.dark > 0 else math.inf

    @property
    def dark_over_gamma(self) -> float:
        return self.dark / self.gamma

    @property
    def dominant(self) -> DarkChannel | None:
        return max(self.channels, key=lambda c: c.rate) if self.channels else None


def _addressed(spec, B, addressing):
    evals, beta, eg = channel_couplings(spec, B, addressing.sign)
    _, m_i = addressing.quantum_numbers(spec)
    k = int(np.flatnonzero(np.isclose(m_values(spec.nuclear_spin), m_i))[0])
    nu = int(np.argmax(beta[:, k]))
    return evals, beta, eg, k, nu


def dark_rates(spec: AtomSpec, B: float, rabi: float, addressing: Addressing | None = None,
               probe_detuning: float = 0.0) -> list[DarkChannel]:
    """Per-channel off-resonant rates for every non-addressed ground state.

    The probe sits at the addressed transition frequency plus
    ``probe_detuning``; channels with ``beta <= 1e-6`` are dropped.
    """
    addressing = addressing or default_addressing(spec)
    evals, beta, eg, k0, nu0 = _addressed(spec, float(B), addressing)
    probe = evals[nu0] - eg[k0] + probe_detuning
    m_vals = m_values(spec.nuclear_spin)
    out = []
    for k in range(spec.n_nuclear):
        if k == k0:
            continue
        for nu in np.flatnonzero(beta[:, k] > BETA_CUTOFF):
            det = evals[nu] - eg[k] - probe
            b = float(beta[nu, k])
            out.append(DarkChannel(float(m_vals[k]), int(nu), b, float(det),
                                   bright_rate(spec.decay_rate, b * rabi, det)))
    return out


def readout_point(spec: AtomSpec, B: float, rabi: float, addressing: Addressing | None = None,
                  probe_detuning: float = 0.0) -> ReadoutPoint:
    addressing = addressing or default_addressing(spec)
    _, beta, _, k0, nu0 = _addressed(spec, float(B), addressing)
    chans = dark_rates(spec, B, rabi, addressing, probe_detuning)
    r_b = bright_rate(spec.decay_rate, beta[nu0, k0] * rabi, probe_detuning)
    r_d = max((c.rate for c in chans), default=0.0)
    return ReadoutPoint(float(B), float(rabi), float(probe_detuning), spec.label,
                        addressing.quantum_numbers(spec), r_b, r_d, tuple(chans), spec.decay_rate)


def scan_readout(spec: AtomSpec, B_grid, rabi_grid, probe_detuning: float = 0.0,
                 addressing: Addressing | None = None) -> Iterator[ReadoutPoint]:
    """Readout points in field-major order over the two grids."""
    B_grid = np.atleast_1d(np.asarray(B_grid, dtype=float))
    rabi_grid = np.atleast_1d(np.asarray(rabi_grid, dtype=float))
    if B_grid.size == 0 or rabi_grid.size == 0:
        raise ValueError("grids must be non-empty")
    for B in B_grid:
        for rabi in rabi_grid:
            yield readout_point(spec, B, rabi, addressing, probe_detuning)


def describe_addressing(spec: AtomSpec, addressing: Addressing) -> str:
    m_j, m_i = addressing.quantum_numbers(spec)
    pol = "sigma+" if addressing.sign > 0 else "sigma-"
    return f"{pol} |g,{fmt_half(m_i)}> -> |mJ={m_j:+d},{fmt_half(m_i)}>"
