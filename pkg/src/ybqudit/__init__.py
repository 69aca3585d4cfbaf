"""All-optical control model for the 173Yb nuclear-spin qudit.

Submodules, bottom-up: ``spinops`` (angular momentum), ``atom`` (level
structure), ``effective`` (adiabatic elimination), ``raman`` (magic-angle
flips), ``phase`` (light-shift phase gates), ``universality`` (Lie
closure), ``dynamics`` (full-space propagation), ``readout`` (cycling
fluorescence), ``estimators`` (scikit-learn wrappers) and ``cli``.
"""

__version__ = "0.1.0"

from .atom import BUILTIN_SPECS, AtomSpec, FieldConfig, builtin_spec
from .effective import EffectiveModel, effective_hamiltonian
from .exceptions import (
    AmbiguousManifold,
    DegenerateCoefficients,
    DistinctnessViolation,
    FitError,
    InfeasiblePoint,
    SingularExcitedManifold,
    TrackingError,
    YbQuditError,
)
from .raman import Thresholds, evaluate_point, magic_angle

__all__ = [
    "__version__",
    "AtomSpec",
    "FieldConfig",
    "BUILTIN_SPECS",
    "builtin_spec",
    "EffectiveModel",
    "effective_hamiltonian",
    "Thresholds",
    "evaluate_point",
    "magic_angle",
    "YbQuditError",
    "SingularExcitedManifold",
    "DegenerateCoefficients",
    "TrackingError",
    "AmbiguousManifold",
    "DistinctnessViolation",
    "InfeasiblePoint",
    "FitError",
]
