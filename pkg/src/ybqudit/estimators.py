"""scikit-learn style wrappers over the functional core.

These are stateless physics maps, so ``fit`` only validates parameters and
records the input width; ``transform`` evaluates one row per operating
point. They exist so that scans compose with ``Pipeline`` and
``ColumnTransformer`` tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .atom import FieldConfig, builtin_spec
from .effective import DELTA_FLOOR, effective_hamiltonian
from .exceptions import SingularExcitedManifold
from .phase import centered_shifts, max_rabi_under_population
from .raman import Thresholds, evaluate_point
from .readout import Addressing, default_addressing, readout_point
from .spinops import m_values

__all__ = ["RamanFeasibilityMap", "PhaseShiftMap", "ReadoutModel"]


class _PhysicsMap(TransformerMixin, BaseEstimator):
    _n_inputs = 0

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_all_finite=True)
        if X.shape[1] != self._n_inputs:
            raise ValueError(f"expected {self._n_inputs} columns, got {X.shape[1]}")
        self.spec_ = builtin_spec(self.spec)
        self.n_features_in_ = X.shape[1]
        return self

    def _check(self, X):
        check_is_fitted(self, "spec_")
        X = check_array(X, dtype=float, ensure_all_finite=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return X


class RamanFeasibilityMap(_PhysicsMap):
    """Rows ``(B [G], detuning [rad/s], rabi [rad/s])`` to feasibility features.

    Output columns: magic-angle existence, theta* (rad), Raman Rabi
    frequency (rad/s), excited-population bound, leakage estimate, feasible.
    """

    _n_inputs = 3

    def __init__(self, spec="Yb173_3P1", transition=-0.5, p_max=1e-2, leak_max=1e-2,
                 delta_floor=DELTA_FLOOR):
        self.spec = spec
        self.transition = transition
        self.p_max = p_max
        self.leak_max = leak_max
        self.delta_floor = delta_floor

    def transform(self, X):
        X = self._check(X)
        th = Thresholds(p_max=self.p_max, leak_max=self.leak_max, delta_floor=self.delta_floor)
        out = np.empty((X.shape[0], 6))
        for i, (B, det, rabi) in enumerate(X):
            r = evaluate_point(self.spec_, FieldConfig(B, det, rabi), self.transition, th)
            out[i] = (r.magic.exists, r.magic.theta_star, r.raman_rabi, r.p_excited_bound,
                      r.leakage_max, r.feasible)
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(["magic_exists", "theta_star_rad", "raman_rabi_rad_s",
                         "p_excited_bound", "leakage_max", "feasible"], dtype=object)


class PhaseShiftMap(_PhysicsMap):
    """Rows ``(B [G], detuning [rad/s])`` to centered phase rates (rad/s).

    The Rabi frequency is the largest one meeting the excited-population
    bound ``p_max``; singular rows give NaN.
    """

    _n_inputs = 2

    def __init__(self, spec="Yb173_3P1", p_max=1e-2, delta_floor=DELTA_FLOOR):
        self.spec = spec
        self.p_max = p_max
        self.delta_floor = delta_floor

    def transform(self, X):
        X = self._check(X)
        n = self.spec_.n_nuclear
        out = np.full((X.shape[0], n + 1), np.nan)
        for i, (B, det) in enumerate(X):
            try:
                rabi = max_rabi_under_population(self.spec_, B, det, self.p_max, self.delta_floor)
                model = effective_hamiltonian(self.spec_, FieldConfig(B, det, rabi), self.delta_floor)
            except SingularExcitedManifold:
                continue
            out[i, :n] = centered_shifts(model)
            out[i, n] = rabi
        return out

    def get_feature_names_out(self, input_features=None):
        names = [f"shift_mI{m:+.1f}_rad_s" for m in m_values(self.spec_.nuclear_spin)]
        return np.array(names + ["rabi_max_rad_s"], dtype=object)


class ReadoutModel(_PhysicsMap):
    """Rows ``(B [G], rabi [rad/s], probe detuning [rad/s])`` to readout rates.

    Output columns: bright rate, dark rate (both rad/s) and contrast.
    """

    _n_inputs = 3

    def __init__(self, spec="Yb173_3P1", side=None):
        self.spec = spec
        self.side = side

    def transform(self, X):
        X = self._check(X)
        addr = Addressing(self.side) if self.side else default_addressing(self.spec_)
        out = np.empty((X.shape[0], 3))
        for i, (B, rabi, det) in enumerate(X):
            p = readout_point(self.spec_, B, rabi, addr, det)
            out[i] = (p.bright, p.dark, p.contrast)
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(["bright_rate_rad_s", "dark_rate_rad_s", "contrast"], dtype=object)
