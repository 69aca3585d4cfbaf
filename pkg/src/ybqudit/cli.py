"""Command-line front end: spectra, feasibility scans, validation, readout.

Every command reads an optional ``--config`` file of ``[section]`` blocks
with ``key = value`` lines; command-line flags override it. Frequencies in
flags, config files and MHz/kHz columns are ordinary frequencies
(value = omega / 2pi). Grids are written ``start:stop:step`` (inclusive)
or as comma-separated lists.

Exit codes: 0 success, 2 configuration error, 3 physics error, 4 the
requested point or control set is infeasible.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .atom import (
    KHZ,
    MHZ,
    TWO_PI,
    BUILTIN_SPECS,
    FieldConfig,
    breit_rabi,
    builtin_spec,
    constants_document,
    fmt_half,
    intensity_for_power,
    intensity_to_rabi,
    power_for_waist,
    rabi_to_intensity,
)
from .dynamics import validate_effective
from .effective import DELTA_FLOOR, effective_hamiltonian
from .exceptions import InfeasiblePoint, YbQuditError
from .phase import default_phase_detunings, scan_phase_rates, summarize_phase_vs_B
from .raman import (
    Thresholds,
    best_over_rabi,
    default_field_grid,
    describe_transition,
    evaluate_point,
    feasibility_cells,
    numeric_magic_angle,
    summarize_cells,
)
from .readout import Addressing, default_addressing, readout_point
from .spinops import m_values
from .universality import (
    build_control_set,
    check_distinct_gaps,
    control_points_from_scan,
    isolate_coupling,
    lie_closure,
    transition_pair,
)

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_INFEASIBLE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def parse_grid(text: str) -> list[float]:
    """``"a:b:step"`` (inclusive, ascending) or ``"x, y, z"``."""
    text = text.strip()
    if not text:
        raise ConfigError("empty grid")
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ConfigError(f"range {text!r} needs start:stop:step")
            a, b, step = parts
            if step <= 0 or b < a:
                raise ConfigError(f"range {text!r} must ascend with positive step")
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            vals = [a + k * step for k in range(n)]
        else:
            vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad grid {text!r}: {exc}") from None
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"grid {text!r} has non-finite values")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"grid {text!r} is not strictly ascending")
    return vals


def parse_half(text) -> float:
    """``-1/2``, ``-0.5`` or ``+3/2`` to a float half-integer."""
    try:
        val = float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad m_I value {text!r}") from None
    if abs(2 * val - round(2 * val)) > 1e-12:
        raise ConfigError(f"{text!r} is not a half-integer")
    return val


def _float(text, name) -> float:
    try:
        val = float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number, got {text!r}") from None
    if not math.isfinite(val):
        raise ConfigError(f"{name} must be finite")
    return val


@dataclass
class RunConfig:
    """Resolved settings. Frequencies are stored in MHz (omega / 2pi)."""

    spec: str = "Yb173_3P1"
    # [grid]
    B_grid: list | None = None
    detuning_grid_MHz: list | None = None
    rabi_grid_MHz: list | None = None
    # [point]
    B: float = 500.0
    detuning_MHz: float = -3000.0
    rabi_MHz: float = 15.0
    transition: float = -0.5
    # [thresholds]
    p_max: float = 1e-2
    leak_max: float = 1e-2
    delta_floor_MHz: float = DELTA_FLOOR / MHZ
    # [readout]
    side: str | None = None
    probe_detuning_MHz: float = 0.0
    # [validate]
    periods: float = 3.0
    # [output]
    view: str | None = None
    deterministic: bool = field(default=True, init=False)

    def thresholds(self) -> Thresholds:
        return Thresholds(p_max=self.p_max, leak_max=self.leak_max,
                          delta_floor=self.delta_floor_MHz * MHZ)

    def validate(self) -> "RunConfig":
        if self.spec not in BUILTIN_SPECS:
            raise ConfigError(f"unknown spec {self.spec!r}; known: {sorted(BUILTIN_SPECS)}")
        for name in ("p_max", "leak_max", "delta_floor_MHz", "periods"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.B < 0 or self.rabi_MHz < 0:
            raise ConfigError("B and rabi must be non-negative")
        if self.side not in (None, "upper", "lower"):
            raise ConfigError("side must be 'upper' or 'lower'")
        if self.B_grid is not None and min(self.B_grid) < 0:
            raise ConfigError("field grid must be non-negative")
        return self

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


# config key -> (RunConfig attribute, parser)
_KEYS = {
    ("run", "spec"): ("spec", str),
    ("grid", "b"): ("B_grid", parse_grid),
    ("grid", "detuning_mhz"): ("detuning_grid_MHz", parse_grid),
    ("grid", "rabi_mhz"): ("rabi_grid_MHz", parse_grid),
    ("point", "b"): ("B", None),
    ("point", "detuning_mhz"): ("detuning_MHz", None),
    ("point", "rabi_mhz"): ("rabi_MHz", None),
    ("point", "transition"): ("transition", parse_half),
    ("thresholds", "p_max"): ("p_max", None),
    ("thresholds", "leak_max"): ("leak_max", None),
    ("thresholds", "delta_floor_mhz"): ("delta_floor_MHz", None),
    ("readout", "side"): ("side", str),
    ("readout", "probe_detuning_mhz"): ("probe_detuning_MHz", None),
    ("validate", "periods"): ("periods", None),
    ("output", "view"): ("view", str),
}


def load_config(path: str | None, cfg: RunConfig | None = None) -> RunConfig:
    cfg = cfg or RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config {path}: {exc}") from None
    for section in parser.sections():
        for key, raw in parser.items(section):
            try:
                attr, conv = _KEYS[(section.lower(), key.lower())]
            except KeyError:
                raise ConfigError(f"unknown config key [{section}] {key}") from None
            setattr(cfg, attr, conv(raw) if conv else _float(raw, key))
    return cfg


def _apply_flags(cfg: RunConfig, ns: argparse.Namespace) -> RunConfig:
    overrides = {
        "spec": ns.spec,
        "B_grid": getattr(ns, "b_grid", None),
        "detuning_grid_MHz": getattr(ns, "detuning_grid_mhz", None),
        "rabi_grid_MHz": getattr(ns, "rabi_grid_mhz", None),
        "B": getattr(ns, "B", None),
        "detuning_MHz": getattr(ns, "detuning_mhz", None),
        "rabi_MHz": getattr(ns, "rabi_mhz", None),
        "transition": getattr(ns, "transition", None),
        "p_max": getattr(ns, "p_max", None),
        "leak_max": getattr(ns, "leak_max", None),
        "delta_floor_MHz": getattr(ns, "delta_floor_mhz", None),
        "side": getattr(ns, "side", None),
        "probe_detuning_MHz": getattr(ns, "probe_detuning_mhz", None),
        "periods": getattr(ns, "periods", None),
        "view": getattr(ns, "view", None),
    }
    for key, val in overrides.items():
        if val is None:
            continue
        if key.endswith("grid") or key.endswith("grid_MHz"):
            val = parse_grid(val)
        elif key == "transition":
            val = parse_half(val)
        setattr(cfg, key, val)
    return cfg.validate()


# ---------------------------------------------------------------------------
# output


def fmt_value(x) -> str:
    """Deterministic CSV cell text: shortest round-trip floats, lowercase bools."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x + 0.0)  # folds -0.0
    return "" if x is None else str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def render_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_value(v) for v in row])
    return buf.getvalue()


def render_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"


def render_record(obj: dict, fmt: str | None) -> str:
    """One flat record: JSON by default, a single CSV row on request."""
    if fmt == "csv":
        return render_csv(list(obj), [list(obj.values())])
    return render_json(obj)


def render_table(header, rows, fmt: str) -> str:
    if fmt == "json":
        return render_json([dict(zip(header, r)) for r in rows])
    return render_csv(header, rows)


def atomic_write(path: str, text: str) -> None:
    """Write to a temporary sibling, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, ns, cfg: RunConfig, command: str) -> None:
    if ns.out is None:
        sys.stdout.write(text)
        return
    atomic_write(ns.out, text)
    meta = {
        "command": command,
        "version": __version__,
        "config": cfg.as_dict(),
        "config_sha256": cfg.digest(),
        "constants": constants_document(builtin_spec(cfg.spec)),
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    atomic_write(ns.out + ".meta.json", render_json(meta))


# ---------------------------------------------------------------------------
# commands


def _map(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def cmd_breit_rabi(cfg: RunConfig, ns) -> int:
    spec = builtin_spec(cfg.spec)
    grid = np.array(cfg.B_grid if cfg.B_grid is not None else parse_grid("0:2000:10"))
    curve = breit_rabi(spec, grid)
    rows = []
    for b, B in enumerate(curve.field_grid):
        for k, lab in enumerate(curve.excited_labels):
            mj, mi = curve.characters[b, k]
            rows.append((B, lab, curve.excited_levels[b, k] / MHZ, fmt_half(mj), fmt_half(mi)))
        for k, (lab, m) in enumerate(zip(curve.ground_labels, m_values(spec.nuclear_spin))):
            rows.append((B, lab, curve.ground_levels[b, k] / MHZ, "0", fmt_half(m)))
    header = ["B_gauss", "level_label", "energy_MHz", "dominant_mJ", "dominant_mI"]
    emit(render_table(header, rows, ns.format or "csv"), ns, cfg, "breit-rabi")
    return EXIT_OK


def magic_angle_report(cfg: RunConfig) -> dict:
    spec = builtin_spec(cfg.spec)
    th = cfg.thresholds()
    fc = FieldConfig(cfg.B, cfg.detuning_MHz * MHZ, cfg.rabi_MHz * MHZ)
    rec = evaluate_point(spec, fc, cfg.transition, th)
    mg = rec.magic
    out = {
        "spec": spec.label,
        "B_gauss": cfg.B,
        "detuning_MHz": cfg.detuning_MHz,
        "shifted_detuning_MHz": rec.shifted_detuning / MHZ,
        "rabi_MHz": cfg.rabi_MHz,
        "transition": describe_transition(cfg.transition),
        "transition_mI": cfg.transition,
        "magic_exists": mg.exists,
        "sin2_theta_star": mg.sin2,
        "theta_star_rad": mg.theta_star,
        "theta_star_deg": math.degrees(mg.theta_star) if mg.exists else None,
        "residual_Hz": mg.residual / TWO_PI if mg.exists else None,
        "raman_rabi_kHz": rec.raman_rabi / KHZ,
        "p_excited_bound": rec.p_excited_bound,
        "leakage_max": rec.leakage_max,
        "p_max": th.p_max,
        "leak_max": th.leak_max,
        "feasible": rec.feasible,
        "reason": rec.reason or mg.reason,
    }
    if mg.exists:
        model = effective_hamiltonian(spec, fc, th.delta_floor)
        out["theta_star_numeric_rad"] = numeric_magic_angle(model, cfg.transition)
    return out


def cmd_magic_angle(cfg: RunConfig, ns) -> int:
    rep = magic_angle_report(cfg)
    emit(render_record(rep, ns.format), ns, cfg, "magic-angle")
    return EXIT_OK if rep["feasible"] else EXIT_INFEASIBLE


_RAMAN_CELLS = ["B_gauss", "detuning_MHz", "shifted_detuning_MHz", "rabi_MHz", "transition_mI",
                "magic_exists", "sin2_theta_star", "theta_star_rad", "raman_rabi_kHz",
                "p_excited_bound", "leakage_max", "feasible", "reason"]
_RAMAN_MAP = ["B_gauss", "detuning_MHz", "shifted_detuning_MHz", "transition_mI", "feasible",
              "best_raman_rabi_kHz", "best_rabi_MHz"]
_RAMAN_SUMMARY = ["B_gauss", "min_rabi_for_magic_MHz", "median_of_medians_kHz",
                  "median_of_maxima_kHz", "n_feasible"]


def _raman_rows(spec, B, cfg: RunConfig, view: str):
    det = None if cfg.detuning_grid_MHz is None else np.array(cfg.detuning_grid_MHz) * MHZ
    rab = None if cfg.rabi_grid_MHz is None else np.array(cfg.rabi_grid_MHz) * MHZ
    cells = feasibility_cells(spec, B, det, rab, thresholds=cfg.thresholds())
    if view == "summary":
        s = summarize_cells(cells)
        return [(s.B, s.min_rabi_for_magic / MHZ, s.median_of_medians / KHZ,
                 s.median_of_maxima / KHZ, s.n_feasible)]
    if view == "map":
        return [(c.B, c.detuning / MHZ, c.shifted_detuning / MHZ, c.transition, c.feasible,
                 c.best_raman_rabi / KHZ, c.best_rabi / MHZ) for c in best_over_rabi(cells)]
    return [(r.B, r.detuning / MHZ, r.shifted_detuning / MHZ, r.rabi / MHZ, r.transition,
             r.magic.exists, r.magic.sin2, r.magic.theta_star, r.raman_rabi / KHZ,
             r.p_excited_bound, r.leakage_max, r.feasible, r.reason) for r in cells.records()]


_PHASE_SUMMARY = ["B_gauss", "median_of_medians_kHz", "median_of_maxima_kHz",
                  "rabi_median_of_medians_MHz", "rabi_median_of_maxima_MHz", "n_detunings"]


def _phase_header(spec):
    levels = [f"S_{fmt_half(m)}_kHz" for m in m_values(spec.nuclear_spin)]
    return ["B_gauss", "detuning_MHz", "rabi_max_MHz", "delta_min_MHz", "feasible",
            "dominant_mI"] + levels


def _phase_rows(spec, B, cfg: RunConfig, view: str):
    det = (default_phase_detunings(spec, B) if cfg.detuning_grid_MHz is None
           else np.array(cfg.detuning_grid_MHz) * MHZ)
    profiles = list(scan_phase_rates(spec, B, det, cfg.p_max, cfg.delta_floor_MHz * MHZ))
    if view == "summary":
        s = summarize_phase_vs_B(profiles)[0]
        return [(s.B, s.median_of_medians / KHZ, s.median_of_maxima / KHZ,
                 s.rabi_median_of_medians / MHZ, s.rabi_median_of_maxima / MHZ, s.n_detunings)]
    return [(p.B, p.detuning / MHZ, p.rabi_max / MHZ, p.delta_min / MHZ, p.feasible,
             fmt_half(p.dominant_level) if p.feasible else "", *(p.shifts / KHZ))
            for p in profiles]


_READOUT = ["B_gauss", "rabi_MHz", "probe_detuning_MHz", "addressed_mJ", "addressed_mI",
            "saturation", "bright_rate_kHz", "dark_rate_kHz", "dark_over_gamma", "contrast",
            "dominant_dark_mI", "dominant_dark_detuning_MHz", "dominant_dark_beta"]


def _readout_rows(spec, B, cfg: RunConfig, view: str):
    addr = Addressing(cfg.side) if cfg.side else default_addressing(spec)
    rab = np.array(cfg.rabi_grid_MHz if cfg.rabi_grid_MHz is not None
                   else list(np.logspace(-2, 2, 41)))
    rows = []
    for r in rab:
        p = readout_point(spec, B, r * MHZ, addr, cfg.probe_detuning_MHz * MHZ)
        dom = p.dominant
        rows.append((p.B, r, cfg.probe_detuning_MHz, p.addressed[0], fmt_half(p.addressed[1]),
                     2 * (r * MHZ) ** 2 / spec.decay_rate**2, p.bright / KHZ, p.dark / KHZ,
                     p.dark_over_gamma, p.contrast,
                     fmt_half(dom.ground) if dom else "", dom.detuning / MHZ if dom else math.nan,
                     dom.beta if dom else math.nan))
    return rows


def cmd_scan(cfg: RunConfig, ns) -> int:
    spec = builtin_spec(cfg.spec)
    mode = ns.mode
    view = cfg.view or {"raman": "cells", "phase": "profiles", "readout": "points"}[mode]
    allowed = {"raman": ("cells", "map", "summary"), "phase": ("profiles", "summary"),
               "readout": ("points",)}[mode]
    if view not in allowed:
        raise ConfigError(f"view {view!r} not available for {mode}; choose from {allowed}")
    if cfg.B_grid is not None:
        fields = cfg.B_grid
    elif getattr(ns, "B", None) is not None:
        fields = [cfg.B]
    elif mode == "raman" and view == "summary":
        fields = list(default_field_grid())
    elif mode == "readout":
        fields = parse_grid("100:2000:100")
    else:
        fields = [cfg.B]
    if mode == "raman":
        header = {"cells": _RAMAN_CELLS, "map": _RAMAN_MAP, "summary": _RAMAN_SUMMARY}[view]
        fn = _raman_rows
    elif mode == "phase":
        header = _phase_header(spec) if view == "profiles" else _PHASE_SUMMARY
        fn = _phase_rows
    else:
        header, fn = _READOUT, _readout_rows
    chunks = _map(lambda B: fn(spec, float(B), cfg, view), fields, ns.threads)
    rows = [row for chunk in chunks for row in chunk]
    emit(render_table(header, rows, ns.format or "csv"), ns, cfg, f"scan {mode}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, ns) -> int:
    spec = builtin_spec(cfg.spec)
    fc = FieldConfig(cfg.B, cfg.detuning_MHz * MHZ, cfg.rabi_MHz * MHZ)
    rep = validate_effective(spec, fc, cfg.transition, cfg.periods, thresholds=cfg.thresholds())
    out = {
        "spec": spec.label,
        "B_gauss": rep.B,
        "detuning_MHz": rep.detuning / MHZ,
        "rabi_MHz": rep.rabi / MHZ,
        "transition": describe_transition(rep.transition),
        "theta_star_rad": rep.theta_star,
        "fitted_flip_frequency_kHz": rep.fitted_frequency / KHZ,
        "raman_rabi_kHz": rep.raman_rabi / KHZ,
        "relative_deviation": rep.relative_deviation,
        "max_p_excited": rep.max_p_excited,
        "max_leakage": rep.max_leakage,
        "max_target_population": rep.max_target_population,
        "max_p_excited_full_window": rep.max_p_excited_window,
        "max_leakage_full_window": rep.max_leakage_window,
        "fit_periods": rep.periods,
        "n_scattered_estimate": rep.n_scattered,
        "leakage_estimate": rep.extra["leakage_estimate"],
        "p_excited_bound": rep.extra["p_excited_bound"],
        "verdict": "pass" if rep.verdict else "fail",
    }
    emit(render_record(out, ns.format), ns, cfg, "validate")
    return EXIT_OK if rep.verdict else EXIT_INFEASIBLE


def universality_report(cfg: RunConfig) -> dict:
    spec = builtin_spec(cfg.spec)
    th = cfg.thresholds()
    det = None if cfg.detuning_grid_MHz is None else np.array(cfg.detuning_grid_MHz) * MHZ
    rab = None if cfg.rabi_grid_MHz is None else np.array(cfg.rabi_grid_MHz) * MHZ
    flips, phases = control_points_from_scan(spec, cfg.B, det, rab, p_max=cfg.p_max,
                                             thresholds=th,
                                             phase_detunings=default_phase_detunings(spec, cfg.B))
    cs = build_control_set(spec, cfg.B, flips, phases, th)
    rep = lie_closure(cs.generators)
    h_phi = cs.phase_generators[0]
    gaps = check_distinct_gaps(h_phi)
    isolation = []
    for gen, fp in zip(cs.generators, flips):
        j = transition_pair(spec, fp.transition)
        x = isolate_coupling(gen, h_phi, j)
        target = abs(x[j, j + 1])
        off = x.copy()
        off[j, j + 1] = off[j + 1, j] = 0
        isolation.append({"pair": j, "transition": describe_transition(fp.transition),
                          "coupling_kHz": target / KHZ,
                          "relative_off_target": float(np.abs(off).max() / target)})
    return {
        "spec": spec.label,
        "B_gauss": cfg.B,
        **rep.as_dict(),
        "full_rank": rep.dimension == rep.max_dimension,
        "generators": cs.tags,
        "operating_points": cs.metadata,
        "phase_gaps_kHz": (gaps / KHZ).tolist(),
        "isolation": isolation,
    }


def cmd_universality(cfg: RunConfig, ns) -> int:
    rep = universality_report(cfg)
    emit(render_json(rep), ns, cfg, "universality")
    return EXIT_OK if rep["full_rank"] else EXIT_INFEASIBLE


_CONVERSIONS = {
    # direction: (input unit, output unit)
    "rabi-to-intensity": ("MHz", "W/cm^2"),
    "intensity-to-rabi": ("W/cm^2", "MHz"),
    "intensity-to-power": ("W/cm^2", "uW"),
    "power-to-intensity": ("uW", "W/cm^2"),
    "rabi-to-power": ("MHz", "uW"),
}


def convert(spec, value: float, direction: str, waist_um: float | None = None) -> float:
    needs_waist = "power" in direction
    if needs_waist and not (waist_um and waist_um > 0):
        raise ConfigError(f"{direction} needs a positive --waist-um")
    w = (waist_um or 0.0) * 1e-6
    if direction == "rabi-to-intensity":
        return rabi_to_intensity(spec, value * MHZ)
    if direction == "intensity-to-rabi":
        return intensity_to_rabi(spec, value) / MHZ
    if direction == "intensity-to-power":
        return power_for_waist(value, w) * 1e6
    if direction == "power-to-intensity":
        return intensity_for_power(value * 1e-6, w)
    if direction == "rabi-to-power":
        return power_for_waist(rabi_to_intensity(spec, value * MHZ), w) * 1e6
    raise ConfigError(f"unknown direction {direction!r}")


def cmd_convert(cfg: RunConfig, ns) -> int:
    spec = builtin_spec(cfg.spec)
    if ns.value < 0:
        raise ConfigError("value must be non-negative")
    out = convert(spec, ns.value, ns.direction, ns.waist_um)
    unit_in, unit_out = _CONVERSIONS[ns.direction]
    header = ["input", "input_unit", "output", "output_unit"]
    emit(render_table(header, [(ns.value, unit_in, out, unit_out)], ns.format or "csv"),
         ns, cfg, "convert")
    return EXIT_OK


def cmd_constants(cfg: RunConfig, ns) -> int:
    emit(render_json(constants_document(builtin_spec(cfg.spec))), ns, cfg, "constants")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--spec", help="transition: " + ", ".join(sorted(BUILTIN_SPECS)))
    p.add_argument("--config", help="key=value config file with [section] headers")
    p.add_argument("--out", help="output path (default stdout); adds <out>.meta.json")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--threads", type=int, default=1, help="worker threads (speed only)")
    return p


def _point_flags(p):
    p.add_argument("--B", type=float, help="field (G)")
    p.add_argument("--detuning-mhz", type=float, help="laser detuning Delta/2pi (MHz)")
    p.add_argument("--rabi-mhz", type=float, help="electronic Rabi frequency/2pi (MHz)")
    p.add_argument("--transition", help="lower m_I of the flip, e.g. -1/2")


def _threshold_flags(p):
    p.add_argument("--p-max", type=float)
    p.add_argument("--leak-max", type=float)
    p.add_argument("--delta-floor-mhz", type=float)


def _grid_flags(p):
    p.add_argument("--b-grid", help="fields (G): start:stop:step or list")
    p.add_argument("--detuning-grid-mhz", help="absolute detunings (MHz)")
    p.add_argument("--rabi-grid-mhz", help="electronic Rabi frequencies (MHz)")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="ybqudit", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("breit-rabi", parents=[common], help="tracked level energies vs field")
    p.add_argument("--b-grid", help="fields (G), default 0:2000:10")
    p.set_defaults(func=cmd_breit_rabi)

    p = sub.add_parser("magic-angle", parents=[common], help="magic angle and feasibility at a point")
    _point_flags(p)
    _threshold_flags(p)
    p.set_defaults(func=cmd_magic_angle)

    p = sub.add_parser("scan", parents=[common], help="raman, phase or readout scans")
    p.add_argument("mode", choices=("raman", "phase", "readout"))
    _grid_flags(p)
    _threshold_flags(p)
    p.add_argument("--B", type=float, help="single field (G) when no grid is given")
    p.add_argument("--view", help="raman: cells|map|summary; phase: profiles|summary")
    p.add_argument("--side", choices=("upper", "lower"), help="readout stretched state")
    p.add_argument("--probe-detuning-mhz", type=float)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("validate", parents=[common], help="full 24-level check of a flip")
    _point_flags(p)
    _threshold_flags(p)
    p.add_argument("--periods", type=float, help="fit window in flops (>= 3)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("universality", parents=[common], help="Lie closure of a real control set")
    p.add_argument("--B", type=float)
    _grid_flags(p)
    _threshold_flags(p)
    p.set_defaults(func=cmd_universality)

    p = sub.add_parser("convert", parents=[common], help="Rabi frequency, intensity, power")
    p.add_argument("value", type=float)
    p.add_argument("--direction", required=True, choices=sorted(_CONVERSIONS))
    p.add_argument("--waist-um", type=float, help="Gaussian waist (um) for power conversions")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("constants", parents=[common], help="spec constants as JSON")
    p.set_defaults(func=cmd_constants)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = load_config(ns.config)
        cfg = _apply_flags(cfg, ns)
        if ns.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return ns.func(cfg, ns)
    except (ConfigError, ValueError) as exc:
        print(f"ybqudit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasiblePoint as exc:
        print(f"ybqudit: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except YbQuditError as exc:
        print(f"ybqudit: physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
