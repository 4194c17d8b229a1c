"""Experiment configuration: a single TOML document with GHz/ps/ns units
at the boundary, converted once into the validated domain objects."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from .comb import CombSpec, PumpSpec
from .counting import DetectorModel
from .errors import ConfigError
from .modulation import ModulationSpec
from .units import ghz_to_angular

_MODES = ("cw-auto", "pulsed-auto", "cross")

_SECTION_KEYS = {
    "comb": {
        "fsr_ghz",
        "linewidth_ghz",
        "dimension",
        "first_bin",
        "pump_center_ghz",
    },
    "pump": {"kind", "bandwidth_ghz", "duration_ps", "rep_period_ns"},
    "modulation": {"rf_ghz", "index", "center_bin", "filter_halfwidth_ghz"},
    "detector": {"jitter_ps", "bin_ps", "efficiency", "accidental_rate_hz"},
    "run": {"acq_s", "pair_rate", "brightness", "car", "seed"},
}

_ROOT_KEYS = {"mode", "phase"} | set(_SECTION_KEYS)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, unit-converted experiment description."""

    mode: str
    comb: CombSpec
    pump: PumpSpec
    detector: DetectorModel
    acq_time: float
    seed: int
    modulation: ModulationSpec | None = None
    pair_rate: float | None = None
    brightness: float | None = None
    car: float | None = None
    phases: tuple | None = None

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.acq_time <= 0:
            raise ConfigError(f"run.acq_s must be > 0, got {self.acq_time}")
        if self.mode == "cross" and not self.phases:
            raise ConfigError("cross mode needs a nonempty phase list")
        if self.mode == "pulsed-auto" and not self.pump.is_pulsed:
            raise ConfigError("pulsed-auto mode needs a pulsed pump")


def _check_keys(section: str, table: dict, allowed: set):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(
            f"[{section}] unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}"
        )


def _need(section: str, table: dict, key: str):
    if key not in table:
        raise ConfigError(f"[{section}] missing required key {key!r}")
    return table[key]


def _build_comb(table: dict) -> CombSpec:
    _check_keys("comb", table, _SECTION_KEYS["comb"])
    try:
        return CombSpec(
            fsr_angular=ghz_to_angular(_need("comb", table, "fsr_ghz")),
            linewidth_angular=ghz_to_angular(_need("comb", table, "linewidth_ghz")),
            dimension=int(_need("comb", table, "dimension")),
            first_bin=int(table.get("first_bin", 1)),
            pump_center_angular=ghz_to_angular(table.get("pump_center_ghz", 0.0)),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[comb] {exc}") from exc


def _build_pump(table: dict) -> PumpSpec:
    _check_keys("pump", table, _SECTION_KEYS["pump"])
    kind = table.get("kind", "cw")
    rep = table.get("rep_period_ns")
    rep_s = float(rep) * 1e-9 if rep is not None else None
    try:
        if kind == "cw":
            if rep is not None or "bandwidth_ghz" in table or "duration_ps" in table:
                raise ValueError("cw pumps take no bandwidth, duration, or period")
            return PumpSpec.cw()
        if kind == "gaussian":
            if rep_s is None:
                raise ValueError("gaussian pulsed pumps need rep_period_ns")
            return PumpSpec.gaussian_pulse(
                ghz_to_angular(_need("pump", table, "bandwidth_ghz")), rep_s
            )
        if kind == "rectangular":
            if rep_s is None:
                raise ValueError("rectangular pulsed pumps need rep_period_ns")
            return PumpSpec.rectangular_pulse(
                float(_need("pump", table, "duration_ps")) * 1e-12, rep_s
            )
        raise ValueError(f"unknown pump kind {kind!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[pump] {exc}") from exc


def _build_modulation(table: dict) -> ModulationSpec:
    _check_keys("modulation", table, _SECTION_KEYS["modulation"])
    try:
        return ModulationSpec(
            rf_angular=ghz_to_angular(_need("modulation", table, "rf_ghz")),
            index=float(_need("modulation", table, "index")),
            center_bin=int(_need("modulation", table, "center_bin")),
            filter_halfwidth=ghz_to_angular(
                _need("modulation", table, "filter_halfwidth_ghz")
            ),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[modulation] {exc}") from exc


def _build_detector(table: dict) -> DetectorModel:
    _check_keys("detector", table, _SECTION_KEYS["detector"])
    try:
        return DetectorModel(
            jitter_fwhm=float(_need("detector", table, "jitter_ps")) * 1e-12,
            bin_width=float(_need("detector", table, "bin_ps")) * 1e-12,
            efficiency=float(table.get("efficiency", 1.0)),
            accidental_rate=float(table.get("accidental_rate_hz", 0.0)),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[detector] {exc}") from exc


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be a table")
    unknown = set(doc) - _ROOT_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    mode = doc.get("mode")
    if mode is None:
        raise ConfigError("missing top-level 'mode'")

    comb = _build_comb(doc.get("comb", {}) or {})
    pump = _build_pump(doc.get("pump", {}) or {})
    detector = _build_detector(doc.get("detector", {}) or {})
    modulation = None
    if "modulation" in doc:
        modulation = _build_modulation(doc["modulation"])

    run = doc.get("run", {}) or {}
    _check_keys("run", run, _SECTION_KEYS["run"])
    acq = float(_need("run", run, "acq_s"))
    seed = int(run.get("seed", 0))
    pair_rate = run.get("pair_rate")
    brightness = run.get("brightness")
    car = run.get("car")

    phases = doc.get("phase")
    if phases is not None:
        phases = tuple(float(p) for p in np.atleast_1d(phases))

    return ExperimentConfig(
        mode=mode,
        comb=comb,
        pump=pump,
        detector=detector,
        acq_time=acq,
        seed=seed,
        modulation=modulation,
        pair_rate=float(pair_rate) if pair_rate is not None else None,
        brightness=float(brightness) if brightness is not None else None,
        car=float(car) if car is not None else None,
        phases=phases,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    cfg = config_from_dict(doc)
    if not math.isfinite(cfg.acq_time):
        raise ConfigError("run.acq_s must be finite")
    return cfg
