"""Run configuration: strict INI parsing and fully-resolved echoes.

One ``key = value`` file configures a whole run. Sections mirror the model
dataclasses (``[source]``, ``[apparatus]``, ``[temporal]``, ``[link]``,
``[sweep]``, ``[range]``), plus ``[output]`` and ``[run]`` for artifact
plumbing. Unknown sections or keys are rejected — misspelled physics must
fail loudly, not silently fall back to defaults. Every command writes a
fully-resolved echo of the configuration it ran with next to its outputs;
re-running from that echo reproduces the outputs byte for byte.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .link import ApparatusParams, LinkParams, SourceModel, TemporalProfile
from .sweep import SweepGrid

__all__ = [
    "ConfigError",
    "OutputSettings",
    "RangeSettings",
    "RunConfig",
    "load_config",
    "parse_config",
    "render_config",
]


class ConfigError(ValueError):
    """Raised for unknown keys/sections or unparseable values."""


@dataclass(frozen=True)
class RangeSettings:
    """Attenuation-scan axis and mode (mirrors the range operation)."""

    alpha_min_db: float = 0.0
    alpha_max_db: float = 65.0
    alpha_step_db: float = 1.0
    dimensions: tuple[int, ...] = (2, 3)
    reoptimize: str = "none"

    def __post_init__(self) -> None:
        if self.alpha_step_db <= 0.0:
            raise ConfigError(
                f"alpha step must be positive, got {self.alpha_step_db}"
            )
        if self.alpha_max_db <= self.alpha_min_db:
            raise ConfigError("alpha range is empty")
        if self.reoptimize not in ("none", "window", "full"):
            raise ConfigError(f"unknown reoptimize mode {self.reoptimize!r}")
        if not self.dimensions or any(not 2 <= d <= 5 for d in self.dimensions):
            raise ConfigError(f"dimensions must lie in 2..5, got {self.dimensions}")

    def alphas(self) -> np.ndarray:
        n = int(round((self.alpha_max_db - self.alpha_min_db) / self.alpha_step_db))
        return self.alpha_min_db + self.alpha_step_db * np.arange(n + 1)


@dataclass(frozen=True)
class OutputSettings:
    """Where and how results are written."""

    directory: str = "."
    format: str = "csv"
    figures: bool = True

    def __post_init__(self) -> None:
        if self.format not in ("csv", "json"):
            raise ConfigError(f"output format must be csv or json, got {self.format!r}")


@dataclass(frozen=True)
class RunConfig:
    """Everything one command run depends on, fully resolved."""

    source: SourceModel = SourceModel()
    apparatus: ApparatusParams = ApparatusParams()
    temporal: TemporalProfile = TemporalProfile()
    link: LinkParams = LinkParams()
    sweep: SweepGrid = SweepGrid()
    range: RangeSettings = RangeSettings()
    output: OutputSettings = OutputSettings()
    seed: int = 20260822
    dwell_s: float = 1.0
    workers: int = 1


# section name -> (dataclass, RunConfig attribute)
_SECTIONS = {
    "source": (SourceModel, "source"),
    "apparatus": (ApparatusParams, "apparatus"),
    "temporal": (TemporalProfile, "temporal"),
    "link": (LinkParams, "link"),
    "sweep": (SweepGrid, "sweep"),
    "range": (RangeSettings, "range"),
    "output": (OutputSettings, "output"),
}
_RUN_KEYS = ("seed", "dwell_s", "workers")

_BOOL_STRINGS = {
    "true": True, "yes": True, "on": True, "1": True,
    "false": False, "no": False, "off": False, "0": False,
}


def _parse_value(raw: str, kind, where: str):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() not in _BOOL_STRINGS:
                raise ValueError(raw)
            return _BOOL_STRINGS[raw.lower()]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind == tuple[int, ...]:
            return tuple(int(p) for p in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from exc
    raise ConfigError(f"{where}: unsupported option type {kind!r}")


def parse_config(text: str) -> RunConfig:
    """Parse INI text into a RunConfig, rejecting anything unknown."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    kwargs = {}
    for section in parser.sections():
        if section == "run":
            for key, raw in parser.items("run"):
                if key not in _RUN_KEYS:
                    raise ConfigError(f"unknown key [run] {key}")
                kind = {"seed": int, "dwell_s": float, "workers": int}[key]
                kwargs[key] = _parse_value(raw, kind, f"[run] {key}")
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        cls, attr = _SECTIONS[section]
        known = _FIELD_TYPES[cls]
        values = {}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key [{section}] {key}")
            values[key] = _parse_value(raw, known[key], f"[{section}] {key}")
        try:
            kwargs[attr] = cls(**values)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"[{section}]: {exc}") from exc
    try:
        return RunConfig(**kwargs)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(str(exc)) from exc


# Concrete python types per dataclass field (annotations are strings under
# `from __future__ import annotations`, so they are recorded here once).
_FIELD_TYPES: dict[type, dict[str, object]] = {
    SourceModel: {
        "brightness": float, "linewidth_ghz": float,
        "saturation_power_mw": float, "saturation_exponent": float,
    },
    ApparatusParams: {
        "loss_per_user_db": float, "x_basis_extra_loss_db": float,
        "detector_efficiency": float, "dark_count_rate_hz": float,
        "rf_frequency_ghz": float, "modulation_index": float,
        "duty_cycle": float, "x_infidelity_d4": float, "x_infidelity_d5": float,
    },
    TemporalProfile: {"gaussian_sigma_ps": float, "lorentzian_gamma_ps": float},
    LinkParams: {
        "power_on_chip_mw": float, "coincidence_window_ps": float,
        "applied_attenuation_db": float, "dimension": int,
        "integration_time_s": float,
    },
    SweepGrid: {
        "power_min_mw": float, "power_max_mw": float, "power_step_mw": float,
        "window_min_ps": float, "window_max_ps": float, "window_step_ps": float,
    },
    RangeSettings: {
        "alpha_min_db": float, "alpha_max_db": float, "alpha_step_db": float,
        "dimensions": tuple[int, ...], "reoptimize": str,
    },
    OutputSettings: {"directory": str, "format": str, "figures": bool},
}


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(cfg: RunConfig) -> str:
    """Fully-resolved INI echo; parsing it back reproduces ``cfg`` exactly."""
    out = io.StringIO()
    for section, (cls, attr) in _SECTIONS.items():
        obj = getattr(cfg, attr)
        out.write(f"[{section}]\n")
        for f in fields(cls):
            out.write(f"{f.name} = {_format_value(getattr(obj, f.name))}\n")
        out.write("\n")
    out.write("[run]\n")
    for key in _RUN_KEYS:
        out.write(f"{key} = {_format_value(getattr(cfg, key))}\n")
    return out.getvalue()
