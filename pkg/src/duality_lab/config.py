"""Flat ``key = value`` config files (SI units) for the emission experiments."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .emission import EmissionConfig, ThinLensConfig
from .errors import ConfigError

LENS_KEYS = {
    "focal_length_m": "focal_length",
    "lens_radius_m": "lens_radius",
    "detector_width_m": "detector_width",
    "k0_per_m": "k0",
}
EMISSION_KEYS = {
    "gamma_per_s": "gamma",
    "omega_a_per_s": "omega_a",
    "time_s": "t",
}
BOOL_KEYS = {"perfect_lens"}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class ExperimentConfig:
    lens: ThinLensConfig
    emission: EmissionConfig | None
    perfect_lens: bool = False


def parse_text(text: str) -> dict[str, tuple[str, int]]:
    """Map key -> (raw value, line number). ``#`` starts a comment."""
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        if key not in LENS_KEYS and key not in EMISSION_KEYS and key not in BOOL_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first on line {entries[key][1]})", lineno)
        entries[key] = (value, lineno)
    return entries


def _number(entries, key) -> float:
    value, lineno = entries[key]
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {value!r}", lineno) from None


def _flag(entries, key) -> bool:
    if key not in entries:
        return False
    value, lineno = entries[key]
    if value.lower() in _TRUE:
        return True
    if value.lower() in _FALSE:
        return False
    raise ConfigError(f"{key}: not a boolean: {value!r}", lineno)


def _build(cls, entries, keys: dict[str, str]):
    values = {attr: _number(entries, key) for key, attr in keys.items() if key in entries}
    missing = [k for k in keys if k not in entries]
    if missing:
        raise ConfigError(f"missing key(s): {', '.join(missing)}")
    try:
        return cls(**values)
    except ValueError as exc:
        first = min(entries[k][1] for k in keys)
        raise ConfigError(str(exc), first) from None


def load_text(text: str) -> ExperimentConfig:
    """Lens keys are required; emission keys are all-or-nothing."""
    entries = parse_text(text)
    for key in entries:
        if key not in BOOL_KEYS:
            _number(entries, key)
    lens = _build(ThinLensConfig, entries, LENS_KEYS)
    emission = None
    if any(k in entries for k in EMISSION_KEYS):
        emission = _build(EmissionConfig, entries, EMISSION_KEYS)
    return ExperimentConfig(lens=lens, emission=emission, perfect_lens=_flag(entries, "perfect_lens"))


def load(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return load_text(text)
