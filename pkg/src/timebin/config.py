"""Scenario configuration: TOML in, validated dataclass out, TOML back out.

A scenario file has sections

    [source]    type = "lindblad" | "wavepacket", rates, bin separation,
                pulse tables (lindblad) or bin amplitudes (wavepacket)
    [phases]    analyzer scans: lists of radians, or {start, stop, count}
                tables expanded like linspace with the endpoint excluded
                (the scans are 2pi-periodic)
    [grid]      numerical resolution knobs
    [outputs]   which artifact files to write (default: all)

plus top-level `seed` and `threads`.  All quantities are in natural units
(the exciton decay rate is the unit rate; times in units of its inverse).
Amplitudes may be reals or [re, im] pairs; a non-normalized amplitude
vector is renormalized with a warning.  `resolved_toml` writes the fully
defaulted scenario back out; re-parsing it reproduces the same scenario,
which is what makes reruns reproducible from the emitted artifact alone.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

import numpy as np

from .emitter import EmitterModel, Pulse
from .linalg import DataError
from .wavepacket import SinglePhotonState, WavepacketState


class ConfigError(ValueError):
    """Bad scenario file; the message names the offending field."""


_SOURCE_TYPES = ("lindblad", "wavepacket")
_SINGLE_OUTPUTS = ("peaks.csv", "rho1q.json", "visibility.json")
_PAIR_OUTPUTS = (
    "rho2q.json",
    "stokes.csv",
    "peaks3x3.csv",
    "center_scan.csv",
    "concurrence.json",
    "histogram.csv",
    "projection.csv",
)
_PULSE_KEYS = {"center", "area", "width", "envelope", "phase", "target"}


def _default_scan():
    return tuple(2.0 * math.pi * k / 12 for k in range(12))


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully resolved scenario (source + scans + grid + outputs)."""

    source_type: str = "lindblad"
    bin_separation: float = 10.0
    gamma_b: float = 2.0
    gamma_x: float = 1.0
    initial_state: str = "G"
    pulses: tuple = ()  # Pulse instances (lindblad sources)
    amplitudes: tuple = ()  # complex bin amplitudes (wavepacket sources)
    phi_scan: tuple = field(default_factory=_default_scan)
    phi_b_scan: tuple = field(default_factory=_default_scan)
    phi_x_scan: tuple = field(default_factory=_default_scan)
    histogram_phases: tuple = (0.0, 0.0)
    grid_density: int = 600
    quad_points_per_bin: object = None
    resolution: object = None  # histogram cell size; None -> T/60
    outputs: object = None  # tuple of artifact names, or None for all
    seed: int = 0
    threads: object = None

    def __post_init__(self):
        if self.source_type not in _SOURCE_TYPES:
            raise ConfigError(
                f"source.type must be one of {_SOURCE_TYPES}, got {self.source_type!r}"
            )
        for name in ("bin_separation", "gamma_b", "gamma_x"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and val > 0):
                raise ConfigError(f"source.{name} must be positive, got {val!r}")
        if self.grid_density < 1:
            raise ConfigError(f"grid.grid_density must be >= 1, got {self.grid_density}")
        if self.quad_points_per_bin is not None and self.quad_points_per_bin < 1:
            raise ConfigError(
                f"grid.quad_points_per_bin must be >= 1, got {self.quad_points_per_bin}"
            )
        if self.resolution is not None and not self.resolution > 0:
            raise ConfigError(f"grid.resolution must be positive, got {self.resolution}")
        if len(self.histogram_phases) != 2:
            raise ConfigError("phases.histogram must be the two radians [phi_B, phi_X]")
        for name in ("phi_scan", "phi_b_scan", "phi_x_scan"):
            if len(getattr(self, name)) < 3:
                raise ConfigError(f"phases.{name[:-5]} needs at least 3 values for the fits")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.source_type == "wavepacket" and not self.amplitudes:
            raise ConfigError("source.amplitudes is required for wavepacket sources")
        if self.source_type == "wavepacket" and len(self.amplitudes) not in (2, 4):
            raise ConfigError(
                "source.amplitudes must have 2 entries (single photon) or 4 (pair), "
                f"got {len(self.amplitudes)}"
            )
        if self.source_type == "lindblad" and self.amplitudes:
            raise ConfigError("source.amplitudes only applies to wavepacket sources")
        if self.source_type == "wavepacket" and self.pulses:
            raise ConfigError("source.pulses only applies to lindblad sources")
        if self.outputs is not None:
            known = set(_SINGLE_OUTPUTS) | set(_PAIR_OUTPUTS)
            bad = [o for o in self.outputs if o not in known]
            if bad:
                raise ConfigError(f"outputs.files contains unknown artifacts {bad}")

    # -- source construction ------------------------------------------------

    def build_single_source(self):
        if self.source_type == "wavepacket":
            if len(self.amplitudes) != 2:
                raise ConfigError(
                    "single-photon scenario needs source.amplitudes = [alpha_E, alpha_L]"
                )
            return SinglePhotonState(
                self.amplitudes, gamma=self.gamma_x, bin_separation=self.bin_separation
            )
        return self._emitter()

    def build_pair_source(self):
        if self.source_type == "wavepacket":
            if len(self.amplitudes) != 4:
                raise ConfigError(
                    "pair scenario needs source.amplitudes = [EE, EL, LE, LL]"
                )
            return WavepacketState(
                self.amplitudes,
                gamma_b=self.gamma_b,
                gamma_x=self.gamma_x,
                bin_separation=self.bin_separation,
            )
        return self._emitter()

    def _emitter(self) -> EmitterModel:
        return EmitterModel.cascade(
            gamma_b=self.gamma_b,
            gamma_x=self.gamma_x,
            pulses=self.pulses,
            initial_state=self.initial_state,
        )

    def wanted(self, name: str) -> bool:
        return self.outputs is None or name in self.outputs


# ---------------------------------------------------------------------------
# parsing


def _as_float(raw, where: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{where} must be a number, got {raw!r}")
    return float(raw)


def _as_complex(raw, where: str) -> complex:
    """A number, or a [re, im] pair."""
    if isinstance(raw, (list, tuple)):
        if len(raw) != 2:
            raise ConfigError(f"{where} must be a number or [re, im], got {raw!r}")
        return complex(_as_float(raw[0], where), _as_float(raw[1], where))
    return complex(_as_float(raw, where))


def _as_scan(raw, where: str) -> tuple:
    """A list of radians, or {start, stop, count} with the endpoint excluded."""
    if isinstance(raw, dict):
        extra = set(raw) - {"start", "stop", "count"}
        if extra:
            raise ConfigError(f"{where} has unknown keys {sorted(extra)}")
        try:
            start = _as_float(raw["start"], f"{where}.start")
            stop = _as_float(raw["stop"], f"{where}.stop")
            count = raw["count"]
        except KeyError as missing:
            raise ConfigError(f"{where} needs start, stop and count") from None
        if not isinstance(count, int) or count < 1:
            raise ConfigError(f"{where}.count must be a positive integer, got {count!r}")
        return tuple(float(v) for v in np.linspace(start, stop, count, endpoint=False))
    if isinstance(raw, (list, tuple)):
        return tuple(_as_float(v, where) for v in raw)
    raise ConfigError(f"{where} must be a list or a start/stop/count table")


def _parse_pulse(raw: dict, where: str) -> Pulse:
    extra = set(raw) - _PULSE_KEYS
    if extra:
        raise ConfigError(f"{where} has unknown keys {sorted(extra)}")
    for req in ("center", "area", "width"):
        if req not in raw:
            raise ConfigError(f"{where}.{req} is required")
    try:
        return Pulse(
            center=_as_float(raw["center"], f"{where}.center"),
            area=_as_float(raw["area"], f"{where}.area"),
            width=_as_float(raw["width"], f"{where}.width"),
            envelope=raw.get("envelope", "rectangular"),
            phase=_as_float(raw.get("phase", 0.0), f"{where}.phase"),
            target_transition=raw.get("target", "GB"),
        )
    except DataError as err:
        raise ConfigError(f"{where}: {err}") from None


def parse_config(text: str) -> ScenarioConfig:
    """Parse scenario TOML text.  Raises ConfigError naming the bad field;
    syntax errors keep tomllib's line/column message."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"TOML syntax: {err}") from None

    known_top = {"source", "phases", "grid", "outputs", "seed", "threads"}
    extra = set(doc) - known_top
    if extra:
        raise ConfigError(f"unknown top-level sections/keys {sorted(extra)}")

    src = doc.get("source", {})
    phases = doc.get("phases", {})
    grid = doc.get("grid", {})
    outputs = doc.get("outputs", {})
    kw = {}

    if "type" in src:
        kw["source_type"] = src["type"]
    for toml_key, attr in (
        ("bin_separation", "bin_separation"),
        ("gamma_b", "gamma_b"),
        ("gamma_x", "gamma_x"),
    ):
        if toml_key in src:
            kw[attr] = _as_float(src[toml_key], f"source.{toml_key}")
    if "initial_state" in src:
        kw["initial_state"] = src["initial_state"]
    if "pulses" in src:
        if not isinstance(src["pulses"], list):
            raise ConfigError("source.pulses must be an array of tables")
        kw["pulses"] = tuple(
            _parse_pulse(p, f"source.pulses[{i}]") for i, p in enumerate(src["pulses"])
        )
    if "amplitudes" in src:
        raw = src["amplitudes"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError("source.amplitudes must be a non-empty list")
        amps = np.array(
            [_as_complex(a, f"source.amplitudes[{i}]") for i, a in enumerate(raw)]
        )
        norm = float(np.sum(np.abs(amps) ** 2))
        if norm <= 0.0:
            raise ConfigError("source.amplitudes must not all vanish")
        if abs(norm - 1.0) > 1e-12:
            warnings.warn(
                f"source.amplitudes renormalized (sum |alpha|^2 was {norm:.6g})",
                stacklevel=2,
            )
            amps = amps / math.sqrt(norm)
        kw["amplitudes"] = tuple(complex(a) for a in amps)
    extra = set(src) - {
        "type", "bin_separation", "gamma_b", "gamma_x", "initial_state",
        "pulses", "amplitudes",
    }
    if extra:
        raise ConfigError(f"source has unknown keys {sorted(extra)}")

    for toml_key, attr in (
        ("phi", "phi_scan"),
        ("phi_b", "phi_b_scan"),
        ("phi_x", "phi_x_scan"),
    ):
        if toml_key in phases:
            kw[attr] = _as_scan(phases[toml_key], f"phases.{toml_key}")
    if "histogram" in phases:
        raw = phases["histogram"]
        if not isinstance(raw, list) or len(raw) != 2:
            raise ConfigError("phases.histogram must be the two radians [phi_B, phi_X]")
        kw["histogram_phases"] = tuple(
            _as_float(v, "phases.histogram") for v in raw
        )
    extra = set(phases) - {"phi", "phi_b", "phi_x", "histogram"}
    if extra:
        raise ConfigError(f"phases has unknown keys {sorted(extra)}")

    if "grid_density" in grid:
        if not isinstance(grid["grid_density"], int):
            raise ConfigError("grid.grid_density must be an integer")
        kw["grid_density"] = grid["grid_density"]
    if "quad_points_per_bin" in grid:
        if not isinstance(grid["quad_points_per_bin"], int):
            raise ConfigError("grid.quad_points_per_bin must be an integer")
        kw["quad_points_per_bin"] = grid["quad_points_per_bin"]
    if "resolution" in grid:
        kw["resolution"] = _as_float(grid["resolution"], "grid.resolution")
    extra = set(grid) - {"grid_density", "quad_points_per_bin", "resolution"}
    if extra:
        raise ConfigError(f"grid has unknown keys {sorted(extra)}")

    if "files" in outputs:
        if not isinstance(outputs["files"], list):
            raise ConfigError("outputs.files must be a list of artifact names")
        kw["outputs"] = tuple(outputs["files"])
    extra = set(outputs) - {"files"}
    if extra:
        raise ConfigError(f"outputs has unknown keys {sorted(extra)}")

    if "seed" in doc:
        if not isinstance(doc["seed"], int):
            raise ConfigError(f"seed must be an integer, got {doc['seed']!r}")
        kw["seed"] = doc["seed"]
    if "threads" in doc:
        if not isinstance(doc["threads"], int):
            raise ConfigError(f"threads must be an integer, got {doc['threads']!r}")
        kw["threads"] = doc["threads"]

    return ScenarioConfig(**kw)


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# resolved-config emission


def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(float(v))  # builtin-float repr round-trips exactly
    if isinstance(v, complex):
        return f"[{float(v.real)!r}, {float(v.imag)!r}]"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise DataError(f"cannot emit {type(v).__name__} to TOML")


def _toml_list(vals) -> str:
    return "[" + ", ".join(_toml_scalar(v) for v in vals) + "]"


def resolved_toml(cfg: ScenarioConfig) -> str:
    """The scenario with every default filled in, as TOML text.

    parse_config(resolved_toml(cfg)) == cfg, so a rerun from the emitted
    file reproduces the run exactly.
    """
    lines = [f"seed = {cfg.seed}"]
    if cfg.threads is not None:
        lines.append(f"threads = {cfg.threads}")
    lines += [
        "",
        "[source]",
        f'type = {_toml_scalar(cfg.source_type)}',
        f"bin_separation = {_toml_scalar(cfg.bin_separation)}",
        f"gamma_b = {_toml_scalar(cfg.gamma_b)}",
        f"gamma_x = {_toml_scalar(cfg.gamma_x)}",
    ]
    if cfg.source_type == "lindblad":
        lines.append(f"initial_state = {_toml_scalar(cfg.initial_state)}")
    else:
        lines.append(f"amplitudes = {_toml_list(cfg.amplitudes)}")
    lines += [
        "",
        "[phases]",
        f"phi = {_toml_list(cfg.phi_scan)}",
        f"phi_b = {_toml_list(cfg.phi_b_scan)}",
        f"phi_x = {_toml_list(cfg.phi_x_scan)}",
        f"histogram = {_toml_list(cfg.histogram_phases)}",
        "",
        "[grid]",
        f"grid_density = {cfg.grid_density}",
    ]
    if cfg.quad_points_per_bin is not None:
        lines.append(f"quad_points_per_bin = {cfg.quad_points_per_bin}")
    if cfg.resolution is not None:
        lines.append(f"resolution = {_toml_scalar(float(cfg.resolution))}")
    if cfg.outputs is not None:
        lines += ["", "[outputs]", f"files = {_toml_list(cfg.outputs)}"]
    for i, p in enumerate(cfg.pulses):
        lines += [
            "",
            "[[source.pulses]]",
            f"center = {_toml_scalar(p.center)}",
            f"area = {_toml_scalar(p.area)}",
            f"width = {_toml_scalar(p.width)}",
            f"envelope = {_toml_scalar(p.envelope)}",
            f"phase = {_toml_scalar(p.phase)}",
            f"target = {_toml_scalar(p.target_transition)}",
        ]
    return "\n".join(lines) + "\n"
