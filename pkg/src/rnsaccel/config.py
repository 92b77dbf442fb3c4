"""Run configuration: one YAML document driving every CLI command.

Layout (all sections optional, all keys defaulted):

    engine:        mantissa_bits, group_size, k (integer or "auto"), rows,
                   units, mode (ideal|noisy), rounding, laser_power_margin,
                   seed
    timing:        t_clk_ns, t_prog_ns, digital_clock_ghz, interleave_factor,
                   laser_margin
    device:        any DeviceSpecs field
    noise:         any NoiseParams field
    converters:    any ConverterSpecs field
    digital:       any DigitalEnergies field
    area:          any AreaSpecs field
    workload:      preset (name) or path (JSON file), batch_size
    training:      dataset, hidden, epochs, batch_size, lr, n_samples,
                   val_fraction, twin_eval
    output:        dir

Every hardware constant is therefore overridable from the file; nothing
needs a code edit to re-run a sweep under different device assumptions.
Unknown keys raise ConfigError so typos cannot silently fall back to
defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .gemm import EngineConfig
from .perf import AcceleratorConfig, AreaSpecs, ConverterSpecs, DigitalEnergies
from .photonics import DeviceSpecs, NoiseParams
from .rns import min_k
from .workloads import WorkloadSpec, load_workload, preset_workload

__all__ = ["ConfigError", "RunConfig", "load_config"]


class ConfigError(Exception):
    """Bad or inconsistent run configuration (CLI exit code 2)."""


_SECTIONS = ("engine", "timing", "device", "noise", "converters", "digital",
             "area", "workload", "training", "output")

_ENGINE_KEYS = {"mantissa_bits", "group_size", "k", "rows", "units", "mode",
                "rounding", "laser_power_margin", "seed"}
_TIMING_KEYS = {"t_clk_ns", "t_prog_ns", "digital_clock_ghz",
                "interleave_factor", "laser_margin"}
_WORKLOAD_KEYS = {"preset", "path", "batch_size"}
_TRAINING_KEYS = {"dataset", "hidden", "epochs", "batch_size", "lr",
                  "n_samples", "val_fraction", "twin_eval"}
_OUTPUT_KEYS = {"dir"}


def _check_keys(section: str, data: dict, allowed: set):
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)} in section '{section}'; "
            f"allowed: {sorted(allowed)}")


def _build_dataclass(section: str, cls, data: dict):
    """Instantiate a spec dataclass from a config section, defaults filled."""
    allowed = {f.name for f in dataclasses.fields(cls)}
    _check_keys(section, data, allowed)
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"section '{section}': {e}") from e


@dataclass
class RunConfig:
    """Validated run configuration with typed accessors."""

    engine: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    device: DeviceSpecs = field(default_factory=DeviceSpecs)
    noise: NoiseParams = field(default_factory=NoiseParams)
    converters: ConverterSpecs = field(default_factory=ConverterSpecs)
    digital: DigitalEnergies = field(default_factory=DigitalEnergies)
    area: AreaSpecs = field(default_factory=AreaSpecs)
    workload_section: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    source: Path | None = None

    def __post_init__(self):
        _check_keys("engine", self.engine, _ENGINE_KEYS)
        _check_keys("timing", self.timing, _TIMING_KEYS)
        _check_keys("workload", self.workload_section, _WORKLOAD_KEYS)
        _check_keys("training", self.training, _TRAINING_KEYS)
        mode = self.engine.get("mode", "ideal")
        if mode not in ("ideal", "noisy"):
            raise ConfigError(f"engine.mode must be 'ideal' or 'noisy', got {mode!r}")
        k = self.engine.get("k", "auto")
        b = int(self.engine.get("mantissa_bits", 4))
        g = int(self.engine.get("group_size", 16))
        if k != "auto":
            if not isinstance(k, int):
                raise ConfigError(f"engine.k must be an integer or 'auto', got {k!r}")
            need = min_k(b, g)
            if k < need:
                raise ConfigError(
                    f"engine.k={k} is below the dynamic-range requirement for "
                    f"mantissa_bits={b}, group_size={g}; minimum is {need}")
        if "preset" in self.workload_section and "path" in self.workload_section:
            raise ConfigError("workload: give either 'preset' or 'path', not both")

    # -- typed accessors ----------------------------------------------------

    @property
    def mode(self) -> str:
        return self.engine.get("mode", "ideal")

    @property
    def seed(self) -> int:
        return int(self.engine.get("seed", 0))

    def resolved_k(self) -> int:
        k = self.engine.get("k", "auto")
        if k == "auto":
            return min_k(int(self.engine.get("mantissa_bits", 4)),
                         int(self.engine.get("group_size", 16)))
        return int(k)

    def engine_config(self) -> EngineConfig:
        try:
            return EngineConfig(
                mantissa_bits=int(self.engine.get("mantissa_bits", 4)),
                group_size=int(self.engine.get("group_size", 16)),
                k=self.resolved_k(),
                rows=int(self.engine.get("rows", 32)),
                rounding=self.engine.get("rounding", "truncate"),
                laser_power_margin=float(self.engine.get("laser_power_margin", 4.0)),
                device=self.device,
                noise=self.noise,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def accelerator_config(self) -> AcceleratorConfig:
        t = self.timing
        try:
            return AcceleratorConfig(
                units=int(self.engine.get("units", 8)),
                rows=int(self.engine.get("rows", 32)),
                group_size=int(self.engine.get("group_size", 16)),
                k=self.resolved_k(),
                mantissa_bits=int(self.engine.get("mantissa_bits", 4)),
                t_clk_ns=float(t.get("t_clk_ns", 0.1)),
                t_prog_ns=float(t.get("t_prog_ns", 5.0)),
                digital_clock_ghz=float(t.get("digital_clock_ghz", 1.0)),
                interleave_factor=int(t.get("interleave_factor", 10)),
                laser_margin=float(t.get("laser_margin", 1.0)),
                device=self.device,
                noise=self.noise,
                converters=self.converters,
                digital=self.digital,
                area=self.area,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def workload(self) -> WorkloadSpec:
        sec = self.workload_section
        batch = sec.get("batch_size")
        if "path" in sec:
            base = Path(sec["path"])
            if not base.is_absolute() and self.source is not None:
                base = self.source.parent / base
            try:
                w = load_workload(base)
            except Exception as e:
                raise ConfigError(f"workload file {base}: {e}") from e
            if batch is not None:
                w = WorkloadSpec(name=w.name, batch_size=int(batch), layers=w.layers)
            return w
        name = sec.get("preset", "alexnet")
        try:
            return preset_workload(name, batch_size=int(batch) if batch else 256)
        except ValueError as e:
            raise ConfigError(str(e)) from e


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a YAML config file; ``path=None`` gives the all-defaults config.

    ``overrides`` merges {section: {key: value}} on top of the file.
    """
    raw = {}
    src = None
    if path is not None:
        src = Path(path)
        try:
            text = src.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {src}: {e}") from e
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"invalid YAML in {src}: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")

    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}; "
                          f"allowed: {list(_SECTIONS)}")
    for name, sec in raw.items():
        if sec is not None and not isinstance(sec, dict):
            raise ConfigError(f"section '{name}' must be a mapping")

    merged = {name: dict(raw.get(name) or {}) for name in _SECTIONS}
    for name, sec in (overrides or {}).items():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown override section {name!r}")
        merged[name].update(sec)

    out = merged["output"]
    _check_keys("output", out, _OUTPUT_KEYS)
    return RunConfig(
        engine=merged["engine"],
        timing=merged["timing"],
        device=_build_dataclass("device", DeviceSpecs, merged["device"]),
        noise=_build_dataclass("noise", NoiseParams, merged["noise"]),
        converters=_build_dataclass("converters", ConverterSpecs, merged["converters"]),
        digital=_build_dataclass("digital", DigitalEnergies, merged["digital"]),
        area=_build_dataclass("area", AreaSpecs, merged["area"]),
        workload_section=merged["workload"],
        training=merged["training"],
        output_dir=Path(out.get("dir", "out")),
        source=src,
    )
