"""Experiment configuration: flat ``section.key = value`` text files.

Example::

    # comments start with '#'
    source.excitation_prob = 0.06
    timing.pulse_sigma_ps = 12
    run.seed = 7

Unknown keys, malformed lines and out-of-range values raise
:class:`ConfigError` carrying the line number and the dotted field name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .analyzer import AnalyzerConfig, Timing
from .dynamics import DephasingModel, LevelSystem
from .source import SourceConfig

U64_MAX = (1 << 64) - 1


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(key)
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


@dataclass
class RunSection:
    seed: int = 0
    n_pulses: int = 1_000_000
    shard_pulses: int = 1 << 18


@dataclass
class SourceSection:
    excitation_prob: float = 0.06
    pump_phase: float = 0.0
    scheme: str = "metastable"
    coherence_factor: float = 1.0
    early_late_imbalance: float = 0.0
    incoherent_pump: bool = False


@dataclass
class AnalyzerSection:
    phase: float = 0.0
    r1: float = 0.5
    r2: float = 0.5
    mode: str = "beamsplitter"
    arm_transmission_short: float = 1.0
    arm_transmission_long: float = 1.0


@dataclass
class TimingSection:
    rep_period_ps: int = 12500
    pulse_sigma_ps: float = 12.0
    delay_ps: int = 3336
    jitter_ps: float = 20.0
    window_ps: float = 100.0
    detector_efficiency: float = 1.0


@dataclass
class DynamicsSection:
    # lifetimes are illustrative values, not measured ones
    biexciton_lifetime_ps: float = 400.0
    exciton_lifetime_ps: float = 600.0
    fss: float = 0.0
    dephasing_rate: float = 0.0
    dephasing_intensity: float = 0.0
    dt_ps: float = 0.0  # 0 selects sigma/40
    rabi_max_area_pi: float = 6.0
    rabi_points: int = 241
    ramsey_delay_min_ps: float = 60.0
    ramsey_delay_max_ps: float = 1000.0
    ramsey_points: int = 16
    echo_points: int = 8
    detuning_std: float = 0.0
    n_samples: int = 100
    n_phase: int = 8


@dataclass
class TomographySection:
    n_per_setting: int = 100_000
    bootstrap: int = 200
    counts_file: str = ""


@dataclass
class AnalyzeSection:
    phase_scan_points: int = 0


SECTIONS = {
    "run": RunSection,
    "source": SourceSection,
    "analyzer1": AnalyzerSection,
    "analyzer2": AnalyzerSection,
    "timing": TimingSection,
    "dynamics": DynamicsSection,
    "tomography": TomographySection,
    "analyze": AnalyzeSection,
}

# keys naming input files, resolved relative to the config file
PATH_KEYS = {("tomography", "counts_file")}


@dataclass
class ExperimentConfig:
    run: RunSection = field(default_factory=RunSection)
    source: SourceSection = field(default_factory=SourceSection)
    analyzer1: AnalyzerSection = field(default_factory=AnalyzerSection)
    analyzer2: AnalyzerSection = field(default_factory=AnalyzerSection)
    timing: TimingSection = field(default_factory=TimingSection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    tomography: TomographySection = field(default_factory=TomographySection)
    analyze: AnalyzeSection = field(default_factory=AnalyzeSection)

    # --- views onto the library types ---

    def source_config(self) -> SourceConfig:
        s = self.source
        return SourceConfig(s.excitation_prob, s.pump_phase, s.scheme, s.coherence_factor,
                            s.early_late_imbalance, s.incoherent_pump)

    def analyzer_config(self, side: int) -> AnalyzerConfig:
        a = self.analyzer1 if side == 1 else self.analyzer2
        return AnalyzerConfig(a.phase, float(self.timing.delay_ps), a.r1, a.r2, a.mode,
                              a.arm_transmission_short, a.arm_transmission_long)

    def timing_config(self) -> Timing:
        t = self.timing
        return Timing(t.rep_period_ps, t.delay_ps, t.jitter_ps, t.detector_efficiency)

    def level_system(self) -> LevelSystem:
        d = self.dynamics
        return LevelSystem(fss=d.fss, gamma_b=1.0 / d.biexciton_lifetime_ps,
                           gamma_x=1.0 / d.exciton_lifetime_ps)

    def dephasing(self) -> DephasingModel:
        return DephasingModel(self.dynamics.dephasing_rate, self.dynamics.dephasing_intensity)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        _check_seed(seed, None, "run.seed")
        return replace(self, run=replace(self.run, seed=seed))

    def to_text(self) -> str:
        """Canonical text form; :func:`parse_config` of it gives an equal config."""
        lines = []
        for name in SECTIONS:
            sec = getattr(self, name)
            for f in fields(sec):
                lines.append(f"{name}.{f.name} = {_format(getattr(sec, f.name))}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {name: {f.name: getattr(getattr(self, name), f.name) for f in fields(getattr(self, name))}
                for name in SECTIONS}

    def validate(self) -> "ExperimentConfig":
        """Re-check parameter bounds through the owning library types."""
        d = self.dynamics
        _require(d.biexciton_lifetime_ps > 0, "dynamics.biexciton_lifetime_ps", "must be positive")
        _require(d.exciton_lifetime_ps > 0, "dynamics.exciton_lifetime_ps", "must be positive")
        checks = [
            ("source", self.source_config),
            ("analyzer1", lambda: self.analyzer_config(1)),
            ("analyzer2", lambda: self.analyzer_config(2)),
            ("timing", self.timing_config),
            ("dynamics", self.level_system),
            ("dynamics", self.dephasing),
        ]
        for section, build in checks:
            try:
                build()
            except ValueError as exc:
                msg = str(exc)
                names = [f.name for f in fields(getattr(self, section)) if f.name in msg]
                key = f"{section}.{max(names, key=len)}" if names else section
                raise ConfigError(msg, key=key) from None
        t, d, r = self.timing, self.dynamics, self.run
        _require(t.pulse_sigma_ps > 0, "timing.pulse_sigma_ps", "must be positive")
        _require(t.delay_ps < t.rep_period_ps / 3, "timing.delay_ps", "must be below rep_period_ps/3")
        _require(0 < t.window_ps < t.delay_ps / 2, "timing.window_ps", "must lie in (0, delay_ps/2)")
        _require(d.dt_ps >= 0, "dynamics.dt_ps", "must be non-negative")
        _require(d.rabi_max_area_pi > 0, "dynamics.rabi_max_area_pi", "must be positive")
        _require(d.rabi_points >= 2, "dynamics.rabi_points", "must be at least 2")
        _require(d.ramsey_delay_min_ps > 4 * t.pulse_sigma_ps, "dynamics.ramsey_delay_min_ps",
                 "must exceed 4 pulse sigmas")
        _require(d.ramsey_delay_max_ps >= d.ramsey_delay_min_ps, "dynamics.ramsey_delay_max_ps",
                 "must not be below ramsey_delay_min_ps")
        _require(d.ramsey_points >= 1 and d.echo_points >= 1, "dynamics.ramsey_points",
                 "scan point counts must be positive")
        _require(d.detuning_std >= 0, "dynamics.detuning_std", "must be non-negative")
        _require(d.n_samples >= 1, "dynamics.n_samples", "must be positive")
        _require(d.n_phase >= 8, "dynamics.n_phase", "must be at least 8")
        _require(r.n_pulses >= 0, "run.n_pulses", "must be non-negative")
        _require(r.shard_pulses >= 1, "run.shard_pulses", "must be positive")
        _require(self.tomography.n_per_setting >= 1, "tomography.n_per_setting", "must be positive")
        _require(self.tomography.bootstrap >= 0, "tomography.bootstrap", "must be non-negative")
        _require(self.analyze.phase_scan_points >= 0, "analyze.phase_scan_points", "must be non-negative")
        return self


def _require(ok: bool, key: str, message: str) -> None:
    if not ok:
        raise ConfigError(message, key=key)


def _check_seed(seed: int, line, key) -> None:
    if not 0 <= seed <= U64_MAX:
        raise ConfigError("seed must be an unsigned 64-bit integer", line, key)


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(raw: str, kind, line: int, key: str):
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw.replace("_", ""))
        if kind is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError(raw)
            return v
        return raw
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as {kind.__name__}", line, key) from None


_TYPES = {"int": int, "float": float, "str": str, "bool": bool}


def parse_config(text: str, base_dir=None) -> ExperimentConfig:
    """Parse config text; relative input paths resolve against ``base_dir``."""
    cfg = ExperimentConfig()
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'section.key = value'", lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise ConfigError("key needs a section prefix", lineno, key)
        section, name = key.split(".", 1)
        if section not in SECTIONS:
            raise ConfigError(f"unknown section {section!r}", lineno, key)
        sec = getattr(cfg, section)
        kinds = {f.name: _TYPES[f.type] for f in fields(sec)}
        if name not in kinds:
            raise ConfigError("unknown key", lineno, key)
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", lineno, key)
        seen[key] = lineno
        value = _convert(raw, kinds[name], lineno, key)
        if key == "run.seed":
            _check_seed(value, lineno, key)
        if (section, name) in PATH_KEYS and value:
            path = Path(value)
            if not path.is_absolute() and base_dir is not None:
                path = Path(base_dir) / path
            if not path.exists():
                raise ConfigError(f"file not found: {path}", lineno, key)
            value = str(path)
        setattr(cfg, section, replace(sec, **{name: value}))
    try:
        return cfg.validate()
    except ConfigError as exc:
        if exc.line is None and exc.key in seen:
            raise ConfigError(str(exc).split(": ", 1)[1], seen[exc.key], exc.key) from None
        raise


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    return parse_config(text, base_dir=path.parent)
