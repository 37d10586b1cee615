"""Experiment configuration: an INI file with one section per stage.

Every value has a default, so an empty file is a valid configuration.
``ExperimentConfig.from_text(cfg.to_text()) == cfg`` for every valid cfg.
"""

import configparser
import hashlib
from dataclasses import asdict, dataclass, field, fields, replace

from .env import EnvironmentSpec
from .errors import ConfigError
from .kernels import KernelParams

STAGES = ("calibrate", "fieldcheck", "statics", "simulate", "theorems")
THEOREMS = ("p1", "p2", "p3", "t01")


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def _names(text):
    return tuple(t for t in text.replace(",", " ").split())


def _fmt(value):
    if isinstance(value, tuple):
        return " ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


@dataclass(frozen=True)
class EnvironmentSection:
    dimension: int = 2
    range: float = 32.0
    intensity: float | None = None


@dataclass(frozen=True)
class KernelSection:
    amplitude: float = 0.6
    profile_order: int = 4
    quadrature_order: int = 24


@dataclass(frozen=True)
class StaticsSection:
    epsilon_grid: tuple = tuple(round(0.05 * k, 2) for k in range(1, 21))
    tuned_epsilon: float = 1.0
    lambdas: tuple = (-0.25, 0.5, 1.0)
    curvature_grid: tuple = (0.02, 0.04, 0.06, 0.08, 0.1, 0.12)
    calibration_samples: int = 1_000_000
    samples: int = 1_000_000
    velocity_samples: int = 10_000_000


@dataclass(frozen=True)
class FieldcheckSection:
    samples: int = 100_000
    pairs: int = 10_000
    probes: int = 100


@dataclass(frozen=True)
class SdeSection:
    epsilon: float = 0.1
    lam: float = 1.0
    T: float = 10_000.0
    M: int = 200
    h_step: float | None = None
    bm_T: float = 10.0
    bm_M: int = 10_000
    t01_T: float = 100_000.0
    t01_environments: int = 20
    t01_step_fraction: float = 0.25


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    stages: tuple = STAGES
    theorems: tuple = THEOREMS
    output: str = "out"


_SECTIONS = {
    "environment": EnvironmentSection,
    "kernel": KernelSection,
    "statics": StaticsSection,
    "fieldcheck": FieldcheckSection,
    "sde": SdeSection,
    "run": RunSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    environment: EnvironmentSection = field(default_factory=EnvironmentSection)
    kernel: KernelSection = field(default_factory=KernelSection)
    statics: StaticsSection = field(default_factory=StaticsSection)
    fieldcheck: FieldcheckSection = field(default_factory=FieldcheckSection)
    sde: SdeSection = field(default_factory=SdeSection)
    run: RunSection = field(default_factory=RunSection)

    def __post_init__(self):
        self.validate()

    # -- derived objects -------------------------------------------------
    @property
    def spec(self):
        e = self.environment
        return EnvironmentSpec(e.dimension, e.range, self.run.seed, e.intensity)

    @property
    def kernel_params(self):
        k = self.kernel
        return KernelParams(self.environment.dimension, self.environment.range,
                            k.amplitude, k.profile_order, k.quadrature_order)

    def validate(self):
        try:
            self.spec
            self.kernel_params
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        s = self.statics
        for eps in s.epsilon_grid + s.curvature_grid + (s.tuned_epsilon,):
            if not 0 <= eps <= 1:
                raise ConfigError(f"epsilon values must lie in [0, 1], got {eps}")
        if list(s.epsilon_grid) != sorted(s.epsilon_grid):
            raise ConfigError("epsilon_grid must be ascending")
        for lam in s.lambdas:
            if not -1 <= lam <= 1:
                raise ConfigError(f"lambda values must lie in [-1, 1], got {lam}")
        if min(s.calibration_samples, s.samples, s.velocity_samples) < 10_000:
            raise ConfigError("sample counts must be at least 10000")
        f = self.fieldcheck
        if min(f.samples, f.pairs, f.probes) < 1:
            raise ConfigError("fieldcheck counts must be positive")
        q = self.sde
        if not 0 <= q.epsilon <= 1 or not -1 <= q.lam <= 1:
            raise ConfigError("SDE epsilon must lie in [0, 1] and lambda in [-1, 1]")
        if q.h_step is not None and q.h_step <= 0:
            raise ConfigError("h_step must be positive")
        if min(q.T, q.bm_T, q.t01_T) <= 0 or min(q.M, q.bm_M, q.t01_environments) < 1:
            raise ConfigError("SDE horizons and counts must be positive")
        if not 0 < q.t01_step_fraction <= 1:
            raise ConfigError("t01_step_fraction must lie in (0, 1]")
        r = self.run
        if not 0 <= r.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for st in r.stages:
            if st not in STAGES:
                raise ConfigError(f"unknown stage {st!r}; choose from {', '.join(STAGES)}")
        for th in r.theorems:
            if th not in THEOREMS:
                raise ConfigError(f"unknown theorem {th!r}")

    # -- serialisation ---------------------------------------------------
    def to_text(self):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for name in _SECTIONS:
            sec = getattr(self, name)
            cp[name] = {k: _fmt(v) for k, v in asdict(sec).items()}
        lines = []
        for name in cp.sections():
            lines.append(f"[{name}]")
            lines.extend(f"{k} = {v}" for k, v in cp[name].items())
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        parts = {}
        for sec_name in cp.sections():
            if sec_name not in _SECTIONS:
                raise ConfigError(f"unknown section [{sec_name}]")
        for sec_name, sec_cls in _SECTIONS.items():
            kwargs = {}
            known = {f.name: f for f in fields(sec_cls)}
            if cp.has_section(sec_name):
                for key, raw in cp[sec_name].items():
                    if key not in known:
                        raise ConfigError(f"unknown key {key!r} in [{sec_name}]")
                    kwargs[key] = _parse(sec_cls, known[key], raw)
            parts[sec_name] = sec_cls(**kwargs)
        return cls(**parts)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    def digest(self, *sections):
        """Hash of the canonical text of ``sections`` (all when empty)."""
        text = self.to_text() if not sections else "\n".join(
            _section_text(self, s) for s in sections)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_seed(self, seed):
        return replace(self, run=replace(self.run, seed=int(seed)))

    def with_output(self, out):
        return replace(self, run=replace(self.run, output=str(out)))


def _section_text(cfg, name):
    sec = getattr(cfg, name)
    return f"[{name}]\n" + "\n".join(f"{k} = {_fmt(v)}" for k, v in asdict(sec).items())


def _parse(sec_cls, fld, raw):
    default = fld.default
    raw = raw.strip()
    try:
        if isinstance(default, tuple):
            if fld.name in ("stages", "theorems"):
                return _names(raw)
            return _floats(raw)
        if fld.type in ("float | None",) or (default is None):
            return None if raw == "" else float(raw)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {fld.name}: {raw!r}") from exc
