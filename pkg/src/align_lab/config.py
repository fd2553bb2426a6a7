"""Flat ``key = value`` experiment configs with dotted sections and sweep axes.

Example::

    name = ablation
    seeds = [0, 1, 2]
    vcq.delta = 0.25
    alignment.mode in [none, da, csda]   # sweep axis

A line ``key in [a, b, ...]`` declares a sweep axis; the cartesian product of
all axes (in declaration order) gives the sweep points.
"""

import itertools
import re
from dataclasses import dataclass, field
from pathlib import Path

from .data import DEFAULT_PRIORS, SynthSpec
from .engine import ALIGNMENT_MODES, MethodConfig, TrainSchedule
from .errors import ConfigError
from .vcq import VcqConfig

DEFAULTS: dict = {
    "name": "run",
    "seeds": [0],
    "omega": 0.95,
    "output.dir": "runs",
    "data.source": "synthetic",
    "data.path": "",
    "data.n_classes": 5,
    "data.dim": 16,
    "data.priors": list(DEFAULT_PRIORS),
    "data.mean_scale": 1.5,
    "data.sigma": 1.0,
    "data.count": 5800,
    "data.seed": "run",
    "split.labeled": 200,
    "split.val_per_class": 10,
    "split.test_per_class": 50,
    "split.upper_bound": False,
    "train.epochs": 256,
    "train.labeled_batch": 128,
    "train.unlabeled_batch": 128,
    "train.base_lr": 1e-4,
    "train.decay_epochs": [50, 125],
    "train.hidden": 32,
    "train.sigma_aug": 0.0,
    "train.use_unlabeled": True,
    "vcq.L": 512,
    "vcq.gamma": 1.0,
    "vcq.delta": 0.25,
    "alignment.mode": "csda",
    "alignment.temperature": "adaptive",
    "alignment.t_min": 0.05,
    "alignment.eps": 1e-8,
}

_LINE = re.compile(r"^([A-Za-z_][\w.]*)\s*(=|\bin\b)\s*(.*)$")
_CONSTANT_T = re.compile(r"^constant\(\s*([0-9.eE+-]+)\s*\)$")


def parse_value(text: str):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [parse_value(v) for v in inner.split(",")] if inner else []
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text.strip("'\"")


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(key: str, value):
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, list):
            if not isinstance(value, list):
                value = [value]
            kind = int if key in ("seeds", "train.decay_epochs") else float
            return [kind(v) for v in value]
        if isinstance(default, int):
            if isinstance(value, float) and value.is_integer():
                value = int(value)
            if not isinstance(value, int) or isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        return value if key == "data.seed" and isinstance(value, int) else str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot use {value!r}") from None


@dataclass
class RunConfig:
    """A fully resolved single-point configuration (no sweep axes)."""
    values: dict = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key):
        return self.values[key]

    def with_overrides(self, **overrides) -> "RunConfig":
        vals = dict(self.values)
        for k, v in overrides.items():
            if k not in DEFAULTS:
                raise ConfigError(f"unknown key {k!r}")
            vals[k] = _coerce(k, v)
        cfg = RunConfig(vals)
        cfg.validate()
        return cfg

    @property
    def seeds(self) -> list[int]:
        return list(self.values["seeds"])

    def validate(self) -> None:
        v = self.values
        if not v["seeds"]:
            raise ConfigError("seeds must be non-empty")
        if v["data.source"] not in ("synthetic", "csv"):
            raise ConfigError("data.source must be 'synthetic' or 'csv'")
        if (v["data.source"] == "csv") != bool(v["data.path"]):
            raise ConfigError("data.path is required for, and only for, data.source = csv")
        if v["alignment.mode"] not in ALIGNMENT_MODES:
            raise ConfigError(f"alignment.mode must be one of {ALIGNMENT_MODES}")
        if not (v["data.seed"] == "run" or isinstance(v["data.seed"], int)):
            raise ConfigError("data.seed must be an integer or 'run'")
        self.temperature()
        try:
            self.schedule(0).validate()
            self.method().validate()
            self.vcq().validate(v["data.n_classes"])
            if not 0 < v["omega"] < 1:
                raise ValueError("omega must be in (0, 1)")
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def temperature(self) -> float | None:
        text = self.values["alignment.temperature"]
        if text == "adaptive":
            return None
        m = _CONSTANT_T.match(str(text))
        if not m:
            raise ConfigError("alignment.temperature must be 'adaptive' or 'constant(T)'")
        return float(m.group(1))

    def schedule(self, seed: int) -> TrainSchedule:
        v = self.values
        return TrainSchedule(
            epochs=v["train.epochs"], labeled_batch=v["train.labeled_batch"],
            unlabeled_batch=v["train.unlabeled_batch"], base_lr=v["train.base_lr"],
            decay_epochs=tuple(v["train.decay_epochs"]), seed=seed, hidden=v["train.hidden"],
            sigma_aug=v["train.sigma_aug"])

    def method(self) -> MethodConfig:
        v = self.values
        return MethodConfig(alignment=v["alignment.mode"], temperature=self.temperature(),
                            t_min=v["alignment.t_min"], eps=v["alignment.eps"],
                            use_unlabeled=v["train.use_unlabeled"])

    def vcq(self) -> VcqConfig:
        v = self.values
        return VcqConfig(L=v["vcq.L"], gamma=v["vcq.gamma"], delta=v["vcq.delta"])

    def synth_spec(self, seed: int) -> SynthSpec:
        v = self.values
        data_seed = seed if v["data.seed"] == "run" else v["data.seed"]
        return SynthSpec(n=v["data.n_classes"], d=v["data.dim"], priors=tuple(v["data.priors"]),
                         mean_scale=v["data.mean_scale"], sigma=v["data.sigma"],
                         count=v["data.count"], seed=data_seed)

    def to_text(self) -> str:
        return "".join(f"{k} = {format_value(self.values[k])}\n" for k in DEFAULTS)


@dataclass
class ConfigFile:
    base: RunConfig
    axes: list = field(default_factory=list)  # [(key, [values...])]

    def points(self) -> list[tuple[str, RunConfig]]:
        """``(label, config)`` per sweep point; the label is ``""`` without axes."""
        if not self.axes:
            return [("", self.base)]
        keys = [k for k, _ in self.axes]
        out = []
        for combo in itertools.product(*(vals for _, vals in self.axes)):
            label = ",".join(f"{k}={format_value(v)}" for k, v in zip(keys, combo))
            out.append((label, self.base.with_overrides(**dict(zip(keys, combo)))))
        return out


def parse_config(text: str) -> ConfigFile:
    values = dict(DEFAULTS)
    axes = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"line {lineno}: expected 'key = value' or 'key in [...]'")
        key, op, rhs = m.group(1), m.group(2), m.group(3)
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        value = parse_value(rhs)
        if op == "in":
            if not isinstance(value, list) or not value:
                raise ConfigError(f"line {lineno}: sweep values must be a non-empty list")
            axes.append((key, [_coerce(key, v) for v in value]))
        else:
            values[key] = _coerce(key, value)
    cfg = ConfigFile(RunConfig(values), axes)
    for _, point in cfg.points():
        point.validate()
    cfg.base.validate()
    return cfg


def load_config(path) -> ConfigFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
