"""Run configuration: a flat ``key = value`` file with dotted section prefixes.

Example::

    dataset_path = data/fb15k_sample.tsv
    output_dir = runs/fb15k
    K = 5
    agent.gamma = 0.9
    agent.hidden = 64,64
    baseline.passes = 5

Lines starting with ``#`` are comments. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .agent import AgentConfig
from .encoding import EncoderConfig
from .errors import ConfigError


@dataclass
class EncoderSection:
    d_embed: int = 8
    hash_seed: int = 0


@dataclass
class AgentSection:
    gamma: float = 0.9
    learning_rate: float = 1e-3
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int | None = None  # None: half of total_steps
    batch_size: int = 32
    buffer_capacity: int = 10_000
    target_sync_interval: int = 250
    total_steps: int = 50_000
    seed: int | None = None  # None: the run seed
    hidden: tuple[int, ...] = (64, 64)


@dataclass
class BaselineSection:
    epochs: int = 500
    learning_rate: float = 0.1
    # labelled contexts = passes * |supervised slice|
    passes: int = 5


@dataclass
class EvalSection:
    fraction: float = 0.5  # share of the holdout reserved for evaluation
    n_contexts: int = 1000
    repeat: int = 1


@dataclass
class RunConfig:
    dataset_path: str = ""
    output_dir: str = "runs/latest"
    seed: int = 0
    holdout_fraction: float = 0.2
    K: int = 5
    M: int = 16
    distractor_prob: float = 0.2
    encoder: EncoderSection = field(default_factory=EncoderSection)
    agent: AgentSection = field(default_factory=AgentSection)
    baseline: BaselineSection = field(default_factory=BaselineSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def validate(self) -> "RunConfig":
        checks = [
            (0.0 <= self.holdout_fraction <= 1.0, "holdout_fraction must lie in [0, 1]"),
            (0.0 <= self.distractor_prob <= 1.0, "distractor_prob must lie in [0, 1]"),
            (self.K >= 1, "K must be positive"),
            (self.M >= 1, "M must be positive"),
            (self.seed >= 0, "seed must be non-negative"),
            (self.encoder.d_embed >= 1, "encoder.d_embed must be positive"),
            (self.encoder.hash_seed >= 0, "encoder.hash_seed must be non-negative"),
            (all(h >= 1 for h in self.agent.hidden), "agent.hidden widths must be positive"),
            (self.baseline.epochs >= 0, "baseline.epochs must be non-negative"),
            (self.baseline.learning_rate > 0, "baseline.learning_rate must be positive"),
            (self.baseline.passes >= 1, "baseline.passes must be positive"),
            (0.0 <= self.eval.fraction <= 1.0, "eval.fraction must lie in [0, 1]"),
            (self.eval.n_contexts >= 1, "eval.n_contexts must be positive"),
            (self.eval.repeat >= 1, "eval.repeat must be positive"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        try:
            self.agent_config()
        except ValueError as exc:
            raise ConfigError(f"agent: {exc}") from exc
        return self

    @property
    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(self.encoder.d_embed, self.encoder.hash_seed, self.K)

    def agent_config(self) -> AgentConfig:
        a = self.agent
        return AgentConfig(
            gamma=a.gamma,
            learning_rate=a.learning_rate,
            epsilon_start=a.epsilon_start,
            epsilon_end=a.epsilon_end,
            epsilon_decay_steps=a.epsilon_decay_steps or max(1, a.total_steps // 2),
            batch_size=a.batch_size,
            buffer_capacity=a.buffer_capacity,
            target_sync_interval=a.target_sync_interval,
            total_steps=a.total_steps,
            seed=self.seed if a.seed is None else a.seed,
        )

    def layer_dims(self) -> list[int]:
        return [self.encoder_config.d_state, *self.agent.hidden, self.K + 1]

    # -- serialisation -----------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for key, value in _flatten(self):
            lines.append(f"{key} = {_format(value)}")
        return "\n".join(lines) + "\n"

    def set(self, key: str, raw: str) -> None:
        target, name = _resolve(self, key)
        ftype = {f.name: f.type for f in dataclasses.fields(target)}[name]
        setattr(target, name, _coerce(key, ftype, raw))


def _flatten(obj, prefix=""):
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if dataclasses.is_dataclass(value):
            yield from _flatten(value, f"{prefix}{f.name}.")
        else:
            yield f"{prefix}{f.name}", value


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _resolve(cfg: RunConfig, key: str):
    parts = key.split(".")
    target = cfg
    for part in parts[:-1]:
        sub = getattr(target, part, None) if part in {f.name for f in dataclasses.fields(target)} else None
        if not dataclasses.is_dataclass(sub):
            raise ConfigError(f"unknown config key {key!r}")
        target = sub
    names = {f.name for f in dataclasses.fields(target)}
    if parts[-1] not in names or dataclasses.is_dataclass(getattr(target, parts[-1])):
        raise ConfigError(f"unknown config key {key!r}")
    return target, parts[-1]


def _coerce(key: str, ftype: Any, raw: str):
    raw = raw.strip()
    t = str(ftype)
    try:
        if "None" in t and raw.lower() in ("none", ""):
            return None
        if t.startswith("tuple"):
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if t.startswith("int"):
            return int(raw)
        if t.startswith("float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {t}") from None


def parse_config(text: str, overrides: dict[str, str] | None = None) -> RunConfig:
    cfg = RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        cfg.set(key.strip(), value)
    for key, value in (overrides or {}).items():
        cfg.set(key, value)
    return cfg.validate()


def load_config(path: str | Path, overrides: dict[str, str] | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, overrides)
