"""Experiment configuration: a flat keyed text file with documented defaults.

Format: one `key = value` per line; `#` starts a comment. Every key has
a default; unknown keys are hard errors. Booleans accept true/false,
metric_cutoffs is a comma-separated ascending list.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .mining import MiningConfig
from .objectives import ObjectiveConfig
from .trainer import TrainerConfig


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    feature_dim: int = 8
    seed: int = 0
    rerank_depth: int = 1000
    rerank_cutoff: int = 100
    metric_cutoffs: list[int] = field(default_factory=lambda: [10, 20, 50, 100])
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    mining: MiningConfig = field(default_factory=MiningConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)

    def validate(self) -> None:
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        if self.rerank_cutoff > self.rerank_depth:
            raise ConfigError("rerank_cutoff must be <= rerank_depth")
        if any(k < 1 for k in self.metric_cutoffs) or sorted(self.metric_cutoffs) != self.metric_cutoffs:
            raise ConfigError("metric_cutoffs must be positive and ascending")
        self.objective.validate()
        self.mining.validate()
        self.trainer.validate()


# key -> (section object attribute path, parser)
def _key_map(cfg: ExperimentConfig) -> dict[str, tuple[object, str]]:
    m: dict[str, tuple[object, str]] = {}
    for f in fields(cfg):
        if f.name in ("objective", "mining", "trainer"):
            section = getattr(cfg, f.name)
            for sf in fields(section):
                # top-level wins on name clashes (the single seed knob)
                m.setdefault(sf.name, (section, sf.name))
        else:
            m[f.name] = (cfg, f.name)
    return m


def _parse_value(current, raw: str):
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected boolean, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, list):
        return [int(x) for x in raw.split(",") if x.strip()]
    raise ConfigError(f"unsupported value type for {raw!r}")


def load_config(path: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    keymap = _key_map(cfg)
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in keymap:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            obj, attr = keymap[key]
            try:
                setattr(obj, attr, _parse_value(getattr(obj, attr), raw))
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    cfg.validate()
    return cfg


def apply_overrides(cfg: ExperimentConfig, overrides: dict[str, str]) -> None:
    """Apply flag overrides (strings) after config load; flags win."""
    keymap = _key_map(cfg)
    for key, raw in overrides.items():
        if key not in keymap:
            raise ConfigError(f"unknown config key {key!r}")
        obj, attr = keymap[key]
        setattr(obj, attr, _parse_value(getattr(obj, attr), str(raw)))
    cfg.validate()


def config_text(cfg: ExperimentConfig) -> str:
    """Render the effective configuration as keyed text (round-trippable)."""
    lines = []
    for key, (obj, attr) in _key_map(cfg).items():
        value = getattr(obj, attr)
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, list):
            rendered = ",".join(str(x) for x in value)
        elif isinstance(value, float):
            rendered = f"{value:.17g}"
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"
