"""Flat key-value run configuration with CLI overrides.

Config files are plain text, one "key value" per line, '#' comments. The
same keys may be overridden on the command line as "--key value".
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .trainer import TrainConfig


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


# path-ish / string keys that live outside TrainConfig
RUN_KEYS = ("corpus", "vocab", "out_dir", "noise")

_TRAIN_TYPES = {f.name: f.type for f in fields(TrainConfig)}


@dataclass
class RunConfig:
    corpus: str
    out_dir: str
    noise: str
    vocab: str | None = None
    train: TrainConfig = None  # type: ignore[assignment]

    def validate(self) -> None:
        for key in ("corpus", "out_dir", "noise"):
            if not getattr(self, key):
                raise ConfigError(key, "missing required value")
        if not Path(self.corpus).exists():
            raise ConfigError("corpus", f"path does not exist: {self.corpus}")
        if self.vocab and not Path(self.vocab).exists():
            raise ConfigError("vocab", f"path does not exist: {self.vocab}")
        try:
            self.train.validate()
        except ValueError as exc:
            key = str(exc).split()[2] if "config key" in str(exc) else "train"
            raise ConfigError(key, str(exc)) from exc


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise ConfigError(parts[0], f"line {lineno}: missing value")
        out[parts[0]] = parts[1].strip()
    return out


def dump_config_text(values: dict[str, str]) -> str:
    return "".join(f"{k} {v}\n" for k, v in values.items())


def parse_overrides(args: tuple[str, ...]) -> dict[str, str]:
    """Parse trailing "--key value" pairs."""
    if len(args) % 2 != 0:
        raise ConfigError(args[-1].lstrip("-"), "override flag without a value")
    out = {}
    for flag, value in zip(args[::2], args[1::2]):
        if not flag.startswith("--"):
            raise ConfigError(flag, "overrides must look like --key value")
        out[flag[2:]] = value
    return out


def _coerce(key: str, value: str):
    ann = str(_TRAIN_TYPES[key])
    try:
        if "int" in ann:
            return int(value)
        if "float" in ann:
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {value!r}") from exc


def build_run_config(values: dict[str, str]) -> RunConfig:
    train_kwargs = {}
    run_kwargs: dict[str, str] = {}
    for key, value in values.items():
        if key in _TRAIN_TYPES:
            train_kwargs[key] = _coerce(key, value)
        elif key in RUN_KEYS:
            run_kwargs[key] = value
        else:
            raise ConfigError(key, "unknown key")
    for required in ("corpus", "out_dir", "noise"):
        if required not in run_kwargs:
            raise ConfigError(required, "missing required value")
    cfg = RunConfig(
        corpus=run_kwargs["corpus"],
        out_dir=run_kwargs["out_dir"],
        noise=run_kwargs["noise"],
        vocab=run_kwargs.get("vocab"),
        train=TrainConfig(**train_kwargs),
    )
    return cfg


def run_config_values(cfg: RunConfig) -> dict[str, str]:
    """Inverse of :func:`build_run_config` (round-trips exactly)."""
    values = {"corpus": cfg.corpus, "out_dir": cfg.out_dir, "noise": cfg.noise}
    if cfg.vocab:
        values["vocab"] = cfg.vocab
    for f in fields(TrainConfig):
        values[f.name] = str(getattr(cfg.train, f.name))
    return values


def load_run_config(path: str | Path, overrides: dict[str, str] | None = None) -> RunConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8"))
    if overrides:
        values.update(overrides)
    return build_run_config(values)
