"""Run configuration as a flat dataclass, stored as ``key=value`` lines.

None of the neural hyperparameters below come from a published setup; they are
desk-scale defaults chosen for the synthetic corpus.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from typing import Iterable

from .formats import atomic_write_text

DEFAULT_TEMPLATES = ("form", "tag", "prefix", "suffix", "surface", "context", "position", "bigram")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    seed: int = 1
    regime: str = "RAW_LATTICES"
    max_morphemes: int = 7
    # share of training-singleton tokens analyzed as unknown words when the
    # lattice taggers build their training lattices
    lattice_oov_prob: float = 1.0

    perceptron_epochs: int = 10
    perceptron_templates: tuple[str, ...] = DEFAULT_TEMPLATES
    perceptron_affix_len: int = 3

    crf_word_dim: int = 24
    crf_char_dim: int = 16
    crf_char_hidden: int = 16
    crf_hidden: int = 32
    crf_word_unk_prob: float = 0.5
    crf_lr: float = 0.01
    crf_epochs: int = 10
    crf_batch: int = 16
    crf_patience: int = 3

    pointer_form_dim: int = 24
    pointer_tag_dim: int = 12
    pointer_index_dim: int = 8
    pointer_max_index: int = 32
    pointer_hidden: int = 32
    pointer_path_pool: bool = True
    pointer_form_unk_prob: float = 0.5
    pointer_lr: float = 0.01
    pointer_epochs: int = 10
    pointer_batch: int = 16
    pointer_patience: int = 3
    beam_width: int = 1

    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 5.0
    embed_init_std: float = 0.1

    def __post_init__(self):
        if self.beam_width != 1:
            raise ConfigError("only greedy decoding (beam_width=1) is implemented")
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name.endswith(("_prob",)) and not 0.0 <= v <= 1.0:
                raise ConfigError(f"{f.name} must lie in [0, 1]")
            if f.name.endswith(("_epochs", "_dim", "_hidden", "_batch")) and v < 1:
                raise ConfigError(f"{f.name} must be >= 1")

    def replace(self, **kw) -> "Config":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for k, v in d.items():
            if k not in known:
                raise ConfigError(f"unknown config key {k!r}")
            kw[k] = tuple(v) if isinstance(v, list) else v
        return cls(**kw)


def _coerce(f: dataclasses.Field, text: str):
    t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    if t.startswith("tuple"):
        return tuple(x.strip() for x in text.split(",") if x.strip())
    if t == "bool":
        if text.lower() not in ("true", "false"):
            raise ValueError(f"expected true or false, got {text!r}")
        return text.lower() == "true"
    if t == "int":
        return int(text)
    if t == "float":
        return float(text)
    return text


def format_config(cfg: Config) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name}={v}")
    return "\n".join(lines) + "\n"


def parse_config(lines: Iterable[str], path: str = "<config>", base: Config | None = None) -> Config:
    known = {f.name: f for f in fields(Config)}
    kw = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            kw[key] = _coerce(known[key], val)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value {val!r} for {key}") from None
    return dataclasses.replace(base or Config(), **kw)


def load_config(path: str | os.PathLike | None) -> Config:
    if path is None:
        return Config()
    with open(path, encoding="utf-8") as f:
        return parse_config(f, str(path))


def save_config(cfg: Config, path: str | os.PathLike) -> None:
    atomic_write_text(path, format_config(cfg))
