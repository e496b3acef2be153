"""Training / model configuration and its ``key=value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class TrainConfig:
    margin: float = 0.5
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 300
    negatives_per_positive: int = 5
    seed: int = 0
    dropout_p: float = 0.2
    question_layers: int = 3
    graph_layers: int = 2
    dim: int = 100  # the shipped synthetic config uses 16
    gold_f1_threshold: float = 0.5
    checkpoint_every: int = 0
    # ablations
    concat_sequence: bool = True
    structure_attention: bool = True
    wordnet: bool = True
    fine_grained: bool = True
    relation_typing: str = "typed"  # "typed" | "untyped"
    # unresolved readings of the model, exposed as switches
    question_edge_classes: str = "two"  # "two" | "typed"
    inverse_messages: bool = False
    train_embeddings: bool = True
    # candidate generation
    max_hops: int = 2
    max_candidates: int = 100
    max_branch: int = 10
    # optional resources, resolved relative to the config file
    lexicon: str = ""
    embeddings: str = ""
    triggers: str = ""

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be >= 1")
        if not 0 <= self.dropout_p < 1:
            raise ValueError("dropout_p must be in [0, 1)")
        if self.relation_typing not in ("typed", "untyped"):
            raise ValueError("relation_typing must be 'typed' or 'untyped'")
        if self.question_edge_classes not in ("two", "typed"):
            raise ValueError("question_edge_classes must be 'two' or 'typed'")
        if self.question_layers < 1 or self.graph_layers < 1:
            raise ValueError("layer counts must be >= 1")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise KeyError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(known[key].type, raw)
        return cls(**kwargs)


def _coerce(type_name, raw):
    if not isinstance(raw, str):
        return raw
    if type_name in ("bool", bool):
        low = raw.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if type_name in ("int", int):
        return int(raw)
    if type_name in ("float", float):
        return float(raw)
    return raw.strip()


def load_config(path) -> TrainConfig:
    """Read a flat ``key=value`` file; resource paths are made relative to its directory."""
    from .query_graph import read_key_values

    path = Path(path)
    cfg = TrainConfig.from_dict(read_key_values(path))
    for key in ("lexicon", "embeddings", "triggers"):
        value = getattr(cfg, key)
        if value and not Path(value).is_absolute():
            setattr(cfg, key, str(path.parent / value))
    return cfg


def dump_config(cfg: TrainConfig) -> str:
    return "".join(f"{k}={str(v).lower() if isinstance(v, bool) else v}\n" for k, v in cfg.to_dict().items())
