"""Experiment configuration documents: JSON in, canonical hash out."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Sweep configuration; unknown JSON keys are rejected."""

    domain: str = "square"
    coef: str = "checkerboard"
    eps: list = field(default_factory=lambda: [0.25, 0.125])
    sigma: list = field(default_factory=lambda: [0.0])
    trials: int = 10
    seed: int = 0
    h_rule_den: int = 8
    generator: str = "trig"
    tol: float = 1e-10
    out: str = "."

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def canonical(self):
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]
