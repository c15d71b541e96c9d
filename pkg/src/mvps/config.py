"""Experiment configuration: JSON document, schema, and typed dataclasses.

Numbers may be written as JSON numbers or as decimal strings ("0.25");
both are parsed to float64.  Validation happens before any computation and
names the offending path, e.g. ``model.nu[2]``.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .general import builtin_kernel
from .kernel import FiniteKernel, Partition
from .measure import FiniteSpace, ProbabilityVector
from .urn import UrnSpec

CONFIG_SCHEMA_VERSION = 1

_num = {
    "oneOf": [
        {"type": "number"},
        {"type": "string", "pattern": r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$"},
    ]
}
_count = {"type": "integer", "minimum": 0}
_labels = {"type": "array", "items": {"type": "string"}, "minItems": 1}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "mvps experiment config",
    "type": "object",
    "required": ["model"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": CONFIG_SCHEMA_VERSION},
        "description": {"type": "string"},
        "commands": {"type": "array", "items": {"type": "string"}},
        "model": {
            "type": "object",
            "required": ["theta"],
            "additionalProperties": False,
            "properties": {
                "theta": _num,
                "labels": _labels,
                "nu": {"type": "array", "items": _num, "minItems": 1},
                "kernel": {"type": "array", "items": {"type": "array", "items": _num}},
                "builtin": {
                    "type": "object",
                    "required": ["name"],
                    "additionalProperties": False,
                    "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
                },
                "partition": {"type": "array", "items": _labels},
                "null_set": {"type": "array", "items": {"type": "string"}},
            },
            "oneOf": [
                {"required": ["labels", "nu", "kernel"], "not": {"required": ["builtin"]}},
                {"required": ["builtin"], "not": {"required": ["kernel"]}},
            ],
        },
        "task": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": _count,
                "depth": {"type": "integer", "minimum": 1},
                "replicates": {"type": "integer", "minimum": 1},
                "seed": _count,
                "checkpoints": {"type": "array", "items": _count},
                "tol": _num,
                "z_max": _num,
                "J": {"type": "integer", "minimum": 1},
                "epsilon": _num,
                "data": {"type": "array", "items": {"type": ["string", "number"]}},
                "test_sets": {"type": "array", "items": _num},
                "checks": {
                    "type": "array",
                    "items": {"enum": ["non_negative", "balanced", "stationary", "self_averaging", "proper"]},
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["json", "csv"]}},
            },
        },
    },
}


def _path(error):
    out = ""
    for p in error.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def validate(doc):
    """Raise ConfigError naming the offending path on the first schema violation."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = list(validator.iter_errors(doc))
    if errors:
        # prefer the deepest error: it points at the actual bad value
        e = max(errors, key=lambda e: len(list(e.absolute_path)))
        raise ConfigError(f"config invalid at {_path(e)}: {e.message}")


def _f(x):
    return float(x)


@dataclass(frozen=True)
class ModelConfig:
    theta: float
    labels: tuple = None
    nu: tuple = None
    kernel: tuple = None
    builtin: dict = None
    partition: tuple = None
    null_set: tuple = None

    @property
    def is_finite(self):
        return self.kernel is not None

    def space(self):
        return FiniteSpace(self.labels)

    def nu_vector(self):
        return ProbabilityVector(self.space(), np.array(self.nu))

    def kernel_matrix(self):
        return np.array(self.kernel, dtype=np.float64)

    def finite_kernel(self):
        return FiniteKernel(self.space(), self.kernel_matrix())

    def general_kernel(self):
        return builtin_kernel(self.builtin["name"], **self.builtin.get("params", {}))

    def spec(self):
        if self.is_finite:
            return UrnSpec(self.theta, self.nu_vector(), self.finite_kernel())
        return UrnSpec(self.theta, None, self.general_kernel())

    def partition_obj(self):
        if self.partition is None:
            return None
        return Partition.from_labels(self.space(), self.partition)


@dataclass(frozen=True)
class TaskConfig:
    n: int = 10
    depth: int = 4
    replicates: int = 1000
    seed: int = 0
    checkpoints: tuple = None
    tol: float = None
    z_max: float = None
    J: int = None
    epsilon: float = None
    data: tuple = ()
    test_sets: tuple = (-1.0, 0.0, 1.0)
    checks: tuple = ("non_negative", "balanced", "stationary", "self_averaging", "proper")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = None
    formats: tuple = ("json", "csv")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig
    task: TaskConfig = field(default_factory=TaskConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    description: str = ""
    commands: tuple = ()

    @classmethod
    def from_dict(cls, doc):
        validate(doc)
        m = doc["model"]
        labels = tuple(m["labels"]) if "labels" in m else None
        if "kernel" in m:
            k = len(labels)
            if len(m["nu"]) != k:
                raise ConfigError(f"config invalid at model.nu: expected {k} weights, got {len(m['nu'])}")
            if len(m["kernel"]) != k or any(len(r) != k for r in m["kernel"]):
                raise ConfigError(f"config invalid at model.kernel: expected a {k}x{k} matrix")
        model = ModelConfig(
            theta=_f(m["theta"]),
            labels=labels,
            nu=tuple(_f(x) for x in m["nu"]) if "nu" in m else None,
            kernel=tuple(tuple(_f(x) for x in r) for r in m["kernel"]) if "kernel" in m else None,
            builtin=m.get("builtin"),
            partition=tuple(tuple(b) for b in m["partition"]) if "partition" in m else None,
            null_set=tuple(m["null_set"]) if "null_set" in m else None,
        )
        t = dict(doc.get("task", {}))
        for key in ("tol", "z_max", "epsilon"):
            if key in t:
                t[key] = _f(t[key])
        for key in ("checkpoints", "data", "checks"):
            if key in t:
                t[key] = tuple(t[key])
        if "test_sets" in t:
            t["test_sets"] = tuple(_f(x) for x in t["test_sets"])
        o = dict(doc.get("output", {}))
        if "formats" in o:
            o["formats"] = tuple(o["formats"])
        return cls(model, TaskConfig(**t), OutputConfig(**o), doc.get("description", ""), tuple(doc.get("commands", ())))

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


def bundled_configs():
    """Paths of the example configs shipped with the package."""
    return sorted((Path(__file__).parent / "configs").glob("*.json"))
