"""Check reports and JSON/CSV emission helpers."""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

REPORT_SCHEMA_VERSION = 1


def jsonable(obj):
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        # JSON has no inf/nan; keep them as strings so round trips stay exact
        return x if math.isfinite(x) else repr(x)
    return obj


@dataclass
class CheckReport:
    """Outcome of a check: ``passed`` is exactly ``max_residual <= tol``."""

    name: str
    max_residual: float
    tol: float
    witness: dict = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.max_residual = float(self.max_residual)
        self.tol = float(self.tol)

    @property
    def passed(self):
        return self.max_residual <= self.tol

    def __bool__(self):
        return self.passed

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "max_residual": jsonable(self.max_residual),
            "tol": self.tol,
            "witness": jsonable(self.witness),
            "details": jsonable(self.details),
        }

    @classmethod
    def from_dict(cls, d):
        res = d["max_residual"]
        return cls(
            name=d["name"],
            max_residual=float(res),
            tol=d["tol"],
            witness=d.get("witness"),
            details=d.get("details", {}),
        )

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        status = "PASS" if self.passed else "FAIL"
        return f"CheckReport({self.name}: {status}, residual={self.max_residual:.3g}, tol={self.tol:g})"


def combine(name, reports, tol=None):
    """Logical AND of several reports expressed as one report.

    Residuals are compared relative to each report's own tolerance, so the
    combined residual is the worst ratio residual/tol (or 0/inf for exact
    checks with tol == 0).
    """
    worst, witness = 0.0, None
    for r in reports:
        ratio = r.max_residual / r.tol if r.tol > 0 else (0.0 if r.max_residual <= 0 else math.inf)
        if ratio > worst:
            worst, witness = ratio, {"check": r.name, "witness": r.witness}
    return CheckReport(
        name=name,
        max_residual=worst,
        tol=1.0 if tol is None else tol,
        witness=witness,
        details={r.name: r.to_dict() for r in reports},
    )


def write_json(payload, path):
    with open(path, "w") as fh:
        json.dump(jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(header, rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v
