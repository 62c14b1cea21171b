"""Identity reports and their JSON / CSV rendering."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

SCHEMA_VERSION = "lkcurv.report/1"
CSV_COLUMNS = ("k", "eps", "stratum", "value", "stderr")


def default_tolerance(lhs: float) -> float:
    return 0.02 * (1.0 + abs(lhs))


@dataclass
class IdentityReport:
    identity: str
    space: str
    lhs: float
    rhs: float
    lhs_stderr: float = 0.0
    rhs_stderr: float = 0.0
    abs_tol: float = 0.0
    terms: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    passed: Optional[bool] = None

    def __post_init__(self):
        if self.passed is None:
            self.passed = self.check()

    @property
    def stderr(self) -> float:
        return math.hypot(self.lhs_stderr, self.rhs_stderr)

    @property
    def tolerance(self) -> float:
        return max(self.abs_tol, 3.0 * self.stderr)

    def check(self) -> bool:
        if not (math.isfinite(self.lhs) and math.isfinite(self.rhs)):
            return False
        return abs(self.lhs - self.rhs) <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "identity": self.identity,
            "space": self.space,
            "lhs": _num(self.lhs),
            "rhs": _num(self.rhs),
            "lhs_stderr": _num(self.lhs_stderr),
            "rhs_stderr": _num(self.rhs_stderr),
            "tolerance": _num(self.tolerance),
            "pass": bool(self.passed),
            "terms": _clean(self.terms),
            "notes": list(self.notes),
        }


def _num(x):
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, int):
        return x
    try:
        f = float(x)
    except (TypeError, ValueError):
        return x
    if not math.isfinite(f):
        return str(f)
    return round(f, 12) + 0.0  # + 0.0 folds -0.0


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return _clean(obj.to_dict())
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _num(obj.item())
    return _num(obj)


def emit_json(results: Iterable[Any], command: str = "", meta: Optional[dict] = None) -> str:
    items = [_clean(r) for r in results]
    doc = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "meta": _clean(meta or {}),
        "results": items,
        "pass": all(_passed(r) for r in items),
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _passed(item) -> bool:
    if isinstance(item, dict) and "pass" in item:
        return bool(item["pass"])
    return True


def emit_csv(rows: Iterable[dict], columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _fmt(v):
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        v = v.item()
    if isinstance(v, float):
        return repr(round(v, 12))
    return v


def emit_report(results, fmt: str = "json", command: str = "", meta: Optional[dict] = None) -> str:
    """Render verifier results; ``fmt`` is "json" or "csv"."""
    results = list(results)
    if fmt == "json":
        return emit_json(results, command, meta)
    if fmt == "csv":
        rows = []
        for r in results:
            d = _clean(r)
            if isinstance(d, dict) and "rows" in d:
                rows.extend(d["rows"])
            elif isinstance(d, dict) and "identity" in d:
                rows.append({"k": d["identity"], "eps": "", "stratum": d["space"], "value": d["lhs"], "stderr": d["lhs_stderr"]})
                rows.append({"k": d["identity"], "eps": "", "stratum": d["space"], "value": d["rhs"], "stderr": d["rhs_stderr"]})
            elif isinstance(d, dict):
                rows.append(d)
        return emit_csv(rows)
    raise ValueError(f"unknown format {fmt!r}")
