"""Structured run reports and their JSON / CSV serialization.

Every check record carries the tolerance used and where its bound comes
from: ``closed-form`` (with the formula), ``measured-baseline`` or
``target`` (an exact value such as zero). Wall-clock time is kept in the
JSON document only, so CSV output is byte-identical across runs with the
same config and seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict

from . import __version__

Compare = Literal["le", "lt", "ge", "gt", "rel_le", "info"]
Provenance = Literal["closed-form", "measured-baseline", "target"]
CSV_COLUMNS = ("check_name", "value", "bound", "tol", "pass", "gating", "provenance")


class CheckRecord(BaseModel):
    """One measured quantity compared against a bound.

    ``compare`` fixes the pass rule: ``le`` is ``value <= bound + tol``,
    ``lt`` is ``value < bound + tol``, ``ge`` is ``value >= bound - tol``,
    ``gt`` is ``value > bound + tol``,
    ``rel_le`` is ``value <= bound * (1 + tol)`` and ``info`` always passes.
    Non-finite values are stored as ``None`` with a note.
    """

    model_config = ConfigDict(extra="forbid")

    name: str
    value: float | None
    bound: float | None
    tol: float
    passed: bool
    compare: Compare
    gating: bool = True
    provenance: Provenance = "target"
    formula: str | None = None
    note: str | None = None


class ErrorRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    code: int
    kind: Literal["schema", "numerical", "check", "io"]
    message: str
    details: list[dict[str, Any]] = []


class RunReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: str = __version__
    kind: str
    config: dict[str, Any]
    checks: list[CheckRecord] = []
    wall_clock: float | None = None
    error: ErrorRecord | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks if c.gating)

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return self.error.code
        return 0 if self.passed else 1

    def failures(self) -> list[CheckRecord]:
        return [c for c in self.checks if c.gating and not c.passed]


def _finite(x) -> tuple[float | None, str | None]:
    if x is None:
        return None, None
    x = float(x)
    if math.isfinite(x):
        return x, None
    return None, "nan" if math.isnan(x) else ("+inf" if x > 0 else "-inf")


def check(name: str, value, bound=None, tol: float = 0.0, compare: Compare = "le", gating: bool = True,
          provenance: Provenance = "target", formula: str | None = None, note: str | None = None) -> CheckRecord:
    """Build a record and evaluate its pass rule."""
    v, vnote = _finite(value)
    b, _ = _finite(bound)
    if compare == "info":
        ok = True
    elif v is None or b is None:
        ok = False
    elif compare == "le":
        ok = v <= b + tol
    elif compare == "lt":
        ok = v < b + tol
    elif compare == "ge":
        ok = v >= b - tol
    elif compare == "gt":
        ok = v > b + tol
    else:
        ok = v <= b * (1 + tol)
    notes = "; ".join(n for n in (vnote and f"value {vnote}", note) if n) or None
    return CheckRecord(name=name, value=v, bound=b, tol=float(tol), passed=bool(ok), compare=compare,
                       gating=gating if compare != "info" else False, provenance=provenance, formula=formula,
                       note=notes)


def _num(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def to_json(r: RunReport) -> str:
    return json.dumps(r.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def from_json(text: str) -> RunReport:
    return RunReport.model_validate_json(text)


def to_csv(r: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in r.checks:
        w.writerow([c.name, _num(c.value), _num(c.bound), _num(c.tol), "true" if c.passed else "false",
                    "true" if c.gating else "false", c.provenance])
    return buf.getvalue()


def _fresh(directory: Path, stem: str, suffixes: list[str]) -> str:
    # reports are append-only: never overwrite an earlier run
    k = 0
    while True:
        name = stem if k == 0 else f"{stem}-{k}"
        if not any((directory / f"{name}.{s}").exists() for s in suffixes):
            return name
        k += 1


def emit_report(r: RunReport, directory: str | Path, formats=("json",), stem: str | None = None) -> list[Path]:
    """Write the report in each format to a new file under ``directory``.

    Raises
    ------
    OSError
        When the directory cannot be created or written.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    formats = list(dict.fromkeys(formats))
    name = _fresh(directory, stem or r.kind, formats)
    out = []
    for fmt in formats:
        path = directory / f"{name}.{fmt}"
        text = to_json(r) if fmt == "json" else to_csv(r)
        with open(path, "x", newline="") as fh:
            fh.write(text)
        out.append(path)
    return out
