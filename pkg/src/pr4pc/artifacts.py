"""Deterministic writers for run artifacts: JSON, CSV traces, two-column curves, manifest."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .search import Pr4pcOutcome


def fmt(x: Any) -> str:
    """17 significant digits, '.' decimal point, empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x, ".17g")


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def trace_table(outcome: Pr4pcOutcome) -> tuple[list[str], list[list[str]]]:
    m = outcome.theta.shape[0]
    d = max((e.result.w.shape[0] for e in outcome.trace if e.result.w is not None), default=0)
    header = (
        [f"lambda_{k}" for k in range(m)]
        + [f"w_{k}" for k in range(d)]
        + ["loss"]
        + [f"violation_{k}" for k in range(m)]
        + ["stored"]
    )
    rows = []
    for e in outcome.trace:
        w = e.result.w if e.result.w is not None else [None] * d
        rows.append(
            [fmt(v) for v in e.lam]
            + [fmt(v) for v in w]
            + [fmt(e.result.loss)]
            + [fmt(v) for v in e.result.violation]
            + [fmt(e.stored)]
        )
    return header, rows


@dataclass
class ArtifactWriter:
    out_dir: Path
    files: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        # the directory is created on first write so failed runs leave nothing behind
        self.out_dir = Path(self.out_dir)

    def _path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def _write(self, name: str, text: str) -> Path:
        path = self._path(name)
        data = text.encode("utf-8")
        path.write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()
        return path

    def json(self, name: str, obj: Any) -> Path:
        return self._write(name, dumps(obj))

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
        lines = [",".join(header)] + [",".join(r) for r in rows]
        return self._write(name, "\n".join(lines) + "\n")

    def trace(self, outcome: Pr4pcOutcome, name: str = "trace.csv") -> Path:
        return self.csv(name, *trace_table(outcome))

    def curve(self, name: str, xs: Iterable[Any], ys: Iterable[Any]) -> Path:
        """Plot data: one ``x y`` pair per line; pairs with a missing value are dropped."""
        lines = [f"{fmt(x)} {fmt(y)}" for x, y in zip(xs, ys) if fmt(x) and fmt(y)]
        return self._write(f"curve-{name}.dat", "\n".join(lines) + ("\n" if lines else ""))

    def text(self, name: str, body: str) -> Path:
        return self._write(name, body if body.endswith("\n") else body + "\n")

    def manifest(self, config: Any, exit_code: int, timings: dict[str, float] | None = None) -> Path:
        body: dict[str, Any] = {
            "toolkit": "pr4pc",
            "version": __version__,
            "config": config,
            "exit_code": exit_code,
            "files": dict(sorted(self.files.items())),
        }
        if timings is not None:
            body["timings"] = timings
        path = self._path("manifest.json")
        path.write_text(dumps(body), encoding="utf-8")
        return path
