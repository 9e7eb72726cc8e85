"""Significance testing, n-gram novelty, length-bucketed ROUGE-L and reports."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .text_metrics import ngram_novelty, rouge_l_f1

DEFAULT_ALPHA = 0.05
DEFAULT_RESAMPLES = 10_000
NOVELTY_N = (1, 2, 3)
DEFAULT_BUCKET_EDGES = (4, 8, 12, 16)
FLOAT_DECIMALS = 4


@dataclass(frozen=True)
class PairedScores:
    system_a: np.ndarray
    system_b: np.ndarray
    metric: str = "rougeL"

    def __post_init__(self):
        a = np.asarray(self.system_a, dtype=np.float64)
        b = np.asarray(self.system_b, dtype=np.float64)
        if a.shape != b.shape or a.ndim != 1:
            raise InvalidArgumentError(f"paired scores must be equal-length vectors, got {a.shape} and {b.shape}")
        if a.size < 2:
            raise InvalidArgumentError("paired scores need at least 2 examples")
        if np.any((a < 0) | (a > 1) | (b < 0) | (b > 1)):
            raise InvalidArgumentError("scores must lie in [0, 1]")
        object.__setattr__(self, "system_a", a)
        object.__setattr__(self, "system_b", b)


@dataclass(frozen=True)
class BootstrapResult:
    p_value: float
    significant: bool
    mean_a: float
    mean_b: float
    resamples: int


def bootstrap_test(scores: PairedScores, resamples: int = DEFAULT_RESAMPLES, alpha: float = DEFAULT_ALPHA,
                   seed: int = 0) -> BootstrapResult:
    """One-sided paired bootstrap: is system A better than baseline B?

    Example indices are resampled with replacement; ``p`` is the fraction of
    resamples in which A's mean does not exceed B's. The resampled indices
    depend only on ``seed`` and the number of examples.
    """
    if resamples < 1000:
        raise InvalidArgumentError(f"resamples must be >= 1000, got {resamples}")
    if not (0 < alpha < 1):
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    diff = scores.system_a - scores.system_b
    n = diff.size
    rng = np.random.default_rng(seed)
    chunk = max(1, 2_000_000 // n)
    not_better = 0
    done = 0
    while done < resamples:
        k = min(chunk, resamples - done)
        idx = rng.integers(0, n, size=(k, n))
        not_better += int(np.count_nonzero(diff[idx].mean(axis=1) <= 0.0))
        done += k
    p = not_better / resamples
    return BootstrapResult(p, p < alpha, float(scores.system_a.mean()), float(scores.system_b.mean()), resamples)


@dataclass(frozen=True)
class NoveltyReport:
    """Mean unique-n-gram novelty per system: ``values[system][n]``."""

    values: dict
    n_values: tuple = NOVELTY_N

    def as_rows(self) -> dict:
        return {name: {f"novel_{n}gram": v for n, v in per_n.items()} for name, per_n in self.values.items()}


def novelty_profile(sources: Sequence, summaries_per_system: Mapping[str, Sequence],
                    n_values=NOVELTY_N) -> NoveltyReport:
    """Average novelty of each system's summaries with respect to the sources."""
    n_values = tuple(n_values)
    out = {}
    for name, summaries in summaries_per_system.items():
        if len(summaries) != len(sources):
            raise InvalidArgumentError(
                f"system {name!r} has {len(summaries)} summaries for {len(sources)} sources"
            )
        out[name] = {
            n: (float(np.mean([ngram_novelty(s, h, n) for s, h in zip(sources, summaries)])) if sources else 0.0)
            for n in n_values
        }
    return NoveltyReport(out, n_values)


def bucket_labels(edges: Sequence[int]) -> list[str]:
    labels, lo = [], 1
    for e in edges:
        labels.append(f"{lo}-{e}")
        lo = e + 1
    labels.append(f">{edges[-1]}")
    return labels


def length_bucket_rouge(references: Sequence, hypotheses: Sequence,
                        bucket_edges: Sequence[int] = DEFAULT_BUCKET_EDGES) -> list[dict]:
    """Mean ROUGE-L F1 per bucket of reference length.

    Buckets are right-closed: ``1-e0``, ``e0+1 - e1``, ..., ``>e_last``.
    Empty buckets have ``count`` 0 and ``mean_rougeL`` None.
    """
    edges = list(bucket_edges)
    if not edges or any(b <= a for a, b in zip(edges, edges[1:])):
        raise InvalidArgumentError(f"bucket edges must be strictly increasing, got {edges}")
    if len(references) != len(hypotheses):
        raise InvalidArgumentError("references and hypotheses differ in length")
    labels = bucket_labels(edges)
    buckets = [[] for _ in labels]
    for ref, hyp in zip(references, hypotheses):
        idx = int(np.searchsorted(edges, len(ref), side="left"))
        buckets[idx].append(rouge_l_f1(ref, hyp).f1)
    return [
        {"bucket": label, "count": len(vals), "mean_rougeL": float(np.mean(vals)) if vals else None}
        for label, vals in zip(labels, buckets)
    ]


# -- reports ------------------------------------------------------------------

def _fmt(value):
    if value is None:
        return None
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return None
        return round(float(value), FLOAT_DECIMALS)
    return value


def _columns(results: Mapping[str, Mapping]) -> list[str]:
    cols = []
    for row in results.values():
        for key in row:
            if key not in cols:
                cols.append(key)
    return cols


def emit_report(results: Mapping[str, Mapping], path, format: str = "csv") -> Path:
    """Write ``{system: {metric: value}}`` as CSV (one row per system) or JSON.

    Column order follows first appearance of each metric; floats carry four
    decimals.
    """
    if format not in ("csv", "json"):
        raise InvalidArgumentError(f"format must be 'csv' or 'json', got {format!r}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if format == "json":
            doc = {name: {k: _fmt(v) for k, v in row.items()} for name, row in results.items()}
            path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        else:
            cols = _columns(results)
            with path.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["system", *cols])
                for name, row in results.items():
                    cells = []
                    for c in cols:
                        v = _fmt(row.get(c))
                        cells.append("" if v is None else (f"{v:.{FLOAT_DECIMALS}f}" if isinstance(v, float) else v))
                    w.writerow([name, *cells])
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
    return path


def read_report(path) -> dict:
    """Parse a report written by :func:`emit_report`; numbers come back as floats."""
    path = Path(path)
    if path.suffix == ".json":
        return json.loads(path.read_text(encoding="utf-8"))
    out = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            name = row.pop("system")
            parsed = {}
            for k, v in row.items():
                if v == "":
                    parsed[k] = None
                    continue
                try:
                    parsed[k] = float(v)
                except ValueError:
                    parsed[k] = v
            out[name] = parsed
    return out


def write_gnuplot(rows: Sequence[Sequence], columns: Sequence[str], path) -> Path:
    """Whitespace-separated data with a ``#`` header, loadable by gnuplot."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# " + " ".join(columns)]
    for row in rows:
        cells = []
        for v in row:
            v = _fmt(v)
            if v is None:
                cells.append("NaN")
            elif isinstance(v, float):
                cells.append(f"{v:.{FLOAT_DECIMALS}f}")
            else:
                cells.append(str(v))
        lines.append(" ".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
