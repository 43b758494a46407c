"""P-M scores, component scores and population rankings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cfa import MANIFEST_LABELS, MANIFEST_NAMES, N_MANIFEST, CfaFit, ManifestVector

PM_SCALE = 100.0


@dataclass(frozen=True)
class PmWeights:
    """Per-indicator weights, loading / SE, in canonical manifest order."""

    weights: np.ndarray
    loadings: np.ndarray | None = None
    standard_errors: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (N_MANIFEST,) or not np.all(np.isfinite(w)):
            raise ValueError(f"weights must be {N_MANIFEST} finite numbers")
        object.__setattr__(self, "weights", w)

    def scaled(self, c: float) -> "PmWeights":
        return PmWeights(self.weights * c)

    @classmethod
    def from_loadings(cls, loadings, standard_errors) -> "PmWeights":
        lam = np.asarray(loadings, dtype=float)
        se = np.asarray(standard_errors, dtype=float)
        if np.any(se == 0) or not np.all(np.isfinite(se)):
            raise ValueError("standard errors must be finite and nonzero")
        return cls(lam / se, lam, se)

    def to_dict(self) -> dict:
        d = {"weights": self.weights.tolist()}
        if self.loadings is not None:
            d["loadings"] = self.loadings.tolist()
            d["standard_errors"] = self.standard_errors.tolist()
        return d


def pm_weights(fit: CfaFit) -> PmWeights:
    return PmWeights.from_loadings(fit.loadings, fit.standard_errors)


def _values(v) -> np.ndarray:
    return v.as_array() if isinstance(v, ManifestVector) else np.asarray(v, dtype=float)


def pm_score(v, w: PmWeights) -> float:
    return float(w.weights @ _values(v)) / PM_SCALE


def component_score(v, loadings) -> float:
    """Plain loading-weighted sum, also divided by 100 for comparability."""
    return float(np.asarray(loadings, dtype=float) @ _values(v)) / PM_SCALE


@dataclass(frozen=True)
class RankEntry:
    author_id: str
    pm_score: float
    rank: int


@dataclass(frozen=True)
class PmRanking:
    entries: tuple[RankEntry, ...]

    def ranks(self) -> dict[str, int]:
        return {e.author_id: e.rank for e in self.entries}

    def to_list(self) -> list[dict]:
        return [{"author_id": e.author_id, "pm_score": e.pm_score, "rank": e.rank} for e in self.entries]

    @classmethod
    def from_list(cls, rows) -> "PmRanking":
        return cls(tuple(RankEntry(str(r["author_id"]), float(r["pm_score"]), int(r["rank"])) for r in rows))


def _rank_values(values: Sequence[float], method: str = "min") -> list[int]:
    """Rank descending. ``min`` gives ties the lowest rank and skips after; ``dense`` does not skip."""
    order = sorted(range(len(values)), key=lambda i: -values[i])
    ranks = [0] * len(values)
    prev = None
    rank = 0
    distinct = 0
    for pos, i in enumerate(order, start=1):
        if prev is None or values[i] != prev:
            distinct += 1
            rank = pos if method == "min" else distinct
            prev = values[i]
        ranks[i] = rank
    if method not in ("min", "dense"):
        raise ValueError(f"unknown rank method {method!r}")
    return ranks


def rank_population(scores: Iterable[tuple[str, float]] | Mapping[str, float]) -> PmRanking:
    items = list(scores.items()) if isinstance(scores, Mapping) else [tuple(s) for s in scores]
    # author_id order first so equal scores come out in a stable order
    items.sort(key=lambda kv: str(kv[0]))
    items.sort(key=lambda kv: -kv[1])
    ranks = _rank_values([s for _, s in items])
    return PmRanking(tuple(RankEntry(str(a), float(s), r) for (a, s), r in zip(items, ranks)))


def per_index_ranks(manifests: Mapping[str, ManifestVector], method: str = "min") -> dict[str, tuple[int, ...]]:
    """Rank every manifest variable independently across the population."""
    ids = sorted(manifests)
    if not ids:
        return {}
    x = np.array([manifests[a].as_array() for a in ids])
    cols = [_rank_values(x[:, j].tolist(), method) for j in range(N_MANIFEST)]
    return {a: tuple(col[i] for col in cols) for i, a in enumerate(ids)}


def compare_weights(a: PmWeights, b: PmWeights, labels: tuple[str, str] = ("A", "B")) -> list[dict]:
    """Side-by-side weights of two populations; ratio > 1 means heavier in the first."""
    rows = []
    for j, name in enumerate(MANIFEST_NAMES):
        wa, wb = float(a.weights[j]), float(b.weights[j])
        rows.append({
            "variable": name,
            "label": MANIFEST_LABELS[j],
            labels[0]: wa,
            labels[1]: wb,
            "ratio": wa / wb if wb != 0 else float("inf"),
        })
    return rows
