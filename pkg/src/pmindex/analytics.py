"""Group descriptive statistics, HCR splits and the h versus citations regression.

Functions take plain row mappings (one per researcher) holding at least a
``department`` label, an ``hcr`` flag and the metric columns asked for.
"""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

POPULATION_LABEL = "Total"


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    median: float
    std: float
    min: float
    max: float


def describe(values: Sequence[float]) -> MetricSummary:
    """Mean, median (middle-two average for even n), sample std, min, max."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("cannot describe an empty sample")
    std = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return MetricSummary(
        mean=statistics.fmean(vals),
        median=float(statistics.median(vals)),
        std=std,
        min=min(vals),
        max=max(vals),
    )


@dataclass(frozen=True)
class GroupSummary:
    label: str
    n: int
    metrics: dict[str, MetricSummary] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"label": self.label, "n": self.n,
                "metrics": {k: dict(v.__dict__) for k, v in self.metrics.items()}}

    @classmethod
    def from_dict(cls, d) -> "GroupSummary":
        return cls(d["label"], int(d["n"]), {k: MetricSummary(**v) for k, v in d["metrics"].items()})


def _groups(rows: Sequence[Mapping], group_by: str) -> dict[str, list[Mapping]]:
    if group_by == "population":
        return {POPULATION_LABEL: list(rows)}
    if group_by != "department":
        raise ValueError(f"unknown grouping {group_by!r}")
    out: dict[str, list[Mapping]] = {}
    for row in rows:
        out.setdefault(str(row["department"]), []).append(row)
    return out


def group_descriptives(rows: Sequence[Mapping], metrics: Sequence[str],
                       group_by: str = "department") -> list[GroupSummary]:
    """One summary per group, groups in order of first appearance."""
    result = []
    for label, members in _groups(rows, group_by).items():
        if not members:
            log.warning("skipping empty group %s", label)
            continue
        result.append(GroupSummary(label, len(members),
                                   {m: describe([r[m] for r in members]) for m in metrics}))
    return result


@dataclass(frozen=True)
class HcrSplit:
    label: str
    n_total: int
    n_hcr: int
    n_nonhcr: int
    papers_total: int
    papers_hcr: int
    papers_nonhcr: int
    citations_total: int
    citations_hcr: int
    citations_nonhcr: int

    @staticmethod
    def _avg(total, n):
        return total / n if n else 0.0

    @staticmethod
    def _share(part, total):
        return 100.0 * part / total if total else 0.0

    @property
    def avg_papers(self) -> float:
        return self._avg(self.papers_total, self.n_total)

    @property
    def avg_papers_hcr(self) -> float:
        return self._avg(self.papers_hcr, self.n_hcr)

    @property
    def avg_papers_nonhcr(self) -> float:
        return self._avg(self.papers_nonhcr, self.n_nonhcr)

    @property
    def avg_citations(self) -> float:
        return self._avg(self.citations_total, self.n_total)

    @property
    def avg_citations_hcr(self) -> float:
        return self._avg(self.citations_hcr, self.n_hcr)

    @property
    def avg_citations_nonhcr(self) -> float:
        return self._avg(self.citations_nonhcr, self.n_nonhcr)

    @property
    def pct_papers_hcr(self) -> float:
        return self._share(self.papers_hcr, self.papers_total)

    @property
    def pct_papers_nonhcr(self) -> float:
        return 100.0 - self.pct_papers_hcr

    @property
    def pct_citations_hcr(self) -> float:
        return self._share(self.citations_hcr, self.citations_total)

    @property
    def pct_citations_nonhcr(self) -> float:
        return 100.0 - self.pct_citations_hcr

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        for name in ("avg_papers", "avg_papers_hcr", "avg_papers_nonhcr", "avg_citations",
                     "avg_citations_hcr", "avg_citations_nonhcr", "pct_papers_hcr",
                     "pct_papers_nonhcr", "pct_citations_hcr", "pct_citations_nonhcr"):
            d[name] = getattr(self, name)
        return d

    @classmethod
    def from_dict(cls, d) -> "HcrSplit":
        return cls(**{k: d[k] for k in (
            "label", "n_total", "n_hcr", "n_nonhcr", "papers_total", "papers_hcr", "papers_nonhcr",
            "citations_total", "citations_hcr", "citations_nonhcr")})


def hcr_split(rows: Sequence[Mapping], group_by: str = "department") -> list[HcrSplit]:
    out = []
    for label, members in _groups(rows, group_by).items():
        hcr = [r for r in members if r["hcr"]]
        non = [r for r in members if not r["hcr"]]
        out.append(HcrSplit(
            label=label,
            n_total=len(members),
            n_hcr=len(hcr),
            n_nonhcr=len(non),
            papers_total=sum(int(r["n_papers"]) for r in members),
            papers_hcr=sum(int(r["n_papers"]) for r in hcr),
            papers_nonhcr=sum(int(r["n_papers"]) for r in non),
            citations_total=sum(int(r["n_citations"]) for r in members),
            citations_hcr=sum(int(r["n_citations"]) for r in hcr),
            citations_nonhcr=sum(int(r["n_citations"]) for r in non),
        ))
    return out


def total_split(splits: Iterable[HcrSplit], label: str = POPULATION_LABEL) -> HcrSplit:
    """Column sums of a set of group splits."""
    splits = list(splits)
    fields = ("n_total", "n_hcr", "n_nonhcr", "papers_total", "papers_hcr", "papers_nonhcr",
              "citations_total", "citations_hcr", "citations_nonhcr")
    return HcrSplit(label, **{f: sum(getattr(s, f) for s in splits) for f in fields})


@dataclass(frozen=True)
class PowerLawFit:
    a: float
    b: float
    r2: float
    constrained_sqrt_a: float
    n_used: int
    n_excluded: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def power_law_fit(points: Iterable[tuple[float, float]]) -> PowerLawFit:
    """Fit h = a * C**b on log scale, and h = k * sqrt(C) through the origin.

    Points with zero citations or zero h are dropped and counted.
    """
    pts = [(float(c), float(h)) for c, h in points]
    used = [(c, h) for c, h in pts if c > 0 and h > 0]
    if len(used) < 3:
        raise ValueError(f"power-law fit needs at least 3 points with C > 0 and h > 0, got {len(used)}")
    c = np.array([u[0] for u in used])
    h = np.array([u[1] for u in used])
    lx, ly = np.log(c), np.log(h)
    b, ln_a = np.polyfit(lx, ly, 1)
    resid = ly - (ln_a + b * lx)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    root = np.sqrt(c)
    k = float(root @ h) / float(root @ root)
    return PowerLawFit(float(math.exp(ln_a)), float(b), max(0.0, min(1.0, r2)), k,
                       len(used), len(pts) - len(used))
