"""Single-number citation indices computed from a researcher's publication list.

All functions are pure. The h-core is the top-h papers after a stable sort by
citations descending, so ties at the threshold resolve to the earlier paper
in input order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .config import RunConfig


class Status(str, Enum):
    FACULTY = "faculty"
    JOINT = "joint"
    COURTESY = "courtesy"
    ADJUNCT = "adjunct"
    EMERITUS = "emeritus"
    CONSULTING = "consulting"
    RETIRED = "retired"


@dataclass(frozen=True)
class Publication:
    citations: int
    pub_year: int
    n_authors: int = 1
    pub_id: str = ""

    def age(self, reference_year: int) -> int:
        return max(1, reference_year - self.pub_year)


@dataclass(frozen=True)
class AuthorProfile:
    author_id: str
    display_name: str = ""
    department: str = ""
    status: Status = Status.FACULTY
    hcr: bool = False
    publications: tuple[Publication, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class IndexBundle:
    h: int = 0
    g: int = 0
    r: float = 0.0
    ar_sum: float = 0.0
    sqrt_ar: float = 0.0
    h_i: float = 0.0
    n_papers: int = 0
    n_citations: int = 0

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "g": self.g,
            "r": self.r,
            "ar_sum": self.ar_sum,
            "sqrt_ar": self.sqrt_ar,
            "h_i": self.h_i,
            "n_papers": self.n_papers,
            "n_citations": self.n_citations,
        }

    @classmethod
    def from_dict(cls, d) -> "IndexBundle":
        return cls(
            h=int(d["h"]),
            g=int(d["g"]),
            r=float(d["r"]),
            ar_sum=float(d["ar_sum"]),
            sqrt_ar=float(d["sqrt_ar"]),
            h_i=float(d["h_i"]),
            n_papers=int(d["n_papers"]),
            n_citations=int(d["n_citations"]),
        )


def h_index(citations: Iterable[int]) -> int:
    ranked = sorted(citations, reverse=True)
    h = 0
    for k, c in enumerate(ranked, start=1):
        if c < k:
            break
        h = k
    return h


def g_index(citations: Iterable[int], variant: str = "capped") -> int:
    """Largest g whose top-g papers jointly hold at least g**2 citations.

    ``uncapped`` pads the list with zero-citation papers, so g may exceed
    the number of papers.
    """
    ranked = sorted(citations, reverse=True)
    g = 0
    total = 0
    for k, c in enumerate(ranked, start=1):
        total += c
        if total >= k * k:
            g = k
    if variant == "capped":
        return g
    if variant != "uncapped":
        raise ValueError(f"unknown g variant {variant!r}")
    # zero-citation padding keeps the total fixed, so g = floor(sqrt(total))
    # once it exceeds the number of real papers
    return max(g, math.isqrt(total)) if total >= len(ranked) ** 2 else g


def _h_core(pubs: Sequence[Publication]) -> list[Publication]:
    ranked = sorted(pubs, key=lambda p: -p.citations)
    return ranked[: h_index(p.citations for p in pubs)]


def r_index(citations: Iterable[int]) -> float:
    ranked = sorted(citations, reverse=True)
    h = h_index(ranked)
    return math.sqrt(sum(ranked[:h]))


def ar_sum(pubs: Sequence[Publication], reference_year: int, variant: str = "pop_all_papers") -> float:
    """Age-weighted citation sum, before the square root.

    ``pop_all_papers`` sums over every paper (the Publish-or-Perish flavour),
    ``jin_h_core`` only over the h-core.
    """
    if variant == "pop_all_papers":
        chosen = pubs
    elif variant == "jin_h_core":
        chosen = _h_core(pubs)
    else:
        raise ValueError(f"unknown AR variant {variant!r}")
    return float(sum(p.citations / p.age(reference_year) for p in chosen))


def sqrt_ar(pubs: Sequence[Publication], reference_year: int, variant: str = "pop_all_papers") -> float:
    return math.sqrt(ar_sum(pubs, reference_year, variant))


def hi_index(pubs: Sequence[Publication]) -> float:
    """h divided by the mean author count over the h-core; 0 when h is 0."""
    core = _h_core(pubs)
    h = len(core)
    if h == 0:
        return 0.0
    total_authors = sum(p.n_authors for p in core)
    return h * h / total_authors


def index_bundle(profile: AuthorProfile, config: RunConfig | None = None,
                 reference_year: int | None = None) -> IndexBundle:
    config = config or RunConfig()
    pubs = profile.publications
    if not pubs:
        return IndexBundle()
    year = reference_year if reference_year is not None else config.reference_year
    if year is None:
        year = max(p.pub_year for p in pubs)
    cites = [p.citations for p in pubs]
    ar = ar_sum(pubs, year, config.ar_variant)
    return IndexBundle(
        h=h_index(cites),
        g=g_index(cites, config.g_variant),
        r=r_index(cites),
        ar_sum=ar,
        sqrt_ar=math.sqrt(ar),
        h_i=hi_index(pubs),
        n_papers=len(pubs),
        n_citations=sum(cites),
    )
