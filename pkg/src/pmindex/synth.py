"""Seeded synthetic populations drawn from the one-factor model.

Manifest vectors are drawn from x = mean + L xi + delta and then mapped back
onto publication lists whose h, g, paper and citation counts hit the drawn
targets exactly (after projection onto the feasible region); the age-weighted
sum and the co-authorship index are matched up to integer rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cfa import draw_manifest
from .dataset import PopulationDataset
from .errors import ConfigError
from .indices import AuthorProfile, Publication, Status

# loadings and R^2 of the statistics-department fit; error variances follow
# from theta = lambda^2 (1 - R^2) / R^2
REFERENCE_LOADINGS = (8.15, 16.89, 3.47, 6.85, 4.07, 18.43)
REFERENCE_R_SQUARED = (0.79, 0.99, 0.65, 0.82, 0.61, 0.99)
REFERENCE_ERROR_VARIANCES = tuple(l * l * (1 - r) / r for l, r in zip(REFERENCE_LOADINGS, REFERENCE_R_SQUARED))
# centred well inside the region where the six indicators are mutually consistent
DEFAULT_MEANS = (30.0, 60.0, 12.0, 24.0, 22.0, 76.0)
MAX_AGE = 70
MAX_MEAN_AUTHORS = 20


@dataclass(frozen=True)
class SynthConfig:
    n: int = 238
    loadings: tuple[float, ...] = REFERENCE_LOADINGS
    error_variances: tuple[float, ...] = REFERENCE_ERROR_VARIANCES
    means: tuple[float, ...] = DEFAULT_MEANS
    factor_variance: float = 1.0
    citation_alpha: float = 2.0
    reference_year: int = 2008
    departments: tuple[str, ...] = ("Dept A", "Dept B", "Dept C", "Dept D")
    hcr_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ConfigError("population size must be nonnegative")
        if not (len(self.loadings) == len(self.error_variances) == len(self.means) == 6):
            raise ConfigError("loadings, error variances and means need 6 entries each")
        if any(t <= 0 for t in self.error_variances):
            raise ConfigError("error variances must be positive")
        if not self.factor_variance > 0 or not self.citation_alpha > 0:
            raise ConfigError("factor variance and citation alpha must be positive")
        if not 0 <= self.hcr_fraction <= 1:
            raise ConfigError("hcr_fraction must lie in [0, 1]")
        if not self.departments:
            raise ConfigError("need at least one department label")


@dataclass(frozen=True)
class Targets:
    h: int
    g: int
    n_papers: int
    n_citations: int
    ar_sum: float
    h_i: float


def project_targets(x, citation_alpha: float = 2.0) -> Targets:
    """Round a drawn manifest vector and clip it to a realisable index set."""
    h_x, g23, hi_x, sar, sqn, sqc = (float(v) for v in x)
    n = max(1, round(max(sqn, 0.0) ** 2))
    h = min(max(round(h_x), 0), n)
    if h == 0:
        return Targets(0, 0, n, 0, 0.0, 0.0)
    g = min(max(round(1.5 * g23), h), n)
    c = round(citation_alpha * max(sqc, 0.0) ** 2)
    c_hi = c if g == n else g * g + (n - g) * h
    c = min(max(c, g * g), c_hi)
    ar = min(max(sar, 0.0) ** 2, float(c))
    ar = max(ar, c / MAX_AGE)
    h_i = min(max(hi_x, h / MAX_MEAN_AUTHORS), float(h))
    return Targets(h, g, n, c, ar, h_i)


def _spread(total: int, weights: np.ndarray, cap: int | None = None) -> np.ndarray:
    """Integer allocation of ``total`` proportional to weights (largest remainder), optionally capped."""
    k = len(weights)
    if k == 0:
        return np.zeros(0, dtype=int)
    out = np.zeros(k, dtype=int)
    remaining = total
    free = np.ones(k, dtype=bool)
    while remaining > 0 and free.any():
        w = np.where(free, weights, 0.0)
        share = remaining * w / w.sum()
        add = np.floor(share).astype(int)
        rem = remaining - add.sum()
        order = np.argsort(-(share - add), kind="stable")
        add[order[:rem]] += 1
        if cap is not None:
            add = np.minimum(add, cap - out)
        out += add
        remaining = total - out.sum()
        if cap is not None:
            free &= out < cap
        if add.sum() == 0:
            break
    return out


def citation_profile(t: Targets, rng: np.random.Generator) -> list[int]:
    """Descending citation counts with exactly the target h, g, N and total."""
    n, h, g, c = t.n_papers, t.h, t.g, t.n_citations
    if h == 0:
        return [0] * n
    excess = c - g * g
    # papers ranked below g absorb the excess, none above h each
    deep = _spread(excess, np.linspace(1.0, 0.05, n - g) ** 2, cap=h) if g < n else np.zeros(0, dtype=int)
    deep = np.sort(deep)[::-1]
    top_deep = int(deep[0]) if len(deep) else 0
    middle = np.linspace(h, top_deep, g - h + 2)[1:-1] if g > h else np.zeros(0)
    middle = np.minimum(np.round(middle).astype(int), h)
    head_total = c - int(middle.sum()) - int(deep.sum())
    zipf = 1.0 / np.arange(1, h + 1) ** rng.uniform(0.6, 1.2)
    head = h + _spread(head_total - h * h, zipf)
    return sorted(head.tolist(), reverse=True) + middle.tolist() + deep.tolist()


def _ages(citations: list[int], target_ar: float, rng: np.random.Generator) -> np.ndarray:
    base = rng.uniform(1.0, 30.0, size=len(citations))
    cites = np.asarray(citations, dtype=float)

    def ar_for(k):
        return float(np.sum(cites / np.clip(np.round(base * k), 1, MAX_AGE)))

    lo, hi = 1e-3, 1e3
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if ar_for(mid) > target_ar:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda k: abs(ar_for(k) - target_ar))
    ages = np.clip(np.round(base * best), 1, MAX_AGE).astype(int)
    # one-year nudges on individual papers close most of the rounding gap
    gap = float(np.sum(cites / ages)) - target_ar
    close = 1e-6 * max(target_ar, 1.0)
    for _ in range(3):
        for i in np.argsort(-cites, kind="stable"):
            if cites[i] == 0 or abs(gap) < close:
                break
            for step in (1, -1):
                a = ages[i] + step
                if not 1 <= a <= MAX_AGE:
                    continue
                new_gap = gap + cites[i] / a - cites[i] / ages[i]
                if abs(new_gap) < abs(gap):
                    ages[i], gap = a, new_gap
                    break
    return ages


def _author_counts(n: int, h: int, h_i: float, rng: np.random.Generator) -> np.ndarray:
    counts = rng.integers(1, 6, size=n)
    if h > 0:
        total = max(h, round(h * h / h_i)) if h_i > 0 else h
        per = np.full(h, total // h)
        per[: total % h] += 1
        counts[:h] = rng.permutation(per)
    return counts


def publications_for(t: Targets, reference_year: int, rng: np.random.Generator,
                     prefix: str = "") -> tuple[Publication, ...]:
    cites = citation_profile(t, rng)
    ages = _ages(cites, t.ar_sum, rng) if t.n_citations > 0 else rng.integers(1, 30, size=len(cites))
    authors = _author_counts(len(cites), t.h, t.h_i, rng)
    return tuple(
        Publication(citations=int(c), pub_year=int(reference_year - a), n_authors=int(k),
                    pub_id=f"{prefix}p{j:04d}")
        for j, (c, a, k) in enumerate(zip(cites, ages, authors))
    )


def generate_manifest(config: SynthConfig) -> np.ndarray:
    """The drawn (pre-projection) manifest matrix for ``config``."""
    rng = np.random.default_rng(config.seed)
    return draw_manifest(config.loadings, config.error_variances, config.n, rng,
                         means=config.means, factor_variance=config.factor_variance)


def generate_synthetic(config: SynthConfig) -> PopulationDataset:
    """Deterministic synthetic population; same config and seed give the same dataset."""
    x = generate_manifest(config)
    rng = np.random.default_rng([config.seed, 1])
    width = max(3, len(str(config.n)))
    scores = x @ np.asarray(config.loadings) if config.n else np.zeros(0)
    n_hcr = int(round(config.hcr_fraction * config.n))
    hcr_ids = set(np.argsort(-scores, kind="stable")[:n_hcr].tolist())
    statuses = [s for s in Status]
    authors = []
    for i in range(config.n):
        author_id = f"a{i:0{width}d}"
        t = project_targets(x[i], config.citation_alpha)
        authors.append(AuthorProfile(
            author_id=author_id,
            display_name=f"Researcher {i}",
            department=config.departments[i % len(config.departments)],
            status=Status.FACULTY if rng.random() < 0.7 else statuses[int(rng.integers(1, len(statuses)))],
            hcr=i in hcr_ids,
            publications=publications_for(t, config.reference_year, rng, prefix=f"{author_id}-"),
        ))
    return PopulationDataset(tuple(authors), config.reference_year,
                             {"format": "synthetic", "seed": config.seed, "n": config.n})
