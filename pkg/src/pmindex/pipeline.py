"""Pipeline stages (indices -> manifest -> CFA -> P-M -> analytics) and report output.

Every stage takes and returns a :class:`Report`, which serialises to JSON so
the CLI subcommands can be chained through files.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import analytics
from .cfa import (
    MANIFEST_LABELS,
    MANIFEST_NAMES,
    N_MANIFEST,
    CfaFit,
    ManifestVector,
    anderson_rubin_scores,
    fit,
    manifest_vector,
    sample_covariance,
)
from .config import RunConfig
from .dataset import PopulationDataset
from .errors import DataValidationError, InsufficientSampleError, MalformedRowError, OutputError
from .indices import IndexBundle, index_bundle
from .scoring import (
    PmRanking,
    PmWeights,
    component_score,
    per_index_ranks,
    pm_score,
    pm_weights,
    rank_population,
)

log = logging.getLogger(__name__)

REPORT_FORMAT_TAG = "pmindex-report"
MIN_FIT_SAMPLE = N_MANIFEST + 1
DESCRIPTIVE_METRICS = ("h", "g", "h_i", "ar_sum", "sqrt_ar", "n_papers", "n_citations",
                       "sqrt_articles", "sqrt_cit_over_2", "pm_score")


@dataclass
class AuthorResult:
    author_id: str
    name: str = ""
    department: str = ""
    status: str = "faculty"
    hcr: bool = False
    bundle: IndexBundle | None = None
    manifest: ManifestVector = field(default_factory=ManifestVector)
    pm_score: float | None = None
    component_score: float | None = None
    factor_score: float | None = None
    pm_rank: int | None = None
    index_ranks: tuple[int, ...] | None = None

    def row(self) -> dict[str, Any]:
        """Flat mapping used by the analytics functions."""
        d: dict[str, Any] = {"author_id": self.author_id, "department": self.department, "hcr": self.hcr}
        if self.bundle is not None:
            d.update(self.bundle.to_dict())
        d.update(self.manifest.to_dict())
        if self.pm_score is not None:
            d["pm_score"] = self.pm_score
        return d

    def to_dict(self) -> dict:
        return {
            "author_id": self.author_id,
            "name": self.name,
            "department": self.department,
            "status": self.status,
            "hcr": self.hcr,
            "bundle": None if self.bundle is None else self.bundle.to_dict(),
            "manifest": self.manifest.to_dict(),
            "pm_score": self.pm_score,
            "component_score": self.component_score,
            "factor_score": self.factor_score,
            "pm_rank": self.pm_rank,
            "index_ranks": None if self.index_ranks is None else list(self.index_ranks),
        }

    @classmethod
    def from_dict(cls, d) -> "AuthorResult":
        return cls(
            author_id=str(d["author_id"]),
            name=d.get("name", ""),
            department=d.get("department", ""),
            status=d.get("status", "faculty"),
            hcr=bool(d.get("hcr", False)),
            bundle=None if d.get("bundle") is None else IndexBundle.from_dict(d["bundle"]),
            manifest=ManifestVector(**d["manifest"]),
            pm_score=d.get("pm_score"),
            component_score=d.get("component_score"),
            factor_score=d.get("factor_score"),
            pm_rank=d.get("pm_rank"),
            index_ranks=None if d.get("index_ranks") is None else tuple(d["index_ranks"]),
        )


@dataclass
class Report:
    config: RunConfig
    reference_year: int | None
    authors: list[AuthorResult]
    cfa: CfaFit | None = None
    weights: PmWeights | None = None
    weights_source: str | None = None
    ranking: PmRanking | None = None
    groups: list[analytics.GroupSummary] = field(default_factory=list)
    population: list[analytics.GroupSummary] = field(default_factory=list)
    hcr: list[analytics.HcrSplit] = field(default_factory=list)
    power_law: analytics.PowerLawFit | None = None
    notes: list[str] = field(default_factory=list)

    def manifest_matrix(self) -> np.ndarray:
        return np.array([a.manifest.as_array() for a in self.authors]).reshape(-1, N_MANIFEST)

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT_TAG,
            "version": 1,
            "config": self.config.to_dict(),
            "reference_year": self.reference_year,
            "authors": [a.to_dict() for a in self.authors],
            "cfa": None if self.cfa is None else self.cfa.to_dict(),
            "weights": None if self.weights is None else self.weights.to_dict(),
            "weights_source": self.weights_source,
            "ranking": None if self.ranking is None else self.ranking.to_list(),
            "groups": [g.to_dict() for g in self.groups],
            "population": [g.to_dict() for g in self.population],
            "hcr": [h.to_dict() for h in self.hcr],
            "power_law": None if self.power_law is None else self.power_law.to_dict(),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d) -> "Report":
        if d.get("format") != REPORT_FORMAT_TAG:
            raise MalformedRowError("not a pmindex report (missing format tag)")
        w = d.get("weights")
        weights = None
        if w is not None:
            weights = PmWeights(w["weights"],
                                None if "loadings" not in w else np.asarray(w["loadings"], dtype=float),
                                None if "standard_errors" not in w else np.asarray(w["standard_errors"], dtype=float))
        pl = d.get("power_law")
        return cls(
            config=RunConfig.from_mapping(d["config"]),
            reference_year=d.get("reference_year"),
            authors=[AuthorResult.from_dict(a) for a in d["authors"]],
            cfa=None if d.get("cfa") is None else CfaFit.from_dict(d["cfa"]),
            weights=weights,
            weights_source=d.get("weights_source"),
            ranking=None if d.get("ranking") is None else PmRanking.from_list(d["ranking"]),
            groups=[analytics.GroupSummary.from_dict(g) for g in d.get("groups", [])],
            population=[analytics.GroupSummary.from_dict(g) for g in d.get("population", [])],
            hcr=[analytics.HcrSplit.from_dict(h) for h in d.get("hcr", [])],
            power_law=None if pl is None else analytics.PowerLawFit(**pl),
            notes=list(d.get("notes", [])),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=True) + "\n"

    def copy(self) -> "Report":
        return Report.from_dict(json.loads(self.to_json()))


def compute_indices(dataset: PopulationDataset, config: RunConfig | None = None) -> Report:
    config = config or RunConfig()
    year = dataset.resolved_reference_year(config.reference_year)
    authors = []
    for profile in sorted(dataset.authors, key=lambda a: a.author_id):
        bundle = index_bundle(profile, config, reference_year=year) if profile.publications else IndexBundle()
        authors.append(AuthorResult(
            author_id=profile.author_id,
            name=profile.display_name,
            department=profile.department,
            status=profile.status.value,
            hcr=profile.hcr,
            bundle=bundle,
            manifest=manifest_vector(bundle, config.citation_alpha),
        ))
    return Report(config=config, reference_year=year, authors=authors)


def fit_report(report: Report) -> Report:
    """Fit the CFA to the report's manifest vectors and attach factor scores."""
    n = len(report.authors)
    if n < MIN_FIT_SAMPLE:
        raise InsufficientSampleError(
            f"insufficient sample: CFA needs at least {MIN_FIT_SAMPLE} researchers, got {n}")
    x = report.manifest_matrix()
    result = fit(sample_covariance(x), report.config)
    if not result.converged:
        report.notes.append(f"CFA did not converge after {result.iterations} iterations "
                            f"(gradient max-norm {result.gradient_norm:.3g})")
    report.cfa = result
    try:
        scores = anderson_rubin_scores(result, x)
    except Exception as exc:  # diagnostics only
        report.notes.append(f"factor scores unavailable: {exc}")
    else:
        for a, s in zip(report.authors, scores):
            a.factor_score = float(s)
    return report


def load_weights(path: str | Path) -> PmWeights:
    """Read externally supplied loadings and SEs.

    Accepts ``{"loadings": [...], "standard_errors": [...]}`` in canonical
    manifest order, or the same keys holding objects keyed by manifest name.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataValidationError(f"cannot read weights: {exc}", path=path) from exc

    def column(key):
        if key not in data:
            raise MalformedRowError(f"weights file lacks {key!r}", path=path)
        v = data[key]
        if isinstance(v, dict):
            missing = [m for m in MANIFEST_NAMES if m not in v]
            if missing:
                raise MalformedRowError(f"{key} missing {', '.join(missing)}", path=path)
            v = [v[m] for m in MANIFEST_NAMES]
        if len(v) != N_MANIFEST:
            raise MalformedRowError(f"{key} needs {N_MANIFEST} values", path=path)
        return [float(x) for x in v]

    try:
        return PmWeights.from_loadings(column("loadings"), column("standard_errors"))
    except ValueError as exc:
        raise MalformedRowError(str(exc), path=path) from exc


def score_report(report: Report, weights: PmWeights | None = None, source: str | None = None) -> Report:
    """Attach P-M scores, ranks and per-index ranks.

    Without explicit ``weights`` the report's fitted CFA supplies them.
    """
    if weights is None:
        if report.cfa is None:
            raise DataValidationError("no CFA fit in report and no weights supplied")
        weights = pm_weights(report.cfa)
        source = source or "cfa"
    report.weights = weights
    report.weights_source = source or "external"
    loadings = weights.loadings if weights.loadings is not None else None
    for a in report.authors:
        a.pm_score = pm_score(a.manifest, weights)
        a.component_score = None if loadings is None else component_score(a.manifest, loadings)
    report.ranking = rank_population([(a.author_id, a.pm_score) for a in report.authors])
    ranks = report.ranking.ranks()
    index_ranks = per_index_ranks({a.author_id: a.manifest for a in report.authors}, report.config.rank_method)
    for a in report.authors:
        a.pm_rank = ranks[a.author_id]
        a.index_ranks = index_ranks[a.author_id]
    return report


def analyze_report(report: Report) -> Report:
    rows = [a.row() for a in report.authors]
    if not rows:
        return report
    metrics = [m for m in DESCRIPTIVE_METRICS if all(m in r for r in rows)]
    report.groups = analytics.group_descriptives(rows, metrics, "department")
    report.population = analytics.group_descriptives(rows, metrics, "population")
    if all("n_papers" in r for r in rows):
        report.hcr = analytics.hcr_split(rows, "department")
        points = [(r["n_citations"], r["h"]) for r in rows]
        try:
            report.power_law = analytics.power_law_fit(points)
        except ValueError as exc:
            report.notes.append(f"power-law fit skipped: {exc}")
    return report


def run_pipeline(dataset: PopulationDataset, config: RunConfig | None = None) -> Report:
    report = compute_indices(dataset, config)
    fit_report(report)
    score_report(report)
    analyze_report(report)
    return report


def manifest_report(rows: Sequence[dict], config: RunConfig | None = None) -> Report:
    """Build a report straight from manifest values (no publication data)."""
    authors = []
    for i, r in enumerate(rows, start=2):
        try:
            manifest = ManifestVector(**{m: float(r[m]) for m in MANIFEST_NAMES})
        except (KeyError, ValueError) as exc:
            raise MalformedRowError(f"bad manifest row: {exc}", row=i) from None
        authors.append(AuthorResult(
            author_id=str(r["author_id"]),
            name=r.get("name", ""),
            department=r.get("department", ""),
            status=r.get("status", "faculty") or "faculty",
            hcr=str(r.get("hcr", "0")).strip() in ("1", "true", "True"),
            manifest=manifest,
        ))
    ids = [a.author_id for a in authors]
    if len(set(ids)) != len(ids):
        raise MalformedRowError("duplicate author_id in manifest rows")
    authors.sort(key=lambda a: a.author_id)
    return Report(config=config or RunConfig(), reference_year=None, authors=authors)


def load_manifest_csv(path: str | Path, config: RunConfig | None = None) -> Report:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataValidationError(f"cannot read: {exc}", path=path) from exc
    return manifest_report(rows, config)


def load_report(path: str | Path) -> Report:
    path = Path(path)
    try:
        return Report.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataValidationError(f"cannot read report: {exc}", path=path) from exc


# ---- emission ---------------------------------------------------------------

RANKING_COLUMNS = ("University", "Author", "h-index", "2*g/3-index", "sqrt(AR)-index",
                   "hI-index", "sqrt(papers)", "sqrt(citations/2)", "P-M measure")
# manifest coordinates in the column order of the ranking table
_RANKING_ORDER = ("h", "two_g_over_3", "sqrt_ar", "h_i", "sqrt_articles", "sqrt_cit_over_2")


def _f2(x) -> str:
    return "" if x is None else f"{x:.2f}"


def _ranked_authors(report: Report) -> list[AuthorResult]:
    if report.ranking is None:
        return list(report.authors)
    by_id = {a.author_id: a for a in report.authors}
    return [by_id[e.author_id] for e in report.ranking.entries]


def ranking_rows(report: Report) -> list[list[str]]:
    rows = []
    for a in _ranked_authors(report):
        cells = [a.department, a.name or a.author_id]
        for name in _RANKING_ORDER:
            value = getattr(a.manifest, name)
            j = MANIFEST_NAMES.index(name)
            rank = "" if a.index_ranks is None else f" ({a.index_ranks[j]})"
            cells.append(_f2(value) + rank)
        pm = _f2(a.pm_score)
        cells.append(pm + ("" if a.pm_rank is None else f" ({a.pm_rank})"))
        rows.append(cells)
    return rows


AUTHOR_COLUMNS = ("author_id", "name", "department", "status", "hcr", "h", "g", "r", "ar_sum",
                  "sqrt_ar", "h_i", "n_papers", "n_citations") + MANIFEST_NAMES + (
                  "pm_score", "pm_rank", "component_score", "factor_score")


def author_rows(report: Report) -> list[list[str]]:
    rows = []
    for a in report.authors:
        b = a.bundle
        bvals = ["", "", "", "", "", "", "", ""] if b is None else [
            str(b.h), str(b.g), _f2(b.r), _f2(b.ar_sum), _f2(b.sqrt_ar), _f2(b.h_i),
            str(b.n_papers), str(b.n_citations)]
        rows.append([a.author_id, a.name, a.department, a.status, str(int(a.hcr)), *bvals,
                     *[_f2(getattr(a.manifest, m)) for m in MANIFEST_NAMES],
                     _f2(a.pm_score), "" if a.pm_rank is None else str(a.pm_rank),
                     _f2(a.component_score), _f2(a.factor_score)])
    return rows


CFA_COLUMNS = ("Manifest variable", "Unstandardized loading", "Standard error",
               "Standardized loading", "R2", "loading/SE")


def cfa_rows(report: Report) -> list[list[str]]:
    if report.cfa is None:
        if report.weights is None or report.weights.loadings is None:
            return []
        w = report.weights
        return [[label, _f2(w.loadings[j]), _f2(w.standard_errors[j]), "", "", _f2(w.weights[j])]
                for j, label in enumerate(MANIFEST_LABELS)]
    c = report.cfa
    return [[c.labels[j], _f2(c.loadings[j]), _f2(c.standard_errors[j]),
             _f2(c.standardized_loadings[j]), _f2(c.r_squared[j]),
             _f2(c.loadings[j] / c.standard_errors[j])] for j in range(len(c.labels))]


FIT_COLUMNS = ("statistic", "value")


def fit_rows(report: Report) -> list[list[str]]:
    if report.cfa is None:
        return []
    c = report.cfa
    s = c.statistics
    return [["n", str(c.n)], ["converged", str(c.converged).lower()], ["iterations", str(c.iterations)],
            ["f_min", f"{c.f_min:.6g}"], ["chi_square", _f2(s.chi_square)], ["df", str(s.df)],
            ["GFI", _f2(s.gfi)], ["NFI", _f2(s.nfi)], ["NNFI", _f2(s.nnfi)], ["CFI", _f2(s.cfi)]]


GROUP_COLUMNS = ("group", "metric", "n", "mean", "std", "median", "min", "max")


def group_rows(report: Report) -> list[list[str]]:
    rows = []
    for g in list(report.groups) + list(report.population):
        for metric, m in g.metrics.items():
            rows.append([g.label, metric, str(g.n), _f2(m.mean), _f2(m.std), _f2(m.median),
                         _f2(m.min), _f2(m.max)])
    return rows


HCR_COLUMNS = ("group", "n_total", "papers_total", "n_nonhcr", "papers_nonhcr", "pct_papers_nonhcr",
               "n_hcr", "papers_hcr", "pct_papers_hcr", "citations_total", "citations_nonhcr",
               "pct_citations_nonhcr", "citations_hcr", "pct_citations_hcr")


def hcr_rows(report: Report) -> list[list[str]]:
    splits = list(report.hcr)
    if splits:
        splits.append(analytics.total_split(splits))
    rows = []
    for s in splits:
        rows.append([s.label, str(s.n_total), str(s.papers_total), str(s.n_nonhcr), str(s.papers_nonhcr),
                     _f2(s.pct_papers_nonhcr), str(s.n_hcr), str(s.papers_hcr), _f2(s.pct_papers_hcr),
                     str(s.citations_total), str(s.citations_nonhcr), _f2(s.pct_citations_nonhcr),
                     str(s.citations_hcr), _f2(s.pct_citations_hcr)])
    return rows


def _tables(report: Report):
    return {
        "ranking": (RANKING_COLUMNS, ranking_rows(report)),
        "authors": (AUTHOR_COLUMNS, author_rows(report)),
        "cfa": (CFA_COLUMNS, cfa_rows(report)),
        "fit": (FIT_COLUMNS, fit_rows(report)),
        "groups": (GROUP_COLUMNS, group_rows(report)),
        "hcr": (HCR_COLUMNS, hcr_rows(report)),
    }


def _markdown_table(columns, rows) -> str:
    lines = ["| " + " | ".join(columns) + " |", "|" + "|".join("---" for _ in columns) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def render_markdown(report: Report) -> str:
    titles = {"ranking": "Researchers ranked by P-M measure", "cfa": "CFA loadings",
              "fit": "Fit statistics", "groups": "Group descriptives",
              "hcr": "Highly cited researchers", "authors": "Per-author indices"}
    out = io.StringIO()
    out.write("# P-M report\n\n")
    for key, (cols, rows) in _tables(report).items():
        out.write(f"## {titles[key]}\n\n")
        out.write(_markdown_table(cols, rows))
        out.write("\n")
    if report.power_law is not None:
        p = report.power_law
        out.write("## h versus citations\n\n")
        out.write(_markdown_table(("a", "b", "R2", "sqrt-law constant", "used", "excluded"),
                                  [[f"{p.a:.4f}", f"{p.b:.4f}", _f2(p.r2), f"{p.constrained_sqrt_a:.4f}",
                                    str(p.n_used), str(p.n_excluded)]]))
        out.write("\n")
    for note in report.notes:
        out.write(f"> {note}\n")
    return out.getvalue()


def emit_report(report: Report, out_dir: str | Path, format: str = "json") -> list[Path]:
    """Write the report as json, csv-tables or markdown; returns the written paths."""
    out_dir = Path(out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if format == "json":
            path = out_dir / "report.json"
            path.write_text(report.to_json(), encoding="utf-8")
            written.append(path)
        elif format == "csv-tables":
            for key, (cols, rows) in _tables(report).items():
                path = out_dir / f"{key}.csv"
                with path.open("w", newline="", encoding="utf-8") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(cols)
                    w.writerows(rows)
                written.append(path)
        elif format == "markdown":
            path = out_dir / "report.md"
            path.write_text(render_markdown(report), encoding="utf-8")
            written.append(path)
        else:
            raise ValueError(f"unknown report format {format!r}")
    except OSError as exc:
        raise OutputError(f"cannot write report to {out_dir}: {exc}") from exc
    return written
