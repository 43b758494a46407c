"""Population datasets: loading, validation and serialisation.

Two on-disk layouts are supported:

* csv-pair: ``authors.csv`` (author_id, name, department, status, hcr) and
  ``publications.csv`` (author_id, pub_id, citations, pub_year, n_authors),
  UTF-8 with a header row.
* json: a single object ``{"reference_year", "source", "authors": [...]}``
  with publications nested under each author.

Row numbers in error messages are file line numbers (the header is line 1).
Duplicate publication records are taken as given.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import (
    DataValidationError,
    DuplicateAuthorError,
    InvalidAuthorCountError,
    MalformedRowError,
    NegativeCitationsError,
    OutputError,
    UnknownAuthorError,
)
from .indices import AuthorProfile, Publication, Status

AUTHOR_COLUMNS = ("author_id", "name", "department", "status", "hcr")
PUBLICATION_COLUMNS = ("author_id", "pub_id", "citations", "pub_year", "n_authors")
JSON_FORMAT_TAG = "pmindex-population"


@dataclass(frozen=True)
class PopulationDataset:
    authors: tuple[AuthorProfile, ...]
    reference_year: int | None = None
    source: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for a in self.authors:
            if a.author_id in seen:
                raise DuplicateAuthorError(f"duplicate author_id {a.author_id!r}")
            seen.add(a.author_id)

    def __len__(self):
        return len(self.authors)

    def resolved_reference_year(self, override: int | None = None) -> int | None:
        """Explicit override, else the dataset's own year, else the latest pub_year."""
        if override is not None:
            return override
        if self.reference_year is not None:
            return self.reference_year
        years = [p.pub_year for a in self.authors for p in a.publications]
        return max(years) if years else None

    def to_dict(self) -> dict:
        return {
            "format": JSON_FORMAT_TAG,
            "version": 1,
            "reference_year": self.reference_year,
            "source": dict(self.source),
            "authors": [
                {
                    "author_id": a.author_id,
                    "name": a.display_name,
                    "department": a.department,
                    "status": a.status.value,
                    "hcr": a.hcr,
                    "publications": [
                        {"pub_id": p.pub_id, "citations": p.citations,
                         "pub_year": p.pub_year, "n_authors": p.n_authors}
                        for p in a.publications
                    ],
                }
                for a in self.authors
            ],
        }


def _int_field(value, name, row, path, error=MalformedRowError) -> int:
    try:
        text = str(value).strip()
        return int(text)
    except (TypeError, ValueError):
        raise error(f"{name} must be an integer, got {value!r}", row=row, path=path) from None


def _status(value, row, path) -> Status:
    try:
        return Status(str(value).strip().lower())
    except ValueError:
        allowed = ", ".join(s.value for s in Status)
        raise MalformedRowError(f"status must be one of {allowed}, got {value!r}", row=row, path=path) from None


def _hcr(value, row, path) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes"):
        return True
    if text in ("0", "false", "no", ""):
        return False
    raise MalformedRowError(f"hcr must be 0 or 1, got {value!r}", row=row, path=path)


def _publication(rec, row, path) -> Publication:
    citations = _int_field(rec.get("citations"), "citations", row, path)
    if citations < 0:
        raise NegativeCitationsError(f"negative citations ({citations})", row=row, path=path)
    n_authors = _int_field(rec.get("n_authors"), "n_authors", row, path)
    if n_authors < 1:
        raise InvalidAuthorCountError(f"n_authors must be at least 1, got {n_authors}", row=row, path=path)
    return Publication(
        citations=citations,
        pub_year=_int_field(rec.get("pub_year"), "pub_year", row, path),
        n_authors=n_authors,
        pub_id=str(rec.get("pub_id") or ""),
    )


def _read_csv(path: Path, columns) -> list[tuple[int, dict]]:
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in columns if c not in (reader.fieldnames or [])]
            if missing:
                raise MalformedRowError(f"missing columns: {', '.join(missing)}", row=1, path=path)
            return [(reader.line_num, rec) for rec in reader]
    except OSError as exc:
        raise DataValidationError(f"cannot read: {exc}", path=path) from exc


def load_csv_pair(authors_path: str | Path, publications_path: str | Path,
                  reference_year: int | None = None) -> PopulationDataset:
    authors_path, publications_path = Path(authors_path), Path(publications_path)
    heads: dict[str, dict] = {}
    for row, rec in _read_csv(authors_path, AUTHOR_COLUMNS):
        author_id = (rec.get("author_id") or "").strip()
        if not author_id:
            raise MalformedRowError("empty author_id", row=row, path=authors_path)
        if author_id in heads:
            raise DuplicateAuthorError(f"duplicate author_id {author_id!r}", row=row, path=authors_path)
        heads[author_id] = {
            "display_name": rec.get("name") or "",
            "department": rec.get("department") or "",
            "status": _status(rec.get("status") or "faculty", row, authors_path),
            "hcr": _hcr(rec.get("hcr"), row, authors_path),
            "publications": [],
        }
    for row, rec in _read_csv(publications_path, PUBLICATION_COLUMNS):
        author_id = (rec.get("author_id") or "").strip()
        if author_id not in heads:
            raise UnknownAuthorError(f"publication refers to unknown author_id {author_id!r}",
                                     row=row, path=publications_path)
        heads[author_id]["publications"].append(_publication(rec, row, publications_path))
    authors = tuple(
        AuthorProfile(author_id=a, publications=tuple(h.pop("publications")), **h)
        for a, h in heads.items()
    )
    return PopulationDataset(authors, reference_year,
                             {"format": "csv-pair", "authors": str(authors_path),
                              "publications": str(publications_path)})


def dataset_from_dict(data: dict, path=None) -> PopulationDataset:
    if not isinstance(data, dict) or "authors" not in data:
        raise MalformedRowError("dataset JSON must be an object with an 'authors' list", path=path)
    seen = set()
    authors = []
    for i, rec in enumerate(data["authors"], start=1):
        author_id = str(rec.get("author_id", "")).strip()
        if not author_id:
            raise MalformedRowError("empty author_id", row=i, path=path)
        if author_id in seen:
            raise DuplicateAuthorError(f"duplicate author_id {author_id!r}", row=i, path=path)
        seen.add(author_id)
        pubs = tuple(_publication(p, i, path) for p in rec.get("publications", []))
        authors.append(AuthorProfile(
            author_id=author_id,
            display_name=str(rec.get("name", "")),
            department=str(rec.get("department", "")),
            status=_status(rec.get("status", "faculty"), i, path),
            hcr=_hcr(rec.get("hcr", False), i, path),
            publications=pubs,
        ))
    year = data.get("reference_year")
    return PopulationDataset(tuple(authors), None if year is None else int(year), dict(data.get("source") or {}))


def load_population(path: str | Path, format: str | None = None,
                    reference_year: int | None = None) -> PopulationDataset:
    """Load a dataset from a csv-pair directory or a JSON file.

    ``format`` is inferred when omitted: a directory means csv-pair,
    anything else JSON.
    """
    path = Path(path)
    if format is None:
        format = "csv-pair" if path.is_dir() else "json"
    if format == "csv-pair":
        return load_csv_pair(path / "authors.csv", path / "publications.csv", reference_year)
    if format != "json":
        raise ValueError(f"unknown dataset format {format!r}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataValidationError(f"cannot read: {exc}", path=path) from exc
    except json.JSONDecodeError as exc:
        raise MalformedRowError(f"invalid JSON: {exc}", path=path) from exc
    ds = dataset_from_dict(data, path)
    if reference_year is not None:
        ds = PopulationDataset(ds.authors, reference_year, ds.source)
    return ds


def save_json(dataset: PopulationDataset, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(dataset.to_dict(), indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def save_csv_pair(dataset: PopulationDataset, directory: str | Path) -> tuple[Path, Path]:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        authors_path = directory / "authors.csv"
        pubs_path = directory / "publications.csv"
        with authors_path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(AUTHOR_COLUMNS)
            for a in dataset.authors:
                w.writerow([a.author_id, a.display_name, a.department, a.status.value, int(a.hcr)])
        with pubs_path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PUBLICATION_COLUMNS)
            for a in dataset.authors:
                for p in a.publications:
                    w.writerow([a.author_id, p.pub_id, p.citations, p.pub_year, p.n_authors])
    except OSError as exc:
        raise OutputError(f"cannot write to {directory}: {exc}") from exc
    return authors_path, pubs_path
