"""Run configuration shared by every pipeline stage."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError

G_VARIANTS = ("capped", "uncapped")
AR_VARIANTS = ("pop_all_papers", "jin_h_core")
CHI_SQUARE_MULTIPLIERS = ("n", "n-1")
RANK_METHODS = ("min", "dense")
OUTPUT_FORMATS = ("json", "csv-tables", "markdown")


@dataclass(frozen=True)
class RunConfig:
    """Knobs for index computation, CFA fitting and report emission.

    ``reference_year=None`` means "latest publication year in the dataset",
    so the newest papers get age 1.
    """

    reference_year: int | None = None
    g_variant: str = "capped"
    ar_variant: str = "pop_all_papers"
    citation_alpha: float = 2.0
    chi_square_multiplier: str = "n-1"
    tol: float = 1e-8
    max_iter: int = 500
    seed: int = 0
    rank_method: str = "min"
    output_format: str = "json"

    def __post_init__(self):
        _choice("g_variant", self.g_variant, G_VARIANTS)
        _choice("ar_variant", self.ar_variant, AR_VARIANTS)
        _choice("chi_square_multiplier", self.chi_square_multiplier, CHI_SQUARE_MULTIPLIERS)
        _choice("rank_method", self.rank_method, RANK_METHODS)
        _choice("output_format", self.output_format, OUTPUT_FORMATS)
        if self.reference_year is not None and not isinstance(self.reference_year, int):
            raise ConfigError(f"reference_year must be an integer, got {self.reference_year!r}")
        if not self.citation_alpha > 0:
            raise ConfigError("citation_alpha must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not (isinstance(self.max_iter, int) and self.max_iter >= 1):
            raise ConfigError("max_iter must be a positive integer")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")

    def multiplier(self, n: int) -> int:
        """The n or n-1 constant multiplying f_min in chi-square and SEs."""
        return n if self.chi_square_multiplier == "n" else n - 1

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**dict(data))

    def replace(self, **changes: Any) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)


def load_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return RunConfig.from_mapping(data)


def _choice(name, value, allowed):
    if value not in allowed:
        raise ConfigError(f"{name} must be one of {allowed}, got {value!r}")
