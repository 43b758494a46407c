import csv
import json
from pathlib import Path

import numpy as np
import pytest

from pmindex.cfa import MANIFEST_NAMES

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"

ACCEPTANCE_LOG = []


@pytest.fixture(scope="session")
def top50_rows():
    with (DATA / "top50_manifest.csv").open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="session")
def department_hcr_rows():
    """Per-department article and citation counts, totals row last."""
    with (DATA / "department_hcr.csv").open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="session")
def published_weights_path():
    return DATA / "published_weights.json"


@pytest.fixture(scope="session")
def published_weights(published_weights_path):
    d = json.loads(published_weights_path.read_text())
    lam = np.array([d["loadings"][m] for m in MANIFEST_NAMES])
    se = np.array([d["standard_errors"][m] for m in MANIFEST_NAMES])
    return lam, se


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LOG:
        terminalreporter.write_line(line)
