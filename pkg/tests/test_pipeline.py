import csv
import json

import numpy as np
import pytest

from pmindex import cli
from pmindex.config import RunConfig
from pmindex.dataset import PopulationDataset, save_csv_pair, save_json
from pmindex.errors import InsufficientSampleError, SingularCovarianceError
from pmindex.indices import AuthorProfile, Publication
from pmindex.pipeline import (
    RANKING_COLUMNS,
    Report,
    compute_indices,
    emit_report,
    fit_report,
    load_manifest_csv,
    load_weights,
    render_markdown,
    run_pipeline,
    score_report,
)
from pmindex.synth import SynthConfig, generate_synthetic


@pytest.fixture(scope="module")
def synthetic500():
    return generate_synthetic(SynthConfig(n=500, seed=2))


@pytest.fixture(scope="module")
def report500(synthetic500):
    return run_pipeline(synthetic500, RunConfig(reference_year=2008))


def test_end_to_end_synthetic(report500):
    c = report500.cfa
    assert c.converged
    assert c.cfi > 0.95
    assert np.all(c.loadings > 0)
    assert [a.author_id for a in report500.authors] == sorted(a.author_id for a in report500.authors)
    assert {e.rank for e in report500.ranking.entries} >= {1}
    assert report500.power_law is not None and report500.hcr


def test_identical_runs_are_byte_identical(synthetic500, report500, tmp_path):
    again = run_pipeline(synthetic500, RunConfig(reference_year=2008))
    assert again.to_json() == report500.to_json()
    for fmt in ("json", "csv-tables", "markdown"):
        a = emit_report(report500, tmp_path / "a" / fmt, fmt)
        b = emit_report(again, tmp_path / "b" / fmt, fmt)
        assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]


def test_json_reload_equals_report(report500, tmp_path):
    (path,) = emit_report(report500, tmp_path, "json")
    back = Report.from_dict(json.loads(path.read_text()))
    assert back.to_dict() == report500.to_dict()


def test_markdown_ranking_header(report500):
    md = render_markdown(report500)
    assert "| " + " | ".join(RANKING_COLUMNS) + " |" in md


def test_empty_report_writes_headers_only(tmp_path):
    report = Report(config=RunConfig(), reference_year=None, authors=[])
    paths = emit_report(report, tmp_path, "csv-tables")
    for p in paths:
        rows = list(csv.reader(p.open()))
        assert len(rows) == 1
    with open(tmp_path / "ranking.csv") as fh:
        assert next(csv.reader(fh)) == list(RANKING_COLUMNS)
    (md,) = emit_report(report, tmp_path, "markdown")
    assert " | ".join(RANKING_COLUMNS) in md.read_text()
    (js,) = emit_report(report, tmp_path, "json")
    assert json.loads(js.read_text())["authors"] == []


def test_small_population_cannot_be_fitted():
    ds = generate_synthetic(SynthConfig(n=6))
    with pytest.raises(InsufficientSampleError, match="insufficient sample"):
        run_pipeline(ds)


def test_constant_column_is_singular():
    # every author has one paper with one citation: several manifest columns are constant
    authors = tuple(AuthorProfile(f"a{i}", publications=(Publication(1 + i % 2, 2000),)) for i in range(20))
    with pytest.raises(SingularCovarianceError, match="constant columns"):
        run_pipeline(PopulationDataset(authors, 2008))


def test_published_table_via_weights(top50_rows, published_weights_path, tmp_path):
    path = tmp_path / "m.csv"
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(top50_rows[0]))
        w.writeheader()
        w.writerows(top50_rows)
    report = score_report(load_manifest_csv(path), load_weights(published_weights_path), "published")
    published = {r["author_id"]: float(r["published_pm"]) for r in top50_rows}
    for a in report.authors:
        assert a.pm_score == pytest.approx(published[a.author_id], abs=0.06)
    assert report.ranking.entries[0].author_id == "donoho-d-l"


def test_list_form_weights(tmp_path, published_weights):
    lam, se = published_weights
    path = tmp_path / "w.json"
    path.write_text(json.dumps({"loadings": lam.tolist(), "standard_errors": se.tolist()}))
    assert load_weights(path).weights == pytest.approx(lam / se)


def test_stagewise_equals_one_shot(tmp_path):
    ds = generate_synthetic(SynthConfig(n=60, seed=8))
    cfg = RunConfig(reference_year=2008)
    staged = compute_indices(ds, cfg).copy()
    staged = score_report(fit_report(staged.copy()).copy())
    one = run_pipeline(ds, cfg)
    assert [a.pm_score for a in staged.authors] == [a.pm_score for a in one.authors]


# ---- command line


@pytest.fixture(scope="module")
def dataset_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    ds = generate_synthetic(SynthConfig(n=80, seed=6))
    save_json(ds, root / "ds.json")
    save_csv_pair(ds, root / "pair")
    return root


def test_cli_stage_chain(dataset_files, tmp_path):
    root = dataset_files
    assert cli.main(["indices", "--dataset", str(root / "ds.json"), "-o", str(tmp_path / "i.json")]) == 0
    assert cli.main(["fit", str(tmp_path / "i.json"), "-o", str(tmp_path / "f.json")]) == 0
    assert cli.main(["score", str(tmp_path / "f.json"), "-o", str(tmp_path / "s.json")]) == 0
    assert cli.main(["report", str(tmp_path / "s.json"), "--format", "markdown", "--out-dir", str(tmp_path)]) == 0
    staged = json.loads((tmp_path / "s.json").read_text())
    assert staged["cfa"]["converged"]
    direct = run_pipeline(generate_synthetic(SynthConfig(n=80, seed=6)), RunConfig())
    assert [a["pm_score"] for a in staged["authors"]] == pytest.approx([a.pm_score for a in direct.authors])
    assert (tmp_path / "report.md").exists()


def test_cli_report_from_csv_pair(dataset_files, tmp_path):
    root = dataset_files
    rc = cli.main(["report", "--authors", str(root / "pair" / "authors.csv"),
                   "--publications", str(root / "pair" / "publications.csv"),
                   "--format", "csv-tables", "--out-dir", str(tmp_path), "--reference-year", "2008"])
    assert rc == 0
    assert (tmp_path / "ranking.csv").exists()


def test_cli_score_manifest_csv(top50_rows, published_weights_path, tmp_path):
    from conftest import DATA

    out = tmp_path / "s.json"
    rc = cli.main(["score", "--manifest-csv", str(DATA / "top50_manifest.csv"),
                   "--weights-file", str(published_weights_path), "-o", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["ranking"][0]["author_id"] == "donoho-d-l"


def test_cli_config_file_and_override(dataset_files, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"g_variant": "uncapped", "reference_year": 2001}))
    out = tmp_path / "i.json"
    rc = cli.main(["indices", "--dataset", str(dataset_files / "ds.json"), "--config", str(cfg),
                   "--reference-year", "2008", "-o", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert d["config"]["g_variant"] == "uncapped"
    assert d["reference_year"] == 2008


def test_cli_synth(tmp_path):
    assert cli.main(["synth", "--n", "5", "--seed", "1", "-o", str(tmp_path / "x.json"),
                     "--csv-dir", str(tmp_path / "pair")]) == 0
    assert len(json.loads((tmp_path / "x.json").read_text())["authors"]) == 5
    assert (tmp_path / "pair" / "publications.csv").exists()


@pytest.mark.parametrize("argv, code", [
    (["indices", "--dataset", "/nonexistent/ds.json"], 3),
    (["fit", "SMALL"], 4),
    (["indices", "--dataset", "DS", "--config", "BADCFG"], 2),
    (["report", "DS_REPORT", "--out-dir", "/proc/forbidden"], 5),
])
def test_cli_exit_codes(argv, code, tmp_path, dataset_files, capsys):
    small = tmp_path / "small.json"
    cli.main(["indices", "--dataset", str(dataset_files / "ds.json"), "-o", str(tmp_path / "full.json")])
    d = json.loads((tmp_path / "full.json").read_text())
    d["authors"] = d["authors"][:4]
    small.write_text(json.dumps(d))
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text(json.dumps({"g_variant": "sideways"}))
    subst = {"SMALL": str(small), "DS": str(dataset_files / "ds.json"), "BADCFG": str(bad_cfg),
             "DS_REPORT": str(tmp_path / "full.json")}
    assert cli.main([subst.get(a, a) for a in argv]) == code
    assert "pmindex: error:" in capsys.readouterr().err
