"""Score the 50 printed manifest rows with the reference loadings and compare.

    python scripts/reproduce_top50.py [--out-dir out/top50]
"""

import argparse
import csv
from pathlib import Path

from pmindex.pipeline import emit_report, load_manifest_csv, load_weights, score_report

DATA = Path(__file__).resolve().parent.parent / "data"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="out/top50")
    args = parser.parse_args()

    report = score_report(load_manifest_csv(DATA / "top50_manifest.csv"),
                          load_weights(DATA / "published_weights.json"), "reference loadings")
    with (DATA / "top50_manifest.csv").open(newline="", encoding="utf-8") as fh:
        printed = {r["author_id"]: float(r["published_pm"]) for r in csv.DictReader(fh)}
    worst = 0.0
    for e in report.ranking.entries:
        diff = e.pm_score - printed[e.author_id]
        worst = max(worst, abs(diff))
        print(f"{e.rank:3d}  {e.author_id:24s} {e.pm_score:7.3f}  printed {printed[e.author_id]:6.2f}  {diff:+.3f}")
    print(f"max |difference| = {worst:.4f}")
    for path in emit_report(report, args.out_dir, "markdown"):
        print(path)


if __name__ == "__main__":
    main()
