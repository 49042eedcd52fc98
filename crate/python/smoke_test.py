#!/usr/bin/env python3
"""Smoke test for the divrec_py extension module.

Builds the cdylib with cargo, imports it, and exercises the target-value
math, the metrics, a re-rank call, and a full synthetic experiment run.

Usage: python3 python/smoke_test.py
"""

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def build_and_import():
    subprocess.run(
        ["cargo", "build", "-p", "divrec-py", "--release"],
        cwd=ROOT,
        check=True,
    )
    staging = Path(tempfile.mkdtemp(prefix="divrec_py_"))
    for name in ("libdivrec_py.so", "libdivrec_py.dylib", "divrec_py.dll"):
        built = ROOT / "target" / "release" / name
        if built.exists():
            shutil.copy(built, staging / "divrec_py.so")
            break
    else:
        sys.exit("built extension library not found under target/release")
    sys.path.insert(0, str(staging))
    import divrec_py

    return divrec_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    divrec_py = build_and_import()

    # Quota and metric primitives.
    assert divrec_py.quotas([0.15, 0.15, 0.15, 0.15, 0.40], 20) == [3, 3, 3, 3, 8]
    assert divrec_py.quotas([0.2, 0.3, 0.3, 0.2], 20) == [4, 6, 6, 4]
    approx(divrec_py.gini([0.15, 0.15, 0.15, 0.15, 0.40]), 0.25)
    approx(divrec_py.ild_from_counts([3, 3, 3, 3, 8]), 1 - 40 / 190)
    assert divrec_py.ild_from_counts([1]) is None
    approx(divrec_py.jsd([0.5, 0.5], [0.5, 0.5]), 0.0)
    approx(divrec_py.jsd([1.0, 0.0], [0.0, 1.0]), 1.0, tol=1e-12)

    # Normative target values for the default news NTD.
    ntv = divrec_py.ntv(divrec_py.default_ntd_json(), 20)
    approx(ntv["gini"]["sentiment"], 0.1333, tol=5e-4)
    approx(ntv["gini"]["party"], 0.25, tol=5e-4)
    approx(ntv["ild"]["sentiment"], 0.7789, tol=5e-4)
    approx(ntv["ild"]["party"], 0.7895, tol=5e-4)
    assert ntv["activation"] == 1.0 and ntv["representation"] == 1.0

    with tempfile.TemporaryDirectory(prefix="divrec_exp_") as workdir:
        config_path = divrec_py.synth_corpus(workdir, items=200, users=20, seed=3)

        # Re-rank full-pool candidates with Greedy-KL straight from Python.
        items_jsonl = (Path(workdir) / "items.jsonl").read_text()
        candidates = []
        for rank, line in enumerate(items_jsonl.splitlines()):
            row = json.loads(line)
            candidates.append((row["item_id"], 1.0 - rank / 400.0))
        reranked = divrec_py.rerank("gkl", candidates, items_jsonl, n=20)
        assert len(reranked) == 20
        assert len({item_id for item_id, _ in reranked}) == 20

        # Full pipeline: pre-processing through evaluation.
        out_dir = divrec_py.run_experiment(config_path)
        rows = divrec_py.load_report(out_dir)
        assert rows[0]["model"] == "NTV"
        approx(rows[0]["aggregate"]["gini"]["party"], 0.25)
        models = {row["model"] for row in rows}
        assert {"random", "rp3b", "drdw", "pld", "epd"} <= models

        recs = sorted((Path(out_dir) / "recommendations").glob("*.jsonl"))
        doc = json.loads(divrec_py.export_jrex(str(recs[0]), "smoke", "cards"))
        assert doc["experimentId"] == "smoke"
        assert doc["users"][0]["items"][0]["rank"] == 1

    print("divrec_py smoke test OK")


if __name__ == "__main__":
    main()
