"""Acceptance gate.

The committed configs are run once through the CLI (worker count 1) and every
criterion is read off the emitted CSV/JSON.  Criterion 11 repeats the runs
with worker counts 1 and 8 and compares bytes.  One PASS/FAIL line per
criterion is printed in the terminal summary.

Run alone with ``pytest tests/test_acceptance.py -v`` (a few minutes).
"""

from __future__ import annotations

import csv
import json
import math
import time
from pathlib import Path

import pytest

from horodrift import cli
from horodrift.spaces import FreeGroupTree, StarSpace, check_hyperbolicity

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

RUNS = {
    "tree_f2": ["validate-space", "drift", "hmet", "stationary", "contraction", "furstenberg", "continuity", "ldt"],
    "halfplane": ["validate-space", "drift", "hmet", "furstenberg"],
    "star": ["validate-space"],
    "ab_deterministic": ["drift", "furstenberg"],
}

REPORT: dict[int, str] = {}


def record(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    REPORT[k] = line
    print(line)


def run_all(out: Path, workers: int) -> dict[tuple[str, str], float]:
    times = {}
    for config, commands in RUNS.items():
        for command in commands:
            start = time.perf_counter()
            code = cli.main([command, "--config", str(CONFIGS / f"{config}.yaml"),
                             "--out", str(out / config), "--workers", str(workers)])
            times[config, command] = time.perf_counter() - start
            assert code == 0, f"{config} {command} exited {code}"
    return times


class Outputs:
    def __init__(self, root: Path, times: dict):
        self.root = root
        self.times = times

    def json(self, config: str, command: str) -> dict:
        stem = command.replace("-", "_")
        return json.loads((self.root / config / f"{stem}.json").read_text(encoding="utf-8"))

    def csv(self, config: str, command: str) -> list[dict]:
        stem = command.replace("-", "_")
        with open(self.root / config / f"{stem}.csv", encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def outputs(tmp_path_factory) -> Outputs:
    root = tmp_path_factory.mktemp("acceptance_a")
    return Outputs(root, run_all(root, workers=1))


def test_c01_geometry_exactness(outputs):
    results = []
    start = time.perf_counter()
    for space in (FreeGroupTree(2), StarSpace(4)):
        results.append(check_hyperbolicity(space, 0.0, 100_000, seed=2024))
    elapsed = time.perf_counter() - start
    cli_rows = [outputs.csv(c, "validate-space")[0] for c in ("tree_f2", "star")]
    worst = max([r.max_violation for r in results] + [float(r["max_violation"]) for r in cli_rows])
    ok = all(r.holds for r in results) and worst <= 0 and elapsed < 10
    record(1, ok, f"tree and star 1e5 quadruples, max violation {worst:g} at delta 0, {elapsed:.1f} s")
    assert ok


def test_c02_halfplane_calibration(outputs):
    doc = outputs.json("halfplane", "validate-space")["summary"]["four_point"]
    elapsed = outputs.times["halfplane", "validate-space"]
    ok = doc["samples"] >= 1_000_000 and doc["max_violation"] <= 0 and doc["holds"] and elapsed < 60
    record(2, ok, f"delta {doc['delta']} on {doc['samples']} fresh quadruples, "
                  f"max violation {doc['max_violation']:.4g}, {elapsed:.1f} s")
    assert ok


def test_c03_drift_oracle(outputs):
    row = outputs.csv("tree_f2", "drift")[0]
    mean = float(row["mean"])
    elapsed = outputs.times["tree_f2", "drift"]
    ok = int(row["n"]) == 2000 and int(row["trials"]) == 1000 and abs(mean - 0.5) <= 0.02 and elapsed < 60
    record(3, ok, f"F2 drift {mean:.4f} +- {float(row['half_width']):.4f} (target 0.5 +- 0.02), {elapsed:.1f} s")
    assert ok


def test_c04_hmet(outputs):
    s = outputs.json("tree_f2", "hmet")["summary"]
    ok = abs(s["plus_mean"] - 0.5) <= 0.05 and abs(s["minus_mean"] + 0.5) <= 0.05 and s["lipschitz_ok"]
    record(4, ok, f"fixed probe {s['plus_mean']:.4f} (target +0.5), own limit {s['minus_mean']:.4f} (target -0.5)")
    assert ok


def test_c05_furstenberg(outputs):
    tree = outputs.json("tree_f2", "furstenberg")["summary"]
    plane = outputs.json("halfplane", "furstenberg")["summary"]
    ab = outputs.json("ab_deterministic", "furstenberg")["summary"]
    ok = (tree["abs_difference"] <= 0.05 and plane["abs_difference"] <= 0.05 and plane["irreducible"]
          and tree["irreducible"] and ab["abs_difference"] < 1e-12)
    record(5, ok, f"|diff| F2 {tree['abs_difference']:.2g}, half-plane {plane['abs_difference']:.2g}, "
                  f"ab {ab['abs_difference']:.2g}")
    assert ok


def test_c06_contraction(outputs):
    s = outputs.json("tree_f2", "contraction")["summary"]
    c, sm = s["contraction"], s["submultiplicativity"]
    ok = c["found"] and c["n"] <= 64 and c["value"] < 1 and sm["holds"] and sm["max_total"] >= 6
    record(6, ok, f"bound {c['value']:.4f} at alpha {c['alpha']}, n {c['n']}; "
                  f"submultiplicativity {sm['checks']} exact checks m+n <= {sm['max_total']} hold: {sm['holds']}")
    assert ok


def test_c07_visual_and_comparison(outputs):
    parts = []
    ok = True
    for config in ("tree_f2", "halfplane", "star"):
        b = outputs.json(config, "validate-space")["summary"]["boundary"]
        ok &= b["samples"] >= 10_000 and b["visual_violations"] == 0 and b["comparison_violations"] == 0
        parts.append(f"{config} {b['visual_violations']}+{b['comparison_violations']}")
    record(7, ok, "certified violations in 1e4 samples: " + ", ".join(parts))
    assert ok


def test_c08_convolution(outputs):
    rows = [r for r in outputs.csv("tree_f2", "continuity") if r["kind"] == "convolution"]
    ns = {int(r["label"].rsplit("n=", 1)[1]) for r in rows}
    bad = [r["label"] for r in rows if r["violated"] == "True"]
    ok = bool(rows) and max(ns) >= 4 and not bad
    record(8, ok, f"{len(rows)} convolution inequalities on tilt pairs, n <= {max(ns)}, violations {len(bad)}")
    assert ok


def test_c09_ldt(outputs):
    fits = {f["epsilon"]: f for f in outputs.json("tree_f2", "ldt")["summary"]["fits"] if f["kind"] == "displacement"}
    rows = outputs.csv("tree_f2", "ldt")
    elapsed = outputs.times["tree_f2", "ldt"]
    f1, f2 = fits[0.1], fits[0.2]
    trials = {int(r["trials"]) for r in rows}
    ok = (f1["slope"] < 0 and f2["slope"] < 0 and f1["r2"] >= 0.9 and f2["r2"] >= 0.9
          and f2["slope"] < f1["slope"] and trials == {100_000} and elapsed < 900)
    record(9, ok, f"slopes {f1['slope']:.4g} (eps 0.1, R2 {f1['r2']:.3f}, {f1['fitted_cells']} cells), "
                  f"{f2['slope']:.4g} (eps 0.2, R2 {f2['r2']:.3f}, {f2['fitted_cells']} cells), {elapsed:.0f} s")
    assert ok


def test_c10_continuity(outputs):
    s = outputs.json("tree_f2", "continuity")["summary"]
    b1, b2 = s["bounds_by_seed"]
    rows = [r for r in outputs.csv("tree_f2", "continuity") if r["kind"] == "continuity"]
    below = all(float(r["ratio"]) <= s["bound"] for r in rows if r["included"] == "True")
    ts_ok = all(float(r["parameter"]) <= 0.05 for r in rows)
    ok = math.isfinite(b1) and math.isfinite(b2) and s["stable_within_factor_2"] and below and ts_ok
    record(10, ok, f"bound {s['bound']:.4f}; seeds give {b1:.4f} and {b2:.4f}")
    assert ok


def test_c11_determinism(outputs, tmp_path_factory):
    def snapshot(root: Path) -> dict[str, bytes]:
        return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}

    first = snapshot(outputs.root)
    second_root = tmp_path_factory.mktemp("acceptance_b")
    run_all(second_root, workers=1)
    eight_root = tmp_path_factory.mktemp("acceptance_c")
    run_all(eight_root, workers=8)
    second, eight = snapshot(second_root), snapshot(eight_root)
    differing = sorted(k for k in first if first[k] != second.get(k) or first[k] != eight.get(k))
    ok = first.keys() == second.keys() == eight.keys() and not differing
    record(11, ok, f"{len(first)} output files byte-identical across reruns and workers 1 vs 8"
                   if ok else f"differing outputs: {differing}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
