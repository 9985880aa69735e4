import csv
import json
from pathlib import Path

import pytest
import yaml

from horodrift import cli
from horodrift.config import load_config, parse_config
from horodrift.errors import ConfigError

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

SMALL = {
    "name": "small",
    "seed": 3,
    "space": {"kind": "tree", "rank": 2},
    "measures": {
        "uniform": {"atoms": ["a", "A", "b", "B"], "weights": [0.25] * 4, "lambda": 2.5},
        "ab": {"atoms": ["ab"], "weights": [1.0]},
    },
    "base_measure": "uniform",
    "experiments": {
        "validate_space": {"quadruples": 2000, "boundary_samples": 200},
        "drift": {"n": [50, 100], "trials": 200},
        "hmet": {"n": 100, "trials": 200, "probe": "(b)"},
        "stationary": {"n": 20, "trials": 300, "starts": ["(a)", "(b)"]},
        "furstenberg": {"n": 20, "trials": 300, "start": "(a)", "drift_n": 100, "drift_trials": 200},
        "ldt": {"epsilons": [0.2], "n_grid": [20, 40], "trials": 2000},
    },
}


def write(tmp_path, data, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data), encoding="utf-8")
    return p


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def test_shipped_configs_parse():
    for path in sorted(CONFIGS.glob("*.yaml")):
        cfg = load_config(path)
        cfg.build()


def test_validate_space_tree(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["validate-space", "--config", str(write(tmp_path, SMALL)), "--out", str(out)]) == 0
    rows = read_csv(out / "validate_space.csv")
    four = next(r for r in rows if r["check"] == "four_point")
    assert float(four["max_violation"]) <= 0
    assert {r["check"] for r in rows} == {"four_point", "visual_ratio", "comparison"}


def test_drift_ab(tmp_path):
    out = tmp_path / "out"
    cfg = CONFIGS / "ab_deterministic.yaml"
    assert cli.main(["drift", "--config", str(cfg), "--out", str(out), "--workers", "1"]) == 0
    row = read_csv(out / "drift.csv")[0]
    assert float(row["mean"]) == 2.0
    doc = json.loads((out / "drift.json").read_text(encoding="utf-8"))
    assert doc["seed"] == 5 and doc["config_hash"] == row["config_hash"]


@pytest.mark.parametrize(
    "patch",
    [
        lambda d: d["measures"]["uniform"].update(weights=[0.25, 0.25, 0.25, 0.15]),  # sums to 0.9
        lambda d: d.update(unknown_key=1),
        lambda d: d.update(base_measure="missing"),
        lambda d: d["space"].update(kind="sphere"),
        lambda d: d["measures"]["uniform"].update(atoms=["a", "A", "b", "c"]),
        lambda d: d["space"].update(kind="halfplane", delta=0.2),
    ],
)
def test_malformed_config_exit_2(tmp_path, patch, capsys):
    data = json.loads(json.dumps(SMALL))
    patch(data)
    code = cli.main(["drift", "--config", str(write(tmp_path, data)), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "configuration error" in capsys.readouterr().err
    assert not (tmp_path / "o" / "drift.csv").exists()


def test_missing_config_and_section(tmp_path):
    assert cli.main(["drift", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == 2
    data = json.loads(json.dumps(SMALL))
    del data["experiments"]["hmet"]
    assert cli.main(["hmet", "--config", str(write(tmp_path, data)), "--out", str(tmp_path)]) == 2


def test_parse_config_errors():
    with pytest.raises(ConfigError):
        parse_config({"name": "x"})


def test_violation_exit_1(tmp_path, monkeypatch):
    monkeypatch.setitem(cli.HANDLERS, "drift", lambda ctx: cli.Result([{"x": 1}], {}, ["certified failure"]))
    assert cli.main(["drift", "--config", str(write(tmp_path, SMALL)), "--out", str(tmp_path / "o")]) == 1


def test_all_is_byte_identical(tmp_path):
    cfg = write(tmp_path, SMALL)
    runs = []
    for i, workers in enumerate(("1", "1", "3")):
        out = tmp_path / f"run{i}"
        assert cli.main(["all", "--config", str(cfg), "--out", str(out), "--workers", workers]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert runs[0] == runs[1] == runs[2]
    names = set(runs[0])
    assert {"drift.csv", "hmet.json", "ldt.csv", "stationary.csv", "furstenberg.json"} <= names
    assert not any(n.endswith(".tmp") for n in names)


def test_seed_override(tmp_path):
    cfg = write(tmp_path, SMALL)
    cli.main(["drift", "--config", str(cfg), "--out", str(tmp_path / "a")])
    cli.main(["drift", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "99"])
    a = json.loads((tmp_path / "a" / "drift.json").read_text())
    b = json.loads((tmp_path / "b" / "drift.json").read_text())
    assert (a["seed"], b["seed"]) == (3, 99)
    assert a["config_hash"] != b["config_hash"]


def test_csv_header_and_json_key_order(tmp_path):
    out = tmp_path / "o"
    cli.main(["drift", "--config", str(write(tmp_path, SMALL)), "--out", str(out)])
    text = (out / "drift.csv").read_text(encoding="utf-8")
    assert text.splitlines()[0].split(",")[-2:] == ["config_hash", "seed"]
    raw = (out / "drift.json").read_text(encoding="utf-8")
    doc = json.loads(raw)
    assert list(doc) == sorted(doc)
