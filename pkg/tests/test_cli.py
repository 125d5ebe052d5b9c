import csv
import json
from pathlib import Path

import numpy as np
import pytest

from branchqd.cli import main
from branchqd.experiments import (
    CLUSTER_COLUMNS,
    PLATEAU_COLUMNS,
    THEOREM_COLUMNS,
    ConfigError,
    ExperimentConfig,
    load_state,
    run_plateau,
    run_theorem,
)
from branchqd.models import CMaybeSpec, analytic_cmaybe_state

DATA = Path(__file__).parent / "data"
CONFIGS = DATA / "configs"
GOLDEN = DATA / "golden"

CASES = [
    ("plateau", "plateau", ["plateau.csv"]),
    ("theorem", "theorem", ["theorem.csv", "theorem_summary.csv"]),
    ("cluster", "cluster", ["cluster.csv", "cluster_summary.csv", "cluster_points.csv"]),
    ("discord-scan", "discord_scan", ["discord_scan.csv"]),
]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run(cmd, name, out, *extra):
    rc = main([cmd, "--config", str(CONFIGS / f"{name}.json"), "--out", str(out), *extra])
    assert rc == 0


def assert_same_table(a, b, tol=1e-9):
    assert a[0] == b[0]
    assert len(a) == len(b)
    for ra, rb in zip(a[1:], b[1:]):
        for x, y in zip(ra, rb):
            try:
                assert float(x) == pytest.approx(float(y), abs=tol, rel=tol)
            except ValueError:
                assert x == y


@pytest.mark.parametrize("cmd,name,files", CASES)
def test_golden_regression(tmp_path, cmd, name, files):
    run(cmd, name, tmp_path)
    for f in files:
        assert_same_table(read_csv(tmp_path / f), read_csv(GOLDEN / name / f))


@pytest.mark.parametrize("cmd,name,files", CASES)
def test_byte_identical_reruns(tmp_path, cmd, name, files):
    run(cmd, name, tmp_path / "a")
    run(cmd, name, tmp_path / "b", "--threads", "2")
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_headers_are_documented(tmp_path):
    run("plateau", "plateau", tmp_path)
    run("theorem", "theorem", tmp_path)
    run("cluster", "cluster", tmp_path)
    assert read_csv(tmp_path / "plateau.csv")[0] == PLATEAU_COLUMNS
    assert read_csv(tmp_path / "theorem.csv")[0] == THEOREM_COLUMNS
    assert read_csv(tmp_path / "cluster.csv")[0] == CLUSTER_COLUMNS
    raw = (tmp_path / "plateau.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")


def test_seed_override_changes_haar_streams(tmp_path):
    run("theorem", "theorem", tmp_path / "a")
    run("theorem", "theorem", tmp_path / "b", "--seed", "8")
    a = read_csv(tmp_path / "a" / "theorem.csv")
    b = read_csv(tmp_path / "b" / "theorem.csv")
    assert a[1:4] == b[1:4]  # gamma rows are deterministic
    assert a[4][0] != b[4][0]


def test_props_report(tmp_path):
    run("props", "props", tmp_path)
    rep = json.loads((tmp_path / "props.json").read_text())
    s = rep["summary"]
    assert s["zero-discord"]["passed"] == s["zero-discord"]["count"] == 3
    assert s["perturbed"]["passed"] == 0
    assert s["ghz"]["passed"] == 1 and s["model"]["passed"] == 1
    gold = json.loads((GOLDEN / "props" / "props.json").read_text())
    assert rep["summary"].keys() == gold["summary"].keys()


def test_state_dump_round_trip(tmp_path):
    run("state-dump", "state_dump", tmp_path)
    st = load_state(tmp_path / "state.json")
    ref = analytic_cmaybe_state(CMaybeSpec(p=0.5, N=2, gamma=0.5, m=1))
    assert np.allclose(st.amplitudes, ref.amplitudes, atol=1e-15)
    # explicit-state model input
    cfg = tmp_path / "from_file.json"
    cfg.write_text(json.dumps({"experiment": "plateau", "model": {"state_file": str(tmp_path / "state.json")}}))
    assert main(["plateau", "--config", str(cfg), "--out", str(tmp_path / "p")]) == 0
    rows = read_csv(tmp_path / "p" / "plateau.csv")
    assert [r[2] for r in rows[1:]] == ["1", "2"]


def test_plateau_examples(tmp_path):
    cfg = ExperimentConfig("plateau", model={"p": 0.5, "N": 10, "gamma": 1.0}, output=str(tmp_path))
    rows = run_plateau(cfg)
    for r in rows:
        assert r["I_over_H_S"] == pytest.approx(2.0 if r["m"] == 10 else 1.0, abs=1e-10)
    cfg = ExperimentConfig("plateau", model={"p": 0.0, "N": 4, "gamma": 0.5}, output=str(tmp_path))
    rows = run_plateau(cfg)
    assert all(abs(r["I_SF"]) < 1e-12 and r["I_over_H_S"] == "" for r in rows)


def test_theorem_gamma_one_and_summary(tmp_path):
    cfg = ExperimentConfig("theorem", model={"p": 0.3, "N": 6, "m": 3}, sweep={"gamma": [1.0]}, output=str(tmp_path))
    rows, summary = run_theorem(cfg)
    assert all(r["eta"] < 1e-10 for r in rows)
    assert summary[0]["note"].startswith("undefined")
    cfg.sweep = {"gamma": [0.99, 0.9, 0.7]}
    rows, summary = run_theorem(cfg)
    etas = [r["eta"] for r in rows]
    assert etas[0] < etas[1] < etas[2]
    assert -1 <= summary[0]["spearman_rho"] <= 1


@pytest.mark.parametrize(
    "text,line,msg",
    [
        ('{"experiment": "plateau",\n "model": {"p": 2.0}}', 2, "model"),
        ('{"experiment": "nope"}', 1, "experiment"),
        ('{"experiment": "cluster",\n\n "sweep": {"radius": [0.1, 0.9]}}', 3, "radius"),
        ('{"experiment": "cluster",\n "sweep": {"N": []}}', 2, "grid must be nonempty"),
        ('{"experiment": "plateau",\n "colour": 1}', 2, "unknown key"),
        ('{"experiment": "plateau",\n "seed": -1}', 2, "seed"),
        ('{"experiment": "plateau",\n "discord": {"bogus": 1}}', 2, "discord"),
        ('{"experiment": "plateau",\n "model": {"p": 0.3,}', 2, "invalid JSON"),
    ],
)
def test_config_errors_are_line_precise(text, line, msg):
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_json(text, "cfg.json")
    assert str(exc.value).startswith(f"cfg.json:{line}:")
    assert msg in str(exc.value)


def test_cli_rejects_mismatched_command(tmp_path, capsys):
    rc = main(["theorem", "--config", str(CONFIGS / "plateau.json"), "--out", str(tmp_path)])
    assert rc == 2
    assert "not 'theorem'" in capsys.readouterr().err


def test_cli_missing_config(tmp_path, capsys):
    assert main(["plateau", "--config", str(tmp_path / "none.json")]) == 2
