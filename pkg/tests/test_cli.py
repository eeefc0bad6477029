import csv
import json

import pytest

from flowroute.cli import main
from flowroute.config import RunConfig, dump_config
from flowroute.layout import load_layout


@pytest.fixture
def tiny_config(tmp_path):
    cfg = RunConfig().replace(**{
        "training.phases": (10, 20, 5),
        "training.checkpoint_every": 10,
        "agent.batch_size": 16,
        "agent.trunk_units": (16,),
        "agent.head_units": 8,
        "output_dir": str(tmp_path / "runs"),
    })
    path = tmp_path / "cfg.json"
    dump_config(cfg, path)
    return path


def test_generate_writes_seeded_files(tmp_path):
    d = tmp_path / "lay"
    assert main(["generate", "--count", "3", "--seed", "40", "--layouts-dir", str(d)]) == 0
    names = sorted(p.name for p in d.iterdir())
    assert names == ["layout_40.json", "layout_41.json", "layout_42.json"]
    assert load_layout(d / "layout_41.json").seed == 41


def test_generate_refuses_overwrite(tmp_path):
    d = tmp_path / "lay"
    args = ["generate", "--count", "1", "--seed", "1", "--layouts-dir", str(d)]
    assert main(args) == 0
    assert main(args) == 1
    assert main(args + ["--force"]) == 0


def test_generate_zero_count(tmp_path):
    d = tmp_path / "lay"
    assert main(["generate", "--count", "0", "--layouts-dir", str(d)]) == 0
    assert not any(d.iterdir())


def test_usage_errors():
    assert main([]) == 1
    assert main(["nope"]) == 1
    assert main(["eval", "--policy", "random"]) == 1
    assert main(["eval", "--count", "1"]) == 1  # agent needs a checkpoint
    assert main(["sweep", "depth", "1", "2"]) == 1


def test_missing_files_are_io_errors(tmp_path):
    assert main(["eval", "--policy", "strongest", "--layouts-dir", str(tmp_path / "none")]) == 2
    assert main(["eval", "--checkpoint", str(tmp_path / "none.npz"), "--count", "1"]) == 2
    assert main(["train", "--config", str(tmp_path / "none.json")]) == 2


def test_bad_config_is_usage_error(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"env": {"neighbours": 3}}))
    assert main(["eval", "--config", str(p), "--policy", "strongest", "--count", "1"]) == 1


def test_eval_outputs_and_determinism(tmp_path):
    lay_dir = tmp_path / "lay"
    main(["generate", "--count", "4", "--seed", "7", "--layouts-dir", str(lay_dir)])
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["eval", "--policy", "best-direction", "--layouts-dir", str(lay_dir),
                     "--out", str(out), "--workers", "2" if name == "b" else "1"]) == 0
        outs.append(out)
    for f in ("summary.csv", "layouts.csv", "cdf.csv", "routes.json"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    rows = list(csv.DictReader(open(outs[0] / "layouts.csv")))
    assert [int(r["seed"]) for r in rows] == [7, 8, 9, 10]
    assert {"flow0_rate_bps", "flow2_hops"} <= set(rows[0])
    summary = next(csv.DictReader(open(outs[0] / "summary.csv")))
    assert summary["method"] == "best-direction"
    traces = json.loads((outs[0] / "routes.json").read_text())
    assert len(traces) == 4 and traces[0]["hops"][0]["hop"] == 0


def test_eval_empty_layout_list(tmp_path):
    out = tmp_path / "e"
    assert main(["eval", "--policy", "strongest", "--count", "0", "--out", str(out)]) == 0
    assert list(csv.reader(open(out / "layouts.csv")))[1:] == []


def test_train_resume_and_version_mismatch(tmp_path, tiny_config):
    run = tmp_path / "run"
    assert main(["train", "--config", str(tiny_config), "--out", str(run), "--progress", "0"]) == 0
    assert (run / "checkpoint.npz").exists() and (run / "checkpoint_0000010.npz").exists()
    assert main(["train", "--config", str(tiny_config), "--out", str(run)]) == 1  # would clobber
    assert main(["train", "--config", str(tiny_config), "--out", str(run),
                 "--checkpoint", str(run / "checkpoint_0000020.npz"), "--progress", "0"]) == 0
    steps = [int(r["step"]) for r in csv.DictReader(open(run / "metrics.csv"))]
    assert steps == sorted(steps) and steps[-1] == 35

    out = tmp_path / "ev"
    assert main(["eval", "--config", str(tiny_config), "--checkpoint", str(run / "checkpoint.npz"),
                 "--count", "2", "--out", str(out)]) == 0
    other = tmp_path / "c4.json"
    doc = json.loads(tiny_config.read_text())
    doc["env"]["neighbors"] = 4
    other.write_text(json.dumps(doc))
    assert main(["eval", "--config", str(other), "--checkpoint", str(run / "checkpoint.npz"),
                 "--count", "1"]) == 4


def test_sweep_rows(tmp_path, tiny_config):
    out = tmp_path / "w.csv"
    assert main(["sweep", "window", "2", "4", "6", "--policy", "closest-to-destination",
                 "--count", "2", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert [r["value"] for r in rows] == ["2", "4", "6"]

    out = tmp_path / "b.csv"
    assert main(["sweep", "bands", "2", "4", "--policy", "best-direction", "--count", "2",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    for r in rows:
        se = float(r["sum_rate_bps"]) / (int(r["value"]) * 5e6)
        assert float(r["spectral_efficiency"]) == pytest.approx(se, rel=2e-3)

    out = tmp_path / "l.csv"
    assert main(["sweep", "lambda", "1", "0.8", "--config", str(tiny_config), "--count", "2",
                 "--cache", str(tmp_path / "agents"), "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 2 and {"mean_hops", "mean_reprobes"} <= set(rows[0])
    assert len(list((tmp_path / "agents").iterdir())) == 2
