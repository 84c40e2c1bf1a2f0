import json

import numpy as np
import pytest

from cnmf import SynthConfig, gen_separable
from cnmf.cli import main
from cnmf.io import read_matrix_csv, write_matrix_csv


def run(*argv):
    return main(list(argv))


@pytest.fixture()
def instance_dir(tmp_path):
    out = tmp_path / "inst"
    code = run(
        "gen",
        "--out",
        str(out),
        "--N",
        "20",
        "--T",
        "90",
        "--K",
        "2",
        "--L",
        "3",
        "--p",
        "0.75",
        "--seed",
        "1",
    )
    assert code == 0
    return out


def test_gen_writes_instance(instance_dir):
    x = read_matrix_csv(instance_dir / "X.csv")
    assert x.shape == (20, 90)
    h = read_matrix_csv(instance_dir / "H.csv")
    assert h.shape == (2, 90)
    assert (instance_dir / "W_3.csv").exists()
    meta = json.loads((instance_dir / "meta.json").read_text())
    assert meta["config"]["T"] == 90
    assert meta["delta"] > 0
    assert len(meta["anchors"]["t"]) == 2


def test_gen_from_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "N": 18,
                "T": 90,
                "K": 2,
                "L": 3,
                "p": 0.7,
                "seed": 3,
                "noise": {"kind": "uniform", "beta": 0.01, "seed": 5},
            }
        )
    )
    out = tmp_path / "inst"
    assert run("gen", "--config", str(cfg), "--out", str(out)) == 0
    assert (out / "X_noisy.csv").exists()
    xn = read_matrix_csv(out / "X_noisy.csv")
    x = read_matrix_csv(out / "X.csv")
    assert (xn >= x).all()
    meta = json.loads((out / "meta.json").read_text())
    assert meta["noise"]["beta"] == 0.01


def test_gen_missing_field_is_usage_error(tmp_path):
    code = run("gen", "--out", str(tmp_path / "x"), "--N", "10", "--K", "2", "--L", "2")
    assert code == 2


def test_gen_deterministic(tmp_path):
    args = ["--N", "16", "--T", "80", "--K", "2", "--L", "3", "--seed", "9"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("gen", "--out", str(a), *args) == 0
    assert run("gen", "--out", str(b), *args) == 0
    assert (a / "X.csv").read_bytes() == (b / "X.csv").read_bytes()
    assert (a / "meta.json").read_bytes() == (b / "meta.json").read_bytes()


def test_fit_lecs_exact(tmp_path, instance_dir):
    out = tmp_path / "fit"
    code = run(
        "fit",
        str(instance_dir / "X.csv"),
        "--alg",
        "lecs",
        "--K",
        "2",
        "--L",
        "3",
        "--t-sweep",
        "--out",
        str(out),
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["relMse"] <= 1e-9
    assert report["algorithm"] == "lecs"
    assert "chosenT" in report
    assert (out / "H.csv").exists()
    assert (out / "W_1.csv").exists() and (out / "W_3.csv").exists()
    assert (out / "factors.png").exists()


def test_fit_baseline_with_warm_start(tmp_path, instance_dir):
    lecs_out = tmp_path / "lecs"
    assert (
        run(
            "fit",
            str(instance_dir / "X.csv"),
            "--alg",
            "lecs",
            "--K",
            "2",
            "--L",
            "3",
            "--out",
            str(lecs_out),
            "--no-figures",
        )
        == 0
    )
    out = tmp_path / "anls"
    code = run(
        "fit",
        str(instance_dir / "X.csv"),
        "--alg",
        "anls",
        "--K",
        "2",
        "--L",
        "3",
        "--iters",
        "2",
        "--init",
        str(lecs_out),
        "--out",
        str(out),
        "--no-figures",
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    # warm start from an exact fit keeps the loss at the floor
    assert report["lossTrace"][0] <= 1e-9
    assert report["relMse"] <= 1e-9


def test_fit_mult_writes_loss_figure(tmp_path, instance_dir):
    out = tmp_path / "mult"
    code = run(
        "fit",
        str(instance_dir / "X.csv"),
        "--alg",
        "mult",
        "--K",
        "2",
        "--L",
        "3",
        "--iters",
        "5",
        "--out",
        str(out),
    )
    assert code == 0
    assert (out / "loss.png").exists()
    report = json.loads((out / "report.json").read_text())
    assert len(report["lossTrace"]) == 6


def test_fit_missing_file_exit_2(tmp_path):
    code = run(
        "fit",
        str(tmp_path / "nope.csv"),
        "--alg",
        "lecs",
        "--K",
        "2",
        "--L",
        "2",
        "--out",
        str(tmp_path / "o"),
    )
    assert code == 2


def test_fit_unknown_alg_exit_2(tmp_path):
    code = run(
        "fit",
        "x.csv",
        "--alg",
        "zzz",
        "--K",
        "2",
        "--L",
        "2",
        "--out",
        str(tmp_path / "o"),
    )
    assert code == 2


def test_fit_init_with_lecs_is_usage_error(tmp_path, instance_dir):
    code = run(
        "fit",
        str(instance_dir / "X.csv"),
        "--alg",
        "lecs",
        "--K",
        "2",
        "--L",
        "3",
        "--init",
        str(instance_dir),
        "--out",
        str(tmp_path / "o"),
    )
    assert code == 2


def test_fit_algorithm_failure_exit_1(tmp_path):
    # a rank-one matrix cannot support K*L = 4 located columns
    write_matrix_csv(tmp_path / "rank1.csv", np.outer(np.ones(6), np.arange(1.0, 9)))
    code = run(
        "fit",
        str(tmp_path / "rank1.csv"),
        "--alg",
        "lecs",
        "--K",
        "2",
        "--L",
        "2",
        "--out",
        str(tmp_path / "o"),
    )
    assert code == 1


def test_score_identical_and_scaled(tmp_path, instance_dir):
    h = read_matrix_csv(instance_dir / "H.csv")
    write_matrix_csv(tmp_path / "h2.csv", h * 3.0)
    code = run(
        "score", str(instance_dir / "H.csv"), str(tmp_path / "h2.csv")
    )
    assert code == 0


def test_score_output_json(tmp_path, capsys):
    write_matrix_csv(tmp_path / "a.csv", np.eye(2, 5))
    write_matrix_csv(tmp_path / "b.csv", np.eye(2, 5)[[1, 0]])
    assert run("score", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")) == 0
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert payload["score"] == pytest.approx(1.0)
    assert payload["permutation"] == [1, 0]


def test_score_shape_mismatch(tmp_path):
    write_matrix_csv(tmp_path / "a.csv", np.ones((2, 4)))
    write_matrix_csv(tmp_path / "b.csv", np.ones((3, 4)))
    assert run("score", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")) == 2


def test_matrix_csv_header_tolerated(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("# rows=2 cols=3\n1.0,2.0,3.0\n4.0,5.0,6.0\n")
    m = read_matrix_csv(path)
    assert m.shape == (2, 3)
    assert m[1, 2] == 6.0


def _bench_config(tmp_path, **overrides):
    cfg = {
        "N": 16,
        "T": 80,
        "K": 2,
        "L": 3,
        "p": 0.75,
        "noiseKinds": ["uniform"],
        "betas": [1e-3, 1e-1],
        "trials": 2,
        "algorithms": ["lecs", "mult"],
        "masterSeed": 5,
        "multIters": 10,
        "anlsIters": 2,
    }
    cfg.update(overrides)
    path = tmp_path / "bench.json"
    path.write_text(json.dumps(cfg))
    return path


def test_bench_grid_shape_and_order(tmp_path, monkeypatch):
    monkeypatch.setenv("CNMF_THREADS", "1")
    cfg = _bench_config(tmp_path)
    out = tmp_path / "results.csv"
    assert run("bench", "--config", str(cfg), "--out", str(out)) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "noise,beta,trial,alg,score,rel_mse,seconds,chosen_t"
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 2 * 2 * 2  # betas x trials x algs
    keys = [(r[0], float(r[1]), int(r[2]), r[3]) for r in rows]
    assert keys == sorted(keys)
    # lecs rows carry a threshold, mult rows do not
    for r in rows:
        if r[3] == "lecs":
            assert r[7] != ""
            assert float(r[4]) > 0.9
        else:
            assert r[7] == ""
    assert (tmp_path / "bench_uniform.png").exists()


def test_bench_deterministic_rerun(tmp_path, monkeypatch):
    monkeypatch.setenv("CNMF_THREADS", "2")
    cfg = _bench_config(tmp_path)
    out1 = tmp_path / "r1.csv"
    out2 = tmp_path / "r2.csv"
    assert run("bench", "--config", str(cfg), "--out", str(out1), "--no-figures") == 0
    assert run("bench", "--config", str(cfg), "--out", str(out2), "--no-figures") == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_bench_flag_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("CNMF_THREADS", "1")
    cfg = _bench_config(tmp_path)
    out = tmp_path / "results.csv"
    code = run(
        "bench",
        "--config",
        str(cfg),
        "--out",
        str(out),
        "--trials",
        "1",
        "--algs",
        "lecs",
        "--betas",
        "0.001",
        "--no-figures",
    )
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 2


def test_bench_unknown_alg(tmp_path):
    cfg = _bench_config(tmp_path, algorithms=["wat"])
    assert run("bench", "--config", str(cfg), "--out", str(tmp_path / "r.csv")) == 2


def test_bench_warm_start_algorithms(tmp_path, monkeypatch):
    monkeypatch.setenv("CNMF_THREADS", "1")
    cfg = _bench_config(
        tmp_path, algorithms=["lecs-anls"], betas=[1e-3], trials=1, anlsIters=1
    )
    out = tmp_path / "warm.csv"
    assert run("bench", "--config", str(cfg), "--out", str(out), "--no-figures") == 0
    row = out.read_text().strip().splitlines()[1].split(",")
    assert row[3] == "lecs-anls"
    assert float(row[4]) > 0.9  # warm-started fit keeps the recovered factors
    assert row[7] != ""  # records the threshold chosen by the warm start


def test_missing_subcommand_exit_2():
    assert run() == 2
