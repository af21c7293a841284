import json

import numpy as np
import pytest

from ddkit import trajstore
from ddkit.cli import main
from ddkit.objectives import ParamVector, save_param_vector

from conftest import build_image_set


def run(args):
    return main(list(args))


@pytest.fixture
def store(tmp_path):
    out = tmp_path / "traj"
    spec = trajstore.SyntheticSpec(E=30, N=40, C=2, seed=5, scenario="late-learner")
    trajstore.write_synthetic(spec, out)
    return out


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["--help"])
    assert exc.value.code == 0
    assert "ddkit" in capsys.readouterr().out


def test_unknown_flag_is_validation_error():
    with pytest.raises(SystemExit) as exc:
        run(["validate", "--bogus"])
    assert exc.value.code == 1


def test_synth_and_validate(tmp_path, capsys):
    out = tmp_path / "t"
    code = run(["synth-traj", "--out", str(out), "--epochs", "3", "--samples", "4",
                "--classes", "2", "--seed", "1", "--scenario", "constant"])
    assert code == 0
    code = run(["validate", str(out)])
    assert code == 0
    report = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert report["E"] == 3 and report["valid"] is True


def test_validate_bad_store_exits_two(tmp_path, store):
    (store / "probs.bin").write_bytes(b"junk")
    assert run(["validate", str(store)]) == 2


def test_validate_missing_dir_exits_two(tmp_path):
    assert run(["validate", str(tmp_path / "nope")]) == 2


def test_score_cad_to_csv(store, tmp_path, capsys):
    out = tmp_path / "cad.csv"
    code = run(["score", "--traj", str(store), "--method", "cad",
                "--J", "6", "--W", "2", "--K", "20", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "sample_id,score"
    assert len(lines) == 41
    sidecar = json.loads(out.with_suffix(".json").read_text())
    assert sidecar["method"] == "cad"
    assert sidecar["config"]["K"] == 20


def test_score_without_out_prints_csv(store, capsys):
    code = run(["score", "--traj", str(store), "--method", "cad",
                "--J", "6", "--W", "2", "--K", "20"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "sample_id,score"
    assert len(lines) == 41


def test_score_bad_params_exit_one(store, tmp_path):
    code = run(["score", "--traj", str(store), "--method", "cad",
                "--J", "0", "--out", str(tmp_path / "x.csv")])
    assert code == 1
    assert not (tmp_path / "x.csv").exists()


def test_score_el2n_sl_without_teacher_exit_one(store, tmp_path):
    code = run(["score", "--traj", str(store), "--method", "el2n_sl",
                "--out", str(tmp_path / "x.csv")])
    assert code == 1


def test_select_window_and_random(store, tmp_path):
    scores_csv = tmp_path / "el2n.csv"
    assert run(["score", "--traj", str(store), "--method", "el2n",
                "--out", str(scores_csv)]) == 0
    subset_csv = tmp_path / "subset.csv"
    assert run(["select", "--traj", str(store), "--scores", str(scores_csv),
                "--ipc", "3", "--out", str(subset_csv),
                "--start-quantile", "0.5", "--order", "descending"]) == 0
    lines = subset_csv.read_text().splitlines()
    assert lines[0] == "sample_id,class"
    assert len(lines) == 7
    assert run(["select", "--traj", str(store), "--method", "random",
                "--ipc", "3", "--seed", "2", "--out", str(subset_csv)]) == 0


def test_sliding_window_cli(store, tmp_path, capsys):
    scores_csv = tmp_path / "el2n.csv"
    run(["score", "--traj", str(store), "--method", "el2n", "--out", str(scores_csv)])
    out_dir = tmp_path / "windows"
    assert run(["sliding-window", "--traj", str(store), "--scores", str(scores_csv),
                "--ipc", "5", "--stride", "5", "--out-dir", str(out_dir)]) == 0
    count = int(capsys.readouterr().out.strip())
    files = sorted(out_dir.glob("window_*.csv"))
    assert len(files) == count == (20 - 5) // 5 + 1


def test_pareto_cli(tmp_path):
    pts = tmp_path / "points.csv"
    pts.write_text("ipc,f,accuracy\n10,1.0,0.30\n10,0.5,0.35\n50,1.0,0.6\n")
    out = tmp_path / "pareto.csv"
    assert run(["pareto", "--points", str(pts), "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[1].endswith("false")
    assert rows[2].endswith("true")
    assert rows[3].endswith("true")


def test_objective_tm_cli(tmp_path, capsys):
    a, b, c = (tmp_path / n for n in ("a.bin", "b.bin", "c.bin"))
    save_param_vector(ParamVector("t", np.array([0.0, 0.0])), a)
    save_param_vector(ParamVector("tm", np.array([1.0, 1.0])), b)
    save_param_vector(ParamVector("hat", np.array([1.0, 0.0])), c)
    assert run(["objective", "tm", "--start", str(a), "--expert", str(b),
                "--student", str(c)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["loss"] == pytest.approx(0.5)


def test_objective_tm_degenerate_exit_three(tmp_path):
    a = tmp_path / "a.bin"
    save_param_vector(ParamVector("t", np.array([1.0, 2.0])), a)
    assert run(["objective", "tm", "--start", str(a), "--expert", str(a),
                "--student", str(a)]) == 3


def test_objective_bn_dm_dc_cli(tmp_path, capsys):
    stats = tmp_path / "stats.json"
    stats.write_text(json.dumps({"layers": [{
        "name": "l", "mean": [1.0], "var": [2.0],
        "running_mean": [0.0], "running_var": [1.0]}]}))
    assert run(["objective", "bn", "--stats", str(stats), "--lambda-var", "0.5"]) == 0
    assert json.loads(capsys.readouterr().out)["loss"] == pytest.approx(1.5)

    feats = tmp_path / "features.json"
    feats.write_text(json.dumps({"batches": [
        {"side": "real", "tag": "v0", "embeddings": [[0.0, 0.0]]},
        {"side": "synthetic", "tag": "v0", "embeddings": [[3.0, 4.0]]}]}))
    assert run(["objective", "dm", "--features", str(feats)]) == 0
    assert json.loads(capsys.readouterr().out)["loss"] == pytest.approx(25.0)

    grads = tmp_path / "grads.json"
    grads.write_text(json.dumps({"layers": [
        {"real": [1.0, 0.0], "synthetic": [0.0, 1.0]}]}))
    assert run(["objective", "dc", "--grads", str(grads)]) == 0
    assert json.loads(capsys.readouterr().out)["loss"] == pytest.approx(1.0)


def test_error_table_and_dcs_cli(tmp_path, capsys):
    store = tmp_path / "errors.csv"
    rng = np.random.default_rng(0)
    sizes = (np.arange(1, 21) * 10).astype(int)
    for i, s in enumerate(sizes):
        err = float(np.clip(0.2 + 0.5 * s / 200 + rng.normal(0, 0.02), 0, 1))
        assert run(["error-table", "--store", str(store), "--subset-id", f"s{i:02d}",
                    "--gen-error", str(err), "--subset-size", str(int(s))]) == 0
    losses = tmp_path / "losses.csv"
    lines = ["subset_id,loss"] + [f"s{i:02d},{float(s)}" for i, s in enumerate(sizes)]
    losses.write_text("\n".join(lines) + "\n")
    assert run(["dcs", "--errors", str(store), "--losses", str(losses),
                "--adjust-size"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert abs(report["rho_raw"]) > 0.8
    assert abs(report["rho_adjusted"]) < 0.1


def test_error_table_conflict_exit_two(tmp_path):
    store = tmp_path / "errors.csv"
    assert run(["error-table", "--store", str(store), "--subset-id", "a",
                "--gen-error", "0.5", "--subset-size", "10"]) == 0
    assert run(["error-table", "--store", str(store), "--subset-id", "a",
                "--gen-error", "0.5", "--subset-size", "20"]) == 2


def test_dcs_constant_losses_exit_three(tmp_path):
    store = tmp_path / "errors.csv"
    for i in range(4):
        run(["error-table", "--store", str(store), "--subset-id", f"s{i}",
             "--gen-error", str(0.1 * (i + 1)), "--subset-size", "10"])
    losses = tmp_path / "losses.csv"
    losses.write_text("subset_id,loss\n" + "".join(f"s{i},1.0\n" for i in range(4)))
    assert run(["dcs", "--errors", str(store), "--losses", str(losses)]) == 3


def test_fit_scaling_cli(tmp_path, capsys):
    from ddkit.scaling import predict

    n = 8.0 * np.arange(1, 21)
    y = predict(0.9, -0.2, 1.9, 0.1, n)
    curve = tmp_path / "curve.csv"
    lines = ["epoch,samples_seen,metric"] + [
        f"{k},{nk},{yk}" for k, (nk, yk) in enumerate(zip(n, y), start=1)
    ]
    curve.write_text("\n".join(lines) + "\n")
    assert run(["fit-scaling", "--curve", str(curve)]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["d"] == pytest.approx(0.1, rel=0.02)
    assert fit["tau"] is None


def test_distill_cli_and_determinism(store, tmp_path, monkeypatch, capsys):
    traj = trajstore.load_trajectory(store)
    images = build_image_set(tmp_path / "imgs", traj)
    monkeypatch.setenv("DDKIT_SEED", "77")
    outs = []
    for name in ("d1", "d2"):
        out = tmp_path / name
        assert run(["distill", "--traj", str(store), "--images", str(images),
                    "--out", str(out), "--factor", "2", "--ipc", "1",
                    "--resolution", "64", "--K", "20"]) == 0
        outs.append(out)
    capsys.readouterr()
    names = sorted(p.name for p in outs[0].iterdir())
    assert "class_0_ipc_0.png" in names and "provenance.json" in names
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_report_melts_csvs(tmp_path):
    a = tmp_path / "scores.csv"
    a.write_text("sample_id,score\ns0,0.5\ns1,0.25\n")
    b = tmp_path / "pareto.csv"
    b.write_text("ipc,f,accuracy,is_frontier\n10,0.5,0.35,true\n")
    out = tmp_path / "long.csv"
    assert run(["report", "--out", str(out), str(a), str(b)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "source,key,variable,value"
    assert "scores.csv,s0,score,0.5" in lines
    assert "pareto.csv,10,accuracy,0.35" in lines
    assert "pareto.csv,10,is_frontier,true" in lines


def test_score_idempotent_bytes(store, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run(["score", "--traj", str(store), "--method", "dyn_unc",
                    "--J", "6", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
