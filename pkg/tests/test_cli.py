"""Command-line interface: flags, exit codes, artifacts, determinism.

Heavy training paths run on tiny datasets here; full-scale behavior is
covered by the acceptance suite.
"""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gridseer.cli import main
from gridseer.faultsim import FAULT_KINDS


def run_cli(argv, cwd, env_extra=None):
    env = dict(os.environ)
    env.setdefault("OMP_NUM_THREADS", "1")
    env.setdefault("OPENBLAS_NUM_THREADS", "1")
    if env_extra:
        env.update(env_extra)
    return subprocess.run([sys.executable, "-m", "gridseer.cli"] + argv,
                          capture_output=True, text=True, cwd=cwd, env=env)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def tiny_faults_csv(workdir):
    code = main(["gen", "faults", "--default-grid", "--runs", "2", "--seed", "7",
                 "--out", str(workdir / "gen")])
    assert code == 0
    return workdir / "gen" / "gen-faults-seed7" / "faults.csv"


def test_usage_error_without_grid_source(workdir):
    result = run_cli(["gen", "faults", "--runs", "1"], cwd=workdir)
    assert result.returncode == 2
    assert "--grid" in result.stderr


def test_usage_error_unknown_command(workdir):
    result = run_cli(["frobnicate"], cwd=workdir)
    assert result.returncode == 2


def test_usage_error_locator_without_kind(workdir, tiny_faults_csv):
    result = run_cli(["train", "bus-locator", "--data", str(tiny_faults_csv),
                      "--seed", "1"], cwd=workdir)
    assert result.returncode == 2
    assert "--kind" in result.stderr


def test_runtime_error_missing_file_exits_one(workdir):
    result = run_cli(["train", "fault-type", "--data", "no-such.csv",
                      "--seed", "1", "--out", str(workdir / "x")], cwd=workdir)
    assert result.returncode == 1


def test_gen_writes_manifest_before_outputs(workdir, tiny_faults_csv):
    run_dir = tiny_faults_csv.parent
    assert (run_dir / "manifest.json").exists()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["command"] == "gen"
    assert manifest["config"]["seed"] == 7
    assert "started_at" in manifest
    assert (run_dir / "faults.csv.json").exists()


def test_gen_faults_deterministic(workdir):
    code = main(["gen", "faults", "--default-grid", "--runs", "2", "--seed", "7",
                 "--out", str(workdir / "gen2")])
    assert code == 0
    a = (workdir / "gen" / "gen-faults-seed7" / "faults.csv").read_bytes()
    b = (workdir / "gen2" / "gen-faults-seed7" / "faults.csv").read_bytes()
    assert a == b


def test_gridseer_out_env_var(workdir):
    env_out = workdir / "envout"
    result = run_cli(["gen", "faults", "--default-grid", "--runs", "1",
                      "--seed", "3"], cwd=workdir,
                     env_extra={"GRIDSEER_OUT": str(env_out)})
    assert result.returncode == 0
    assert (env_out / "gen-faults-seed3" / "faults.csv").exists()


def test_gen_subsets_covers_requested_days(workdir):
    code = main(["gen", "subsets", "--default-grid", "--days", "2", "--seed", "5",
                 "--out", str(workdir / "sub")])
    assert code == 0
    csv_path = workdir / "sub" / "gen-subsets-seed5" / "scenarios.csv"
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 1 + 2 * 24 * 32
    days = {line.split(",")[0] for line in lines[1:]}
    assert days == {"0", "1"}
    with open(str(csv_path) + ".json") as fh:
        sidecar = json.load(fh)
    assert {"l1_min", "l1_max", "seed", "grid_hash"} <= set(sidecar)


def test_train_and_eval_fault_type(workdir, tiny_faults_csv):
    out = workdir / "train-ft"
    code = main(["train", "fault-type", "--data", str(tiny_faults_csv),
                 "--seed", "5", "--out", str(out)])
    assert code == 0
    run_dir = out / "train-fault-type-seed5"
    assert (run_dir / "model.gsnn").exists()
    assert (run_dir / "metrics.json").exists()
    assert (run_dir / "curve.csv").exists()
    metrics = json.loads((run_dir / "metrics.json").read_text())
    assert metrics["label_names"] == list(FAULT_KINDS)

    result = run_cli(["eval", "--model", str(run_dir / "model.gsnn"),
                      "--data", str(tiny_faults_csv)], cwd=workdir)
    assert result.returncode == 0
    assert "accuracy" in result.stdout


def test_train_metrics_deterministic(workdir, tiny_faults_csv):
    outs = []
    for tag in ("d1", "d2"):
        out = workdir / tag
        code = main(["train", "fault-type", "--data", str(tiny_faults_csv),
                     "--seed", "9", "--out", str(out)])
        assert code == 0
        outs.append((out / "train-fault-type-seed9" / "metrics.json").read_bytes())
    assert outs[0] == outs[1]


def test_train_two_class_flag(workdir, tiny_faults_csv):
    out = workdir / "train-2c"
    code = main(["train", "fault-type", "--data", str(tiny_faults_csv),
                 "--seed", "5", "--two-class", "--out", str(out)])
    assert code == 0
    metrics = json.loads(
        (out / "train-fault-type-seed5" / "metrics.json").read_text())
    assert metrics["label_names"] == ["LineLine", "LineGround"]


def test_gen_and_train_congestion_round_trip(workdir):
    code = main(["gen", "congestion", "--default-grid", "--samples", "150",
                 "--seed", "9", "--out", str(workdir / "cong")])
    assert code == 0
    csv_path = workdir / "cong" / "gen-congestion-seed9" / "congestion.csv"
    assert csv_path.exists()
    with open(str(csv_path) + ".json") as fh:
        sidecar = json.load(fh)
    assert sidecar["n_solar"] == 5
    assert len(sidecar["solar_rated"]) == 5

    out = workdir / "train-cong"
    code = main(["train", "congestion", "--data", str(csv_path),
                 "--mode", "predicted", "--seed", "9", "--out", str(out)])
    assert code == 0
    run_dir = out / "train-congestion-predicted-seed9"
    metrics = json.loads((run_dir / "metrics.json").read_text())
    assert metrics["mode"] == "PredictedPower"
    assert 0.0 <= metrics["test_accuracy"] <= 1.0

    result = run_cli(["eval", "--model", str(run_dir / "model.gsnn"),
                      "--data", str(csv_path)], cwd=workdir)
    assert result.returncode == 0
    assert "accuracy" in result.stdout


def test_train_surrogate_runs_requested_steps(workdir):
    sub = workdir / "sub" / "gen-subsets-seed5" / "scenarios.csv"
    out = workdir / "train-sur"
    code = main(["train", "surrogate", "--data", str(sub), "--seed", "4",
                 "--steps", "120", "--out", str(out)])
    assert code == 0
    run_dir = out / "train-surrogate-seed4"
    metrics = json.loads((run_dir / "metrics.json").read_text())
    assert metrics["steps"] == 120
    curve = (run_dir / "curve.csv").read_text().splitlines()
    assert curve[0] == "step,train_loss,test_loss"
    assert curve[-1].split(",")[0] == "120"


def test_select_outputs_single_json_object(workdir):
    sur = workdir / "train-sur" / "train-surrogate-seed4" / "model.gsnn"
    weather = workdir / "weather.json"
    weather.write_text(json.dumps({"irradiance": 850.0, "ambient_temp": 24.0,
                                   "cloud_cover": 0.2, "hour": 13}))
    result = run_cli(["select", "--model", str(sur), "--default-grid",
                      "--weather", str(weather), "--seed", "2", "--oracle"],
                     cwd=workdir)
    assert result.returncode == 0
    obj = json.loads(result.stdout)
    assert len(obj["mask"]) == 5
    assert set(obj["mask"]) <= {0, 1}
    assert "predicted_total" in obj
    # regret is recomputed from the oracle ranking
    truths = {tuple(m): t for m, t in obj["ranking"]}
    assert obj["regret"] == pytest.approx(
        truths[tuple(obj["mask"])] - obj["oracle_total"])
    assert obj["oracle_total"] == min(truths.values())


# ---------------------------------------------------------------------------
# monitor
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def monitor_models(workdir, tiny_faults_csv):
    """Fault-type model plus all four locators, trained on the tiny dataset."""
    ft_out = workdir / "mon-ft"
    main(["train", "fault-type", "--data", str(tiny_faults_csv), "--seed", "5",
          "--out", str(ft_out)])
    loc_dir = workdir / "locators"
    loc_dir.mkdir(exist_ok=True)
    for kind in FAULT_KINDS:
        out = workdir / f"mon-loc-{kind}"
        main(["train", "bus-locator", "--data", str(tiny_faults_csv),
              "--kind", kind, "--seed", "5", "--out", str(out)])
        src = out / f"train-bus-locator-{kind}-seed5" / f"locator_{kind}.gsnn"
        (loc_dir / f"locator_{kind}.gsnn").write_bytes(src.read_bytes())
    return (ft_out / "train-fault-type-seed5" / "model.gsnn", loc_dir)


def monitor_run(monitor_models, workdir, stdin_text):
    fault_model, loc_dir = monitor_models
    env = dict(os.environ, OMP_NUM_THREADS="1", OPENBLAS_NUM_THREADS="1")
    return subprocess.run(
        [sys.executable, "-m", "gridseer.cli", "monitor",
         "--fault-model", str(fault_model), "--locator-models", str(loc_dir),
         "--window", "100"],
        input=stdin_text, capture_output=True, text=True, cwd=workdir, env=env)


def test_monitor_short_stream_no_emission(monitor_models, workdir):
    lines = "\n".join(json.dumps([1.0] * 23) for _ in range(40))
    result = monitor_run(monitor_models, workdir, lines + "\n")
    assert result.returncode == 0
    assert result.stdout.strip() == ""


def test_monitor_emits_per_step_after_window_fills(monitor_models, workdir,
                                                   default_grid):
    from gridseer.faultsim import synthesize_trace
    trace = synthesize_trace(default_grid, None, 3)
    feed = np.vstack([trace.samples, trace.samples[:10]])
    lines = "\n".join(json.dumps(row.tolist()) for row in feed)
    result = monitor_run(monitor_models, workdir, lines + "\n")
    assert result.returncode == 0
    emissions = [json.loads(line) for line in result.stdout.splitlines()]
    assert len(emissions) == 11  # steps 99..109
    for e in emissions:
        assert {"step", "fault_kind", "bus", "confidence"} <= set(e)
        assert 0 <= e["bus"] <= 23


def test_monitor_skips_malformed_lines(monitor_models, workdir):
    rows = [json.dumps([1.0] * 23) for _ in range(30)]
    rows.insert(10, "this is not json")
    rows.insert(20, json.dumps([1.0] * 5))  # wrong width
    result = monitor_run(monitor_models, workdir, "\n".join(rows) + "\n")
    assert result.returncode == 0
    assert "skipping malformed line" in result.stderr


def test_monitor_all_malformed_exits_one(monitor_models, workdir):
    result = monitor_run(monitor_models, workdir, "junk\nmore junk\n")
    assert result.returncode == 1
