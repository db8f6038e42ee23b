"""Command-line entry point: dataset synthesis, training, evaluation,
subset selection and stream monitoring.

Every command resolves an output directory (--out flag, else the
GRIDSEER_OUT environment variable, else ./runs), creates a run subdirectory
named after the command and seed, writes a manifest first, and then writes
its artifacts atomically (write to a temp file, rename into place). With
identical flags and seed the primary artifacts are byte-identical across
runs; wall-clock timestamps live only in the manifest.

Exit codes: 0 success, 1 runtime/domain failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GridseerError
from .faultsim import (
    FAULT_KINDS, NO_FAULT, gen_fault_dataset, load_fault_dataset,
    save_fault_dataset,
)
from .grid import GridState, build_default_grid, grid_checksum, load_grid
from .gridml import (
    CongestionSample, evaluate, gen_congestion_samples, metrics_json,
    predict_fault_bus, classify_fault_type, predict_solar_power,
    train_bus_locator, train_congestion_model, train_fault_type_model,
    train_solar_model, write_curve_csv,
)
from .nn import ModelParams, load_model, save_model
from .dispatch import (
    PenaltyScaler, brute_force_best_subset, gen_subset_scenarios,
    load_scenarios, save_scenarios, select_optimal_subset, train_surrogate,
)
from .powerflow import solve_powerflow
from .weather import WeatherSample, actual_solar_power, committed_solar_power, forecast_weather


# ---------------------------------------------------------------------------
# Run-directory plumbing
# ---------------------------------------------------------------------------

def _out_root(args) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    env = os.environ.get("GRIDSEER_OUT")
    return Path(env) if env else Path("runs")


def _run_dir(args, *tags) -> Path:
    parts = [str(t) for t in tags if t is not None]
    name = "-".join(parts + [f"seed{args.seed}"]) if hasattr(args, "seed") else "-".join(parts)
    run_dir = _out_root(args) / name
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write(path: Path, data) -> None:
    """Write bytes or text to path via a temp file and atomic rename."""
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_via(path: Path, writer) -> None:
    """Run writer(tmp_path), then rename the result into place."""
    tmp = path.with_name(path.name + ".tmp")
    try:
        writer(tmp)
        os.replace(tmp, path)
        sidecar = Path(str(tmp) + ".json")
        if sidecar.exists():
            os.replace(sidecar, Path(str(path) + ".json"))
    except BaseException:
        for leftover in (tmp, Path(str(tmp) + ".json")):
            if leftover.exists():
                leftover.unlink()
        raise


def _write_manifest(run_dir: Path, args, input_paths) -> None:
    manifest = {
        "command": args.command,
        "subcommand": getattr(args, "target", None),
        "config": {k: v for k, v in sorted(vars(args).items())
                   if k not in ("func",) and not k.startswith("_")},
        "inputs": {str(p): _sha256(p) for p in input_paths if p and Path(p).exists()},
        "started_at": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
    }
    _atomic_write(run_dir / "manifest.json",
                  json.dumps(manifest, sort_keys=True, indent=2, default=str) + "\n")


def _resolve_grid(args) -> GridState:
    if getattr(args, "grid", None):
        return load_grid(args.grid)
    return build_default_grid()


# ---------------------------------------------------------------------------
# Congestion sample CSV (weather + per-generator powers + label)
# ---------------------------------------------------------------------------

def save_congestion_samples(samples, rated, csv_path, seed, grid_hash) -> None:
    n_solar = rated.size
    header = ["hour", "irradiance", "ambient_temp", "cloud_cover"]
    header += [f"c_g{i}" for i in range(1, n_solar + 1)]
    header += [f"a_g{i}" for i in range(1, n_solar + 1)]
    header += ["total_load", "congested"]
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in samples:
            row = [s.weather.hour, repr(s.weather.irradiance),
                   repr(s.weather.ambient_temp), repr(s.weather.cloud_cover)]
            row += [repr(v) for v in s.committed_solar.tolist()]
            row += [repr(v) for v in s.actual_solar.tolist()]
            row += [repr(float(s.load_profile.sum())), int(s.congested)]
            writer.writerow(row)
    sidecar = {"seed": seed, "grid_hash": grid_hash,
               "solar_rated": rated.tolist(), "n_solar": int(n_solar)}
    with open(str(csv_path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_congestion_samples(csv_path):
    """Returns (samples, rated). predicted_solar is NaN until filled."""
    with open(str(csv_path) + ".json", "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    rated = np.array(sidecar["solar_rated"], dtype=float)
    n_solar = int(sidecar["n_solar"])
    samples = []
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for line in reader:
            hour = int(line[0])
            weather = WeatherSample(irradiance=float(line[1]), ambient_temp=float(line[2]),
                                    cloud_cover=float(line[3]), hour=hour)
            committed = np.array([float(x) for x in line[4:4 + n_solar]])
            actual = np.array([float(x) for x in line[4 + n_solar:4 + 2 * n_solar]])
            total_load = float(line[4 + 2 * n_solar])
            congested = bool(int(line[5 + 2 * n_solar]))
            samples.append(CongestionSample(
                committed_solar=committed, actual_solar=actual,
                predicted_solar=np.full(n_solar, np.nan),
                load_profile=np.array([total_load]),  # totals suffice for features
                congested=congested, weather=weather,
            ))
    return samples, rated


def fill_predicted_solar(samples, solar_model, rated):
    out = []
    for s in samples:
        pred = np.array([predict_solar_power(solar_model, s.weather, r) for r in rated])
        out.append(replace(s, predicted_solar=pred))
    return out


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    grid = _resolve_grid(args)
    run_dir = _run_dir(args, "gen", args.target)
    _write_manifest(run_dir, args, [getattr(args, "grid", None)])

    if args.target == "faults":
        dataset = gen_fault_dataset(grid, runs_per_case=args.runs, seed=args.seed)
        out_csv = run_dir / "faults.csv"
        _atomic_via(out_csv, lambda tmp: save_fault_dataset(dataset, tmp))
        kinds = {}
        for trace in dataset.traces:
            kinds[trace.label_kind] = kinds.get(trace.label_kind, 0) + 1
        balance = " ".join(f"{k}={kinds[k]}" for k in sorted(kinds))
        print(f"gen faults: traces={len(dataset.traces)} runs_per_case={args.runs} "
              f"seed={args.seed} {balance} -> {out_csv}")
    elif args.target == "subsets":
        scenarios, scaler = gen_subset_scenarios(grid, days=args.days, seed=args.seed)
        out_csv = run_dir / "scenarios.csv"
        _atomic_via(out_csv, lambda tmp: save_scenarios(
            scenarios, scaler, tmp, args.seed, grid_checksum(grid)))
        congested = sum(1 for s in scenarios if s.l2 > 0)
        print(f"gen subsets: scenarios={len(scenarios)} days={args.days} seed={args.seed} "
              f"congested={congested} l1_max={scaler.l1_max:.6g} -> {out_csv}")
    else:  # congestion
        solar_model = train_solar_model(seed=args.seed)
        samples = gen_congestion_samples(grid, args.samples, seed=args.seed,
                                         solar_model=solar_model)
        rated = np.array([g.p_rated for g in grid.solar_generators()])
        out_csv = run_dir / "congestion.csv"
        _atomic_via(out_csv, lambda tmp: save_congestion_samples(
            samples, rated, tmp, args.seed, grid_checksum(grid)))
        pos = sum(1 for s in samples if s.congested)
        print(f"gen congestion: samples={len(samples)} seed={args.seed} "
              f"congested={pos} -> {out_csv}")
    return 0


# ---------------------------------------------------------------------------
# train / eval
# ---------------------------------------------------------------------------

def _save_training_outputs(run_dir: Path, model: ModelParams, curve_header=None) -> None:
    model_path = run_dir / "model.gsnn"
    _atomic_via(model_path, lambda tmp: save_model(model, tmp))
    metrics = {k: v for k, v in model.metadata.items() if k != "curve"}
    _atomic_write(run_dir / "metrics.json", metrics_json(metrics))
    if "curve" in model.metadata:
        header = curve_header or ("epoch", "train_acc", "test_acc")
        _atomic_via(run_dir / "curve.csv",
                    lambda tmp: write_curve_csv(model.metadata["curve"], tmp, header))


def cmd_train(args) -> int:
    tags = ["train", args.target]
    if args.target == "bus-locator":
        tags.append(args.kind)
    elif args.target == "congestion":
        tags.append(args.mode)
    run_dir = _run_dir(args, *tags)
    _write_manifest(run_dir, args, [getattr(args, "data", None)])

    if args.target == "fault-type":
        dataset = load_fault_dataset(args.data)
        mode = "two_class" if args.two_class else "full"
        model = train_fault_type_model(dataset, seed=args.seed, mode=mode)
        print(f"train fault-type: mode={mode} test_acc={model.metadata['test_accuracy']:.4f} "
              f"epochs={model.metadata['epochs_run']}")
    elif args.target == "bus-locator":
        dataset = load_fault_dataset(args.data)
        model = train_bus_locator(dataset, args.kind, seed=args.seed)
        print(f"train bus-locator[{args.kind}]: "
              f"test_acc={model.metadata['test_accuracy']:.4f} "
              f"epochs={model.metadata['epochs_run']}")
    elif args.target == "congestion":
        samples, rated = load_congestion_samples(args.data)
        mode = "KnownPower" if args.mode == "known" else "PredictedPower"
        if mode == "PredictedPower":
            solar_model = train_solar_model(seed=args.seed)
            samples = fill_predicted_solar(samples, solar_model, rated)
        model = train_congestion_model(samples, mode, seed=args.seed)
        print(f"train congestion[{mode}]: test_acc={model.metadata['test_accuracy']:.4f}")
    elif args.target == "solar":
        model = train_solar_model(seed=args.seed, n_samples=args.samples)
        print(f"train solar: train_mse={model.metadata['train_mse']:.6f}")
    else:  # surrogate
        scenarios, scaler = load_scenarios(args.data)
        model = train_surrogate(scenarios, seed=args.seed, steps=args.steps)
        model.metadata["l1_min"] = scaler.l1_min
        model.metadata["l1_max"] = scaler.l1_max
        print(f"train surrogate: steps={args.steps} "
              f"train_mse={model.metadata['train_mse']:.3f} "
              f"test_mse={model.metadata['test_mse']:.3f}")

    curve_header = ("step", "train_loss", "test_loss") if args.target == "surrogate" else None
    _save_training_outputs(run_dir, model, curve_header)

    if args.target == "bus-locator":
        # stable per-kind name so a monitor can load a directory of locators
        named = run_dir / f"locator_{args.kind}.gsnn"
        _atomic_via(named, lambda tmp: save_model(model, tmp))
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    if model.kind in ("FaultType", "BusLocator", "SvmBaseline"):
        dataset = load_fault_dataset(args.data)
        if model.kind == "BusLocator":
            kind = model.metadata["fault_kind"]
            traces = [t for t in dataset.traces
                      if t.label_kind in (kind, NO_FAULT)]
        else:
            names = model.metadata["label_names"]
            traces = [t for t in dataset.traces if t.label_kind in names]
        metrics = evaluate(model, traces)
    elif model.kind == "Congestion":
        samples, rated = load_congestion_samples(args.data)
        if model.metadata["mode"] == "PredictedPower":
            solar_model = train_solar_model(seed=int(model.metadata["seed"]))
            samples = fill_predicted_solar(samples, solar_model, rated)
        from .gridml import _congestion_features, classification_metrics
        from .nn import mlp_forward
        x = np.stack([_congestion_features(s, model.metadata["mode"]) for s in samples])
        xs = (x - model.arrays["feat_mean"]) / model.arrays["feat_std"]
        out, _ = mlp_forward(model.layers, xs)
        y_pred = (out[:, 0] > 0.0).astype(int)
        y_true = np.array([int(s.congested) for s in samples])
        metrics = classification_metrics(y_true, y_pred, ["clear", "congested"])
    elif model.kind == "SubsetSurrogate":
        scenarios, _ = load_scenarios(args.data)
        from .dispatch import _scenario_features
        from .nn import mlp_forward
        x = np.stack([_scenario_features(s) for s in scenarios])
        xs = (x - model.arrays["feat_mean"]) / model.arrays["feat_std"]
        out, _ = mlp_forward(model.layers, xs)
        y = np.array([s.total for s in scenarios])
        metrics = {"n": len(scenarios), "mse": float(((out[:, 0] - y) ** 2).mean())}
    else:
        raise GridseerError(f"eval does not support model kind {model.kind}")

    print(f"eval {model.kind} on {args.data}:")
    if "accuracy" in metrics:
        print(f"  accuracy: {metrics['accuracy']:.4f}  (n={metrics['n']})")
        for name, rec in metrics.get("per_class", {}).items():
            print(f"  {name}: precision={rec['precision']:.4f} "
                  f"recall={rec['recall']:.4f} support={rec['support']}")
    else:
        print(f"  mse: {metrics['mse']:.4f}  (n={metrics['n']})")
    if args.out:
        run_dir = _run_dir(args, "eval", model.kind.lower())
        _write_manifest(run_dir, args, [args.model, args.data])
        _atomic_write(run_dir / "eval.json", metrics_json(metrics))
    return 0


# ---------------------------------------------------------------------------
# select
# ---------------------------------------------------------------------------

def _load_weather_json(path) -> WeatherSample:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return WeatherSample(irradiance=float(obj["irradiance"]),
                         ambient_temp=float(obj["ambient_temp"]),
                         cloud_cover=float(obj["cloud_cover"]),
                         hour=int(obj["hour"]))


def cmd_select(args) -> int:
    model = load_model(args.model)
    grid = _resolve_grid(args)
    weather = _load_weather_json(args.weather)
    solar = grid.solar_generators()
    rated = np.array([g.p_rated for g in solar])

    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 9001)))
    actual = np.array([actual_solar_power(weather, r, rng) for r in rated])
    forecast = forecast_weather(weather, rng)
    committed = np.array([committed_solar_power(forecast, r) for r in rated])

    from .dispatch import SubsetMask, apply_solar_mask
    all_on = apply_solar_mask(grid, SubsetMask(bits=(1,) * len(solar)), actual)
    pre = solve_powerflow(all_on, enforce_q_limits=True)

    mask, predicted = select_optimal_subset(model, pre.v_mag, len(solar))
    result = {
        "mask": list(mask.bits),
        "predicted_total": predicted,
        "committed_total": float(committed.sum()),
        "actual_total": float(actual.sum()),
    }
    if args.oracle:
        scaler = PenaltyScaler(l1_min=float(model.metadata["l1_min"]),
                               l1_max=float(model.metadata["l1_max"]))
        ranked = brute_force_best_subset(grid, weather, committed, actual, scaler)
        true_by_mask = {m.bits: t for m, t in ranked}
        result["true_total"] = true_by_mask[mask.bits]
        result["oracle_mask"] = list(ranked[0][0].bits)
        result["oracle_total"] = ranked[0][1]
        result["regret"] = result["true_total"] - result["oracle_total"]
        result["ranking"] = [[list(m.bits), t] for m, t in ranked]
    print(json.dumps(result, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# monitor
# ---------------------------------------------------------------------------

def classify_window(window: np.ndarray, fault_model: ModelParams,
                    locators: dict) -> dict:
    """One sliding-window decision: fault kind, bus (0 = healthy), confidence."""
    kind, _ = classify_fault_type(fault_model, window)
    bus, probs = predict_fault_bus(locators[kind], window)
    if bus == 0:
        return {"fault_kind": NO_FAULT, "bus": 0, "confidence": float(probs[0])}
    return {"fault_kind": kind, "bus": int(bus), "confidence": float(probs[bus])}


def load_locator_dir(path) -> dict:
    locators = {}
    for kind in FAULT_KINDS:
        p = Path(path) / f"locator_{kind}.gsnn"
        if not p.exists():
            raise GridseerError(f"missing locator checkpoint {p}")
        locators[kind] = load_model(p)
    return locators


def cmd_monitor(args) -> int:
    fault_model = load_model(args.fault_model)
    locators = load_locator_dir(args.locator_models)
    n_buses = fault_model.arrays["feat_mean"].size
    window_len = args.window

    window = []
    n_lines = 0
    n_bad = 0
    for step, line in enumerate(sys.stdin):
        line = line.strip()
        if not line:
            continue
        n_lines += 1
        try:
            values = json.loads(line)
            if not isinstance(values, list) or len(values) != n_buses:
                raise ValueError(f"expected a JSON array of {n_buses} floats")
            sample = np.array([float(v) for v in values])
        except (ValueError, TypeError) as exc:
            n_bad += 1
            print(f"monitor: skipping malformed line {step}: {exc}", file=sys.stderr)
            continue
        window.append(sample)
        if len(window) > window_len:
            window.pop(0)
        if len(window) == window_len:
            emission = classify_window(np.stack(window), fault_model, locators)
            emission["step"] = step
            print(json.dumps(emission, sort_keys=True), flush=True)
    if n_lines > 0 and n_bad == n_lines:
        print("monitor: all input lines were malformed", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridseer",
        description="Power-grid simulation and learning toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_grid_opts(p):
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--grid", help="grid JSON file")
        group.add_argument("--default-grid", action="store_true",
                           help="use the bundled 23-bus grid")

    p_gen = sub.add_parser("gen", help="synthesize labeled datasets")
    p_gen.add_argument("target", choices=["faults", "subsets", "congestion"])
    add_grid_opts(p_gen)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--runs", type=int, default=100,
                       help="fault traces per (kind, location) case")
    p_gen.add_argument("--days", type=int, default=14,
                       help="synthetic days for subset scenarios")
    p_gen.add_argument("--samples", type=int, default=4000,
                       help="congestion samples to draw")
    p_gen.add_argument("--out")
    p_gen.set_defaults(func=cmd_gen)

    p_train = sub.add_parser("train", help="train a task model")
    p_train.add_argument("target", choices=["fault-type", "bus-locator",
                                            "congestion", "solar", "surrogate"])
    p_train.add_argument("--data", help="dataset CSV (required unless target=solar)")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out")
    p_train.add_argument("--two-class", action="store_true",
                         help="fault-type: restrict to line-to-line vs line-to-ground")
    p_train.add_argument("--kind", choices=list(FAULT_KINDS),
                         help="bus-locator: fault kind to localize")
    p_train.add_argument("--mode", choices=["known", "predicted"], default="known",
                         help="congestion: use actual or predicted solar power")
    p_train.add_argument("--steps", type=int, default=2500,
                         help="surrogate: optimizer steps")
    p_train.add_argument("--samples", type=int, default=6000,
                         help="solar: synthetic training samples")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out")
    p_eval.set_defaults(func=cmd_eval)

    p_sel = sub.add_parser("select", help="choose the best solar subset")
    p_sel.add_argument("--model", required=True, help="surrogate checkpoint")
    add_grid_opts(p_sel)
    p_sel.add_argument("--weather", required=True, help="weather JSON file")
    p_sel.add_argument("--seed", type=int, default=0)
    p_sel.add_argument("--oracle", action="store_true",
                       help="also print the brute-force ranking and regret")
    p_sel.set_defaults(func=cmd_select)

    p_mon = sub.add_parser("monitor", help="classify a voltage stream from stdin")
    p_mon.add_argument("--fault-model", required=True)
    p_mon.add_argument("--locator-models", required=True,
                       help="directory with locator_<kind>.gsnn checkpoints")
    p_mon.add_argument("--window", type=int, default=100)
    p_mon.set_defaults(func=cmd_monitor)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "train" and args.target != "solar" and not args.data:
        parser.error(f"train {args.target} requires --data")
    if args.command == "train" and args.target == "bus-locator" and not args.kind:
        parser.error("train bus-locator requires --kind")
    try:
        return args.func(args)
    except GridseerError as exc:
        print(f"gridseer {args.command}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"gridseer {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
