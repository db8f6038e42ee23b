"""Task-level models: fault-type classification, faulted-bus localization,
solar-power prediction from weather, and congestion prediction.

The two trace tasks share one recurrent trunk recipe: per-bus standardized
voltage traces are folded through an LSTM (hidden size 128 by default), and
the final hidden vector feeds a small dense head. Training uses Adam on
softmax cross-entropy with an 80/20 stratified split, seeded shuffling, and
early stopping once the held-out accuracy has plateaued.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegenerateLabels, NonConvergence, ShapeMismatch, ValidationError,
)
from .faultsim import FAULT_KINDS, NO_FAULT, FaultDataset
from .grid import GridState, with_loads, with_generators
from .nn import (
    ModelParams,
    adam_update, bce_logits, clip_gradients, init_adam, init_dense, init_lstm,
    lstm_backward_batch, lstm_forward_batch, mlp_backward, mlp_forward,
    param_dict, sigmoid, softmax_xent, mse, standardize_fit, svm_predict,
    svm_train,
)
from .powerflow import check_congestion, solve_powerflow
from .weather import (
    WeatherSample, actual_solar_power, committed_solar_power, forecast_weather,
    sample_weather, solar_capacity_factor,
)

TWO_CLASS_KINDS = ("LineLine", "LineGround")  # unsymmetrical-fault head

# Hourly demand profile: overnight valley, a gentle daytime rise, and a
# four-hour midday block peak that coincides with solar production. The
# contrast is deliberate: conventional plants alone serve any off-peak hour
# with margin, so losing the solar fleet threatens congestion only inside
# the midday block.
def load_shape(hour: float) -> float:
    day = max(0.0, np.sin(np.pi * (hour - 6.0) / 13.0)) if 6.0 <= hour <= 19.0 else 0.0
    peak = 0.32 if 11 <= hour <= 14 else 0.0
    return 0.64 + 0.14 * day + peak


@dataclass
class ClassifierConfig:
    lstm_hidden: int = 128
    dense_hidden: int = 64
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    patience: int = 5  # early stop after this many epochs without improvement
    clip_norm: float = 5.0


@dataclass(frozen=True)
class CongestionSample:
    committed_solar: np.ndarray  # per solar generator, pu
    actual_solar: np.ndarray
    predicted_solar: np.ndarray  # NaN when no solar model was supplied
    load_profile: np.ndarray  # per-bus active load, pu
    congested: bool
    weather: WeatherSample
    converged: bool = True


# ---------------------------------------------------------------------------
# Splits and metrics
# ---------------------------------------------------------------------------

def stratified_split(strata, test_frac: float, seed: int):
    """Deterministic stratified index split; returns (train_idx, test_idx).

    Every stratum with at least two members appears in both partitions.
    """
    strata = list(strata)
    by_stratum: dict = {}
    for i, key in enumerate(strata):
        by_stratum.setdefault(key, []).append(i)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 7001)))
    train, test = [], []
    for key in sorted(by_stratum):
        idx = np.array(by_stratum[key])
        perm = rng.permutation(idx.size)
        n_test = int(round(test_frac * idx.size))
        if idx.size >= 2:
            n_test = min(max(n_test, 1), idx.size - 1)
        else:
            n_test = 0
        test.extend(idx[perm[:n_test]])
        train.extend(idx[perm[n_test:]])
    return np.array(sorted(train)), np.array(sorted(test))


def classification_metrics(y_true, y_pred, label_names) -> dict:
    """Accuracy, confusion matrix and per-class precision/recall as a dict."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    k = len(label_names)
    confusion = np.zeros((k, k), dtype=int)
    for t, p in zip(y_true, y_pred):
        confusion[t, p] += 1
    total = int(confusion.sum())
    accuracy = float(np.trace(confusion)) / total if total else 0.0
    per_class = {}
    for c, name in enumerate(label_names):
        support = int(confusion[c].sum())
        predicted = int(confusion[:, c].sum())
        tp = int(confusion[c, c])
        per_class[str(name)] = {
            "precision": tp / predicted if predicted else 0.0,
            "recall": tp / support if support else 0.0,
            "support": support,
        }
    return {
        "n": total,
        "accuracy": accuracy,
        "confusion": confusion.tolist(),
        "labels": [str(n) for n in label_names],
        "per_class": per_class,
    }


def write_curve_csv(curve, path, header=("epoch", "train_acc", "test_acc")) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in curve:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def metrics_json(metrics: dict) -> str:
    """Canonical JSON for a metrics record (byte-stable for fixed inputs)."""
    return json.dumps(metrics, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Shared trace-classifier machinery
# ---------------------------------------------------------------------------

def _stack_traces(traces) -> np.ndarray:
    return np.stack([t.samples for t in traces])


def _trace_logits(model: ModelParams, x_btd: np.ndarray, batch: int = 512) -> np.ndarray:
    mean = model.arrays["feat_mean"]
    std = model.arrays["feat_std"]
    lstm = model.layers[0]
    head = model.layers[1:]
    outs = []
    for start in range(0, x_btd.shape[0], batch):
        xb = (x_btd[start:start + batch] - mean) / std
        h, _ = lstm_forward_batch(lstm, xb, want_cache=False)
        logits, _ = mlp_forward(head, h)
        outs.append(logits)
    return np.concatenate(outs, axis=0)


def _train_trace_classifier(x_all: np.ndarray, y_all: np.ndarray, n_classes: int,
                            train_idx, test_idx, config: ClassifierConfig,
                            seed: int) -> tuple[ModelParams, list]:
    n, t_steps, n_buses = x_all.shape
    mean, std = standardize_fit(x_all[train_idx].reshape(-1, n_buses))

    rng = np.random.default_rng(np.random.SeedSequence((seed, 7101)))
    model = ModelParams(
        kind="trace",
        layers=[
            init_lstm(n_buses, config.lstm_hidden, rng),
            init_dense(config.lstm_hidden, config.dense_hidden, "relu", rng),
            init_dense(config.dense_hidden, n_classes, "identity", rng),
        ],
        arrays={"feat_mean": mean, "feat_std": std},
    )
    params = param_dict(model)
    adam = init_adam(params, lr=config.lr)
    lstm = model.layers[0]
    head = model.layers[1:]

    y_train = y_all[train_idx]
    y_test = y_all[test_idx]
    curve = []
    best_acc = -1.0
    best_params = None
    best_epoch = 0
    stale = 0
    for epoch in range(config.epochs):
        order = np.random.default_rng(
            np.random.SeedSequence((seed, 7202, epoch))).permutation(train_idx.size)
        correct = 0
        for start in range(0, order.size, config.batch_size):
            sel = train_idx[order[start:start + config.batch_size]]
            xb = (x_all[sel] - mean) / std
            yb = y_all[sel]
            h, caches = lstm_forward_batch(lstm, xb)
            logits, mcaches = mlp_forward(head, h)
            correct += int((np.argmax(logits, axis=1) == yb).sum())
            _, dlogits = softmax_xent(logits, yb)
            head_grads, dh = mlp_backward(head, mcaches, dlogits)
            lstm_grads = lstm_backward_batch(lstm, caches, dh)
            grads = {f"layer0.{k}": v for k, v in lstm_grads.items()}
            for li, g in enumerate(head_grads, start=1):
                grads[f"layer{li}.w"] = g["w"]
                grads[f"layer{li}.b"] = g["b"]
            clip_gradients(grads, config.clip_norm)
            adam_update(adam, params, grads)
        train_acc = correct / max(train_idx.size, 1)
        test_logits = _trace_logits(model, x_all[test_idx])
        test_acc = float((np.argmax(test_logits, axis=1) == y_test).mean()) if y_test.size else 0.0
        curve.append((epoch, float(train_acc), test_acc))
        if test_acc > best_acc:
            best_acc = test_acc
            best_params = {k: v.copy() for k, v in params.items()}
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    if best_params is not None:
        for key, value in best_params.items():
            params[key][...] = value
    model.metadata = {
        "seed": seed,
        "epochs_run": len(curve),
        "best_epoch": best_epoch,
        "train_accuracy": curve[best_epoch][1],
        "test_accuracy": best_acc,
        "curve": [list(c) for c in curve],
        "n_train": int(train_idx.size),
        "n_test": int(test_idx.size),
    }
    return model, curve


# ---------------------------------------------------------------------------
# Fault-type task
# ---------------------------------------------------------------------------

def train_fault_type_model(dataset: FaultDataset, config: ClassifierConfig | None = None,
                           seed: int = 0, mode: str = "full") -> ModelParams:
    """Fault-kind classifier over faulted traces.

    mode "full" discriminates all four kinds; mode "two_class" restricts the
    data and the output layer to the two unsymmetrical kinds (line-to-line vs
    line-to-ground).
    """
    config = config or ClassifierConfig()
    kinds = FAULT_KINDS if mode == "full" else TWO_CLASS_KINDS
    if mode not in ("full", "two_class"):
        raise ValueError(f"unknown mode {mode!r}")
    traces = [t for t in dataset.traces if t.label_kind in kinds]
    present = sorted({t.label_kind for t in traces})
    if len(present) < 2:
        raise DegenerateLabels(
            f"fault-type training needs >= 2 kinds, found {present}")
    x_all = _stack_traces(traces)
    y_all = np.array([kinds.index(t.label_kind) for t in traces])
    strata = [(t.label_kind, t.label_bus) for t in traces]
    train_idx, test_idx = stratified_split(strata, 0.2, seed)

    model, _ = _train_trace_classifier(
        x_all, y_all, len(kinds), train_idx, test_idx, config, seed)
    model.kind = "FaultType"
    model.metadata.update({
        "label_names": list(kinds),
        "mode": mode,
        "dataset_hash": dataset.grid_hash,
        "dataset_seed": dataset.seed,
    })
    return model


def classify_fault_type(model: ModelParams, trace):
    """Most likely fault kind and the full probability vector for one trace."""
    samples = trace.samples if hasattr(trace, "samples") else np.asarray(trace)
    logits = _trace_logits(model, samples[None, :, :])[0]
    e = np.exp(logits - logits.max())
    probs = e / e.sum()
    return model.metadata["label_names"][int(np.argmax(probs))], probs


# ---------------------------------------------------------------------------
# Bus-locator task
# ---------------------------------------------------------------------------

def train_bus_locator(dataset: FaultDataset, fault_kind: str,
                      config: ClassifierConfig | None = None, seed: int = 0,
                      n_buses: int | None = None) -> ModelParams:
    """Faulted-bus classifier for one fault kind.

    Classes are 0 (healthy) plus bus ids 1..N; the training set pairs the
    kind's traces with an equal-size seeded subsample of NoFault traces so
    the healthy class is balanced against the faulted ones.
    """
    config = config or ClassifierConfig()
    if fault_kind not in FAULT_KINDS:
        raise ValueError(f"unknown fault kind {fault_kind!r}")
    kind_traces = [t for t in dataset.traces if t.label_kind == fault_kind]
    nofault_traces = [t for t in dataset.traces if t.label_kind == NO_FAULT]
    if not kind_traces:
        raise DegenerateLabels(f"dataset has no {fault_kind} traces")
    if nofault_traces:
        rng = np.random.default_rng(
            np.random.SeedSequence((seed, 7303, FAULT_KINDS.index(fault_kind))))
        take = min(len(kind_traces), len(nofault_traces))
        chosen = np.sort(rng.choice(len(nofault_traces), size=take, replace=False))
        nofault_traces = [nofault_traces[i] for i in chosen]
    traces = kind_traces + nofault_traces
    if n_buses is None:
        n_buses = traces[0].samples.shape[1]

    x_all = _stack_traces(traces)
    y_all = np.array([t.label_bus for t in traces])
    train_idx, test_idx = stratified_split(list(y_all), 0.2, seed)

    model, _ = _train_trace_classifier(
        x_all, y_all, n_buses + 1, train_idx, test_idx, config, seed)
    model.kind = "BusLocator"
    model.metadata.update({
        "fault_kind": fault_kind,
        "n_buses": n_buses,
        "label_names": [str(b) for b in range(n_buses + 1)],
        "dataset_hash": dataset.grid_hash,
        "dataset_seed": dataset.seed,
    })
    return model


def predict_fault_bus(model: ModelParams, trace):
    """Predicted bus id (0 = healthy) and probability vector for one trace."""
    samples = trace.samples if hasattr(trace, "samples") else np.asarray(trace)
    logits = _trace_logits(model, samples[None, :, :])[0]
    e = np.exp(logits - logits.max())
    probs = e / e.sum()
    return int(np.argmax(probs)), probs


# ---------------------------------------------------------------------------
# SVM baseline on traces
# ---------------------------------------------------------------------------

def train_fault_type_svm(dataset: FaultDataset, seed: int = 0,
                         epochs: int = 30) -> ModelParams:
    """Linear-SVM fault-kind baseline on flattened standardized traces.

    Uses the same stratified split as train_fault_type_model for a fair
    comparison.
    """
    traces = [t for t in dataset.traces if t.label_kind in FAULT_KINDS]
    x_all = _stack_traces(traces)
    y_all = np.array([FAULT_KINDS.index(t.label_kind) for t in traces])
    strata = [(t.label_kind, t.label_bus) for t in traces]
    train_idx, test_idx = stratified_split(strata, 0.2, seed)

    flat = x_all.reshape(x_all.shape[0], -1)
    model = svm_train(flat[train_idx], y_all[train_idx], epochs=epochs, seed=seed)
    model.metadata.update({
        "task": "fault_type",
        "label_names": list(FAULT_KINDS),
        "n_train": int(train_idx.size),
        "n_test": int(test_idx.size),
        "dataset_seed": dataset.seed,
    })
    return model


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate(model, traces, truth: str = "kind") -> dict:
    """Deterministic metrics record for a model over labeled traces.

    model may be a trained ModelParams (FaultType, BusLocator, SvmBaseline)
    or any callable trace -> label index (used by test stubs); truth selects
    the ground-truth labeling for callables ("kind" or "bus").
    """
    traces = list(traces)
    if isinstance(model, ModelParams) and model.kind == "FaultType":
        names = model.metadata["label_names"]
        y_true = np.array([names.index(t.label_kind) for t in traces])
        logits = _trace_logits(model, _stack_traces(traces))
        y_pred = np.argmax(logits, axis=1)
    elif isinstance(model, ModelParams) and model.kind == "BusLocator":
        names = model.metadata["label_names"]
        y_true = np.array([t.label_bus for t in traces])
        logits = _trace_logits(model, _stack_traces(traces))
        y_pred = np.argmax(logits, axis=1)
    elif isinstance(model, ModelParams) and model.kind == "SvmBaseline":
        names = model.metadata["label_names"]
        y_true = np.array([names.index(t.label_kind) for t in traces])
        flat = _stack_traces(traces).reshape(len(traces), -1)
        y_pred = svm_predict(model, flat)
    elif callable(model):
        if truth == "kind":
            names = list(FAULT_KINDS) + [NO_FAULT]
            y_true = np.array([names.index(t.label_kind) for t in traces])
        elif truth == "bus":
            n_buses = traces[0].samples.shape[1]
            names = [str(b) for b in range(n_buses + 1)]
            y_true = np.array([t.label_bus for t in traces])
        else:
            raise ValueError(f"unknown truth {truth!r}")
        y_pred = np.array([int(model(t)) for t in traces])
    else:
        raise ShapeMismatch(f"cannot evaluate object of kind {getattr(model, 'kind', type(model))}")
    return classification_metrics(y_true, y_pred, names)


# ---------------------------------------------------------------------------
# Solar-power prediction from weather
# ---------------------------------------------------------------------------

def _weather_features(weather: WeatherSample) -> np.ndarray:
    return np.array([weather.irradiance, weather.ambient_temp,
                     weather.cloud_cover, float(weather.hour)])


def train_solar_model(seed: int = 0, n_samples: int = 6000,
                      epochs: int = 60, lr: float = 1e-3) -> ModelParams:
    """Dense net (1 hidden layer of 32) mapping weather to capacity factor.

    Targets are the noise-free production formula (the quantity a dispatcher
    wants predicted), so zero irradiance maps to nearly zero output.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 7404)))
    weathers = [sample_weather(rng) for _ in range(n_samples)]
    x = np.stack([_weather_features(w) for w in weathers])
    y = np.array([solar_capacity_factor(w) for w in weathers])

    mean, std = standardize_fit(x)
    xs = (x - mean) / std

    init_rng = np.random.default_rng(np.random.SeedSequence((seed, 7405)))
    model = ModelParams(
        kind="SolarPower",
        layers=[init_dense(4, 32, "relu", init_rng),
                init_dense(32, 1, "identity", init_rng)],
        arrays={"feat_mean": mean, "feat_std": std},
        metadata={"seed": seed, "n_samples": n_samples},
    )
    params = param_dict(model)
    adam = init_adam(params, lr=lr)
    batch = 32
    for epoch in range(epochs):
        order = np.random.default_rng(
            np.random.SeedSequence((seed, 7406, epoch))).permutation(n_samples)
        for start in range(0, n_samples, batch):
            sel = order[start:start + batch]
            out, caches = mlp_forward(model.layers, xs[sel])
            _, dout = mse(out[:, 0], y[sel])
            grads_list, _ = mlp_backward(model.layers, caches, dout[:, None])
            grads = {}
            for li, g in enumerate(grads_list):
                grads[f"layer{li}.w"] = g["w"]
                grads[f"layer{li}.b"] = g["b"]
            adam_update(adam, params, grads)
    out, _ = mlp_forward(model.layers, xs)
    model.metadata["train_mse"] = float(((out[:, 0] - y) ** 2).mean())
    return model


def predict_solar_power(model: ModelParams, weather: WeatherSample,
                        rated: float) -> float:
    """Predicted plant output, clamped to [0, rated]."""
    if model.kind != "SolarPower":
        raise ShapeMismatch(f"expected a SolarPower model, got {model.kind}")
    x = (_weather_features(weather) - model.arrays["feat_mean"]) / model.arrays["feat_std"]
    out, _ = mlp_forward(model.layers, x[None, :])
    return float(np.clip(out[0, 0], 0.0, 1.0) * rated)


# ---------------------------------------------------------------------------
# Congestion prediction
# ---------------------------------------------------------------------------

def gen_congestion_samples(grid: GridState, n_samples: int, seed: int = 0,
                           solar_model: ModelParams | None = None) -> list:
    """Labeled congestion scenarios: random hour, weather and load level.

    The label comes from a steady-state power flow with every solar plant
    injecting its realized output; a non-convergent stress case counts as
    congested. predicted_solar is filled from the supplied solar model (NaN
    otherwise).
    """
    solar = grid.solar_generators()
    rated = np.array([g.p_rated for g in solar])
    base_p = np.array([b.p_load for b in grid.buses])
    base_q = np.array([b.q_load for b in grid.buses])
    samples = []
    for i in range(n_samples):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 7501, i)))
        weather = sample_weather(rng)
        actual = np.array([actual_solar_power(weather, r, rng) for r in rated])
        forecast = forecast_weather(weather, rng)
        committed = np.array([committed_solar_power(forecast, r) for r in rated])
        if solar_model is not None:
            pred = np.array([predict_solar_power(solar_model, weather, r) for r in rated])
        else:
            pred = np.full(rated.shape, np.nan)

        mult = load_shape(weather.hour) * max(0.3, 1.0 + rng.normal(0.0, 0.07))
        bus_jitter = 1.0 + rng.normal(0.0, 0.015, size=base_p.size)
        p = base_p * mult * bus_jitter
        q = base_q * mult * bus_jitter

        gens = []
        solar_pos = 0
        for g in grid.generators:
            if g.kind == "Solar":
                gens.append(replace(g, p_set=min(actual[solar_pos], g.p_rated), on=True))
                solar_pos += 1
            else:
                gens.append(g)
        scenario_grid = with_generators(with_loads(grid, p, q), gens)
        try:
            sol = solve_powerflow(scenario_grid, enforce_q_limits=True)
            congested = check_congestion(sol, scenario_grid).congested
            converged = True
        except NonConvergence:
            congested = True
            converged = False
        samples.append(CongestionSample(
            committed_solar=committed, actual_solar=actual, predicted_solar=pred,
            load_profile=p, congested=congested, weather=weather, converged=converged,
        ))
    return samples


def _congestion_features(sample: CongestionSample, mode: str) -> np.ndarray:
    if mode == "KnownPower":
        solar = sample.actual_solar
    elif mode == "PredictedPower":
        solar = sample.predicted_solar
        if np.any(np.isnan(solar)):
            raise ValidationError(
                "PredictedPower mode needs samples generated with a solar model")
    else:
        raise ValueError(f"unknown congestion mode {mode!r}")
    return np.concatenate([
        sample.committed_solar, solar,
        [sample.load_profile.sum(), float(sample.weather.hour)],
    ])


def train_congestion_model(samples, mode: str, seed: int = 0,
                           epochs: int = 60, lr: float = 1e-3,
                           patience: int = 8) -> ModelParams:
    """Binary congestion classifier (1 hidden layer of 32, sigmoid output)."""
    samples = list(samples)
    y = np.array([float(s.congested) for s in samples])
    if np.unique(y).size < 2:
        raise DegenerateLabels("congestion training needs both labels present")
    x = np.stack([_congestion_features(s, mode) for s in samples])
    train_idx, test_idx = stratified_split(y.astype(int).tolist(), 0.2, seed)

    mean, std = standardize_fit(x[train_idx])
    xs = (x - mean) / std

    rng = np.random.default_rng(np.random.SeedSequence((seed, 7601)))
    model = ModelParams(
        kind="Congestion",
        layers=[init_dense(x.shape[1], 32, "relu", rng),
                init_dense(32, 1, "identity", rng)],
        arrays={"feat_mean": mean, "feat_std": std},
        metadata={"seed": seed, "mode": mode},
    )
    params = param_dict(model)
    adam = init_adam(params, lr=lr)
    batch = 32
    curve = []
    best_acc, best_params, stale, best_epoch = -1.0, None, 0, 0
    for epoch in range(epochs):
        order = np.random.default_rng(
            np.random.SeedSequence((seed, 7602, epoch))).permutation(train_idx.size)
        correct = 0
        for start in range(0, order.size, batch):
            sel = train_idx[order[start:start + batch]]
            out, caches = mlp_forward(model.layers, xs[sel])
            logits = out[:, 0]
            correct += int(((logits > 0.0) == (y[sel] > 0.5)).sum())
            _, dlogits = bce_logits(logits, y[sel])
            grads_list, _ = mlp_backward(model.layers, caches, dlogits[:, None])
            grads = {}
            for li, g in enumerate(grads_list):
                grads[f"layer{li}.w"] = g["w"]
                grads[f"layer{li}.b"] = g["b"]
            adam_update(adam, params, grads)
        train_acc = correct / max(train_idx.size, 1)
        test_out, _ = mlp_forward(model.layers, xs[test_idx])
        test_acc = float(((test_out[:, 0] > 0.0) == (y[test_idx] > 0.5)).mean())
        curve.append((epoch, float(train_acc), test_acc))
        if test_acc > best_acc:
            best_acc, best_epoch, stale = test_acc, epoch, 0
            best_params = {k: v.copy() for k, v in params.items()}
        else:
            stale += 1
            if stale >= patience:
                break
    if best_params is not None:
        for key, value in best_params.items():
            params[key][...] = value
    model.metadata.update({
        "epochs_run": len(curve),
        "best_epoch": best_epoch,
        "train_accuracy": curve[best_epoch][1],
        "test_accuracy": best_acc,
        "curve": [list(c) for c in curve],
        "n_train": int(train_idx.size),
        "n_test": int(test_idx.size),
    })
    return model


def predict_congestion(model: ModelParams, sample: CongestionSample) -> float:
    """Probability that the sampled operating state is congested."""
    if model.kind != "Congestion":
        raise ShapeMismatch(f"expected a Congestion model, got {model.kind}")
    x = _congestion_features(sample, model.metadata["mode"])
    xs = (x - model.arrays["feat_mean"]) / model.arrays["feat_std"]
    out, _ = mlp_forward(model.layers, xs[None, :])
    return float(sigmoid(out[:, 0])[0])
