"""Solar-subset dispatch: scenario generation, penalties, surrogate, selection.

A scenario runs the grid with every solar plant on to capture the t=0+ state,
then switches one subset off at t=1 and re-solves. Two penalties price the
outcome: a mis-commitment penalty (absolute gap between the on-subset's
day-ahead commitment and its delivered power, min-max scaled onto [0, 50])
and a congestion penalty of exactly 50 when any branch limit is violated.
A dense surrogate learns total penalty from (pre-switch voltages, subset
mask); a brute-force simulator provides the ground-truth ranking.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegenerateData, IoError, NonConvergence, ParseError, ScalerNotFitted,
    TooManyGenerators, ValidationError,
)
from .grid import GridState, with_generators, with_loads, with_voltages
from .gridml import load_shape
from .nn import (
    ModelParams, adam_update, init_adam, init_dense, mlp_backward, mlp_forward,
    mse, param_dict, standardize_fit,
)
from .powerflow import check_congestion, solve_powerflow
from .weather import (
    WeatherSample, actual_solar_power, committed_solar_power, forecast_weather,
    sample_day_weather,
)

CONGESTION_PENALTY = 50.0
L1_SCALE_TOP = 50.0  # mis-commitment penalty is scaled onto [0, L1_SCALE_TOP]
MAX_ENUMERATED_GENERATORS = 20


@dataclass(frozen=True)
class SubsetMask:
    bits: tuple  # one 0/1 per solar generator, grid order

    def __post_init__(self):
        if not all(b in (0, 1) for b in self.bits):
            raise ValidationError("mask bits must be 0 or 1")

    @property
    def n_on(self) -> int:
        return int(sum(self.bits))

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=float)


def all_masks(n: int) -> list[SubsetMask]:
    """Every subset mask of n generators in lexicographic order."""
    if n > MAX_ENUMERATED_GENERATORS:
        raise TooManyGenerators(
            f"{n} solar generators exceed the enumeration bound "
            f"{MAX_ENUMERATED_GENERATORS}")
    return [SubsetMask(bits=bits) for bits in itertools.product((0, 1), repeat=n)]


@dataclass
class PenaltyScaler:
    """Affine min-max map of raw mis-commitment gaps onto [0, 50]."""
    l1_min: float | None = None
    l1_max: float | None = None

    def fit(self, raw_values) -> "PenaltyScaler":
        raw = np.asarray(raw_values, dtype=float)
        if raw.size == 0:
            raise DegenerateData("cannot fit a penalty scaler on no data")
        lo = float(raw.min())
        hi = float(raw.max())
        if hi <= lo:
            raise DegenerateData("raw mis-commitment penalties are all identical")
        self.l1_min = lo
        self.l1_max = hi
        return self

    @property
    def fitted(self) -> bool:
        return self.l1_min is not None and self.l1_max is not None

    def scale(self, raw: float) -> float:
        if not self.fitted:
            raise ScalerNotFitted("PenaltyScaler.fit was never called")
        span = self.l1_max - self.l1_min
        return float(np.clip((raw - self.l1_min) / span, 0.0, 1.0) * L1_SCALE_TOP)


@dataclass(frozen=True)
class SubsetScenario:
    day: int
    hour: int
    pre_voltages: np.ndarray  # per-bus |V| at t=0+ (all solar on)
    mask: SubsetMask
    weather: WeatherSample | None
    committed_power: np.ndarray  # per solar generator, pu
    actual_power: np.ndarray
    l1: float  # scaled mis-commitment penalty
    l2: float  # 0 or 50
    total: float  # l1 + l2 exactly
    converged: bool = True  # False when the post-switch flow failed
    p_loads: np.ndarray | None = None  # per-bus loads of the hour, for re-simulation
    q_loads: np.ndarray | None = None


def compute_l1(committed: float, delivered: float, scaler: PenaltyScaler) -> float:
    """Scaled mis-commitment penalty: |committed - delivered| of the on-subset.

    The difference is taken in absolute value: over- and under-delivery both
    deviate from the contract.
    """
    return scaler.scale(abs(committed - delivered))


def compute_l2(congested: bool) -> float:
    """Congestion penalty: exactly 50 when congested, else exactly 0."""
    return CONGESTION_PENALTY if congested else 0.0


# ---------------------------------------------------------------------------
# Scenario simulation
# ---------------------------------------------------------------------------

def apply_solar_mask(grid: GridState, mask: SubsetMask, actual_power) -> GridState:
    """Grid with each solar plant on/off per the mask, injecting its output.

    Injections are capped at the plant rating; off plants stay in the model
    with on=False so generator ordering is preserved.
    """
    solar_pos = 0
    gens = []
    for g in grid.generators:
        if g.kind == "Solar":
            on = bool(mask.bits[solar_pos])
            gens.append(replace(
                g, on=on,
                p_set=min(float(actual_power[solar_pos]), g.p_rated) if on else 0.0,
            ))
            solar_pos += 1
        else:
            gens.append(g)
    if solar_pos != len(mask.bits):
        raise ValidationError(
            f"mask has {len(mask.bits)} bits for {solar_pos} solar generators")
    return with_generators(grid, gens)


def _simulate_masks(grid_hour: GridState, masks, committed, actual):
    """All-on t=0+ solve, then one post-switch solve per mask.

    Returns (pre_voltages, rows) where each row is
    (mask, raw_l1, congested, converged).
    """
    n_solar = len(grid_hour.solar_generators())
    all_on = apply_solar_mask(grid_hour, SubsetMask(bits=(1,) * n_solar), actual)
    pre = solve_powerflow(all_on, enforce_q_limits=True)
    warm_base = with_voltages(grid_hour, pre.v_mag, pre.v_ang)

    committed = np.asarray(committed, dtype=float)
    actual_capped = np.minimum(
        np.asarray(actual, dtype=float),
        np.array([g.p_rated for g in grid_hour.solar_generators()]))
    rows = []
    for mask in masks:
        bits = mask.as_array()
        raw_l1 = abs(float(committed @ bits) - float(actual_capped @ bits))
        switched = apply_solar_mask(warm_base, mask, actual)
        try:
            post = solve_powerflow(switched, warm_start=True, enforce_q_limits=True)
            congested = check_congestion(post, switched).congested
            converged = True
        except NonConvergence:
            congested = True  # congestion-grade failure
            converged = False
        rows.append((mask, raw_l1, congested, converged))
    return pre, rows


def gen_subset_scenarios(grid: GridState, days: int = 14, seed: int = 0):
    """Scenario table over synthetic days: every hour x every subset mask.

    Returns (scenarios, scaler). The mis-commitment scaler is fitted on the
    training days (the first ~80%, the same day split train_surrogate uses)
    and applied to every scenario.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    solar = grid.solar_generators()
    if not solar:
        raise ValidationError("grid has no solar generators to dispatch")
    rated = np.array([g.p_rated for g in solar])
    masks = all_masks(len(solar))
    base_p = np.array([b.p_load for b in grid.buses])
    base_q = np.array([b.q_load for b in grid.buses])

    raw_records = []  # (day, hour, pre_v, weather, committed, actual, p, q, rows)
    for day in range(days):
        day_rng = np.random.default_rng(np.random.SeedSequence((seed, 8101, day)))
        weather_day = sample_day_weather(day_rng)
        for hour in range(24):
            w = weather_day[hour]
            actual = np.array([actual_solar_power(w, r, day_rng) for r in rated])
            forecast = forecast_weather(w, day_rng)
            committed = np.array([committed_solar_power(forecast, r) for r in rated])

            mult = load_shape(hour) * max(0.3, 1.0 + day_rng.normal(0.0, 0.05))
            jitter = 1.0 + day_rng.normal(0.0, 0.015, size=base_p.size)
            p = base_p * mult * jitter
            q = base_q * mult * jitter
            grid_hour = with_loads(grid, p, q)

            pre, rows = _simulate_masks(grid_hour, masks, committed, actual)
            raw_records.append((day, hour, pre.v_mag.copy(), w, committed, actual, p, q, rows))

    n_train_days = train_day_count(days)
    train_raws = [raw for (day, _, _, _, _, _, _, _, rows) in raw_records
                  if day < n_train_days for (_, raw, _, _) in rows]
    scaler = PenaltyScaler().fit(train_raws)

    scenarios = []
    for day, hour, pre_v, w, committed, actual, p, q, rows in raw_records:
        for mask, raw_l1, congested, converged in rows:
            l1 = scaler.scale(raw_l1)
            l2 = compute_l2(congested)
            scenarios.append(SubsetScenario(
                day=day, hour=hour, pre_voltages=pre_v, mask=mask, weather=w,
                committed_power=committed, actual_power=actual,
                l1=l1, l2=l2, total=l1 + l2, converged=converged,
                p_loads=p, q_loads=q,
            ))
    return scenarios, scaler


def train_day_count(days: int) -> int:
    """Days assigned to the training split (~80%, both splits nonempty)."""
    if days < 2:
        return days
    return min(max(int(round(days * 0.8)), 1), days - 1)


# ---------------------------------------------------------------------------
# Surrogate model
# ---------------------------------------------------------------------------

def _scenario_features(scenario: SubsetScenario) -> np.ndarray:
    return np.concatenate([scenario.pre_voltages, scenario.mask.as_array()])


def train_surrogate(scenarios, seed: int = 0, steps: int = 2500,
                    batch_size: int = 32, lr: float = 1e-3,
                    hidden: int = 200, eval_every: int = 50) -> ModelParams:
    """Dense surrogate (1 hidden layer of 200) for total penalty of a subset.

    Input is the pre-switch voltage profile concatenated with the mask bits;
    the loss is the squared error against l1+l2. Runs a fixed number of Adam
    steps over day-split training data and records a loss curve.
    """
    scenarios = list(scenarios)
    if len(scenarios) < 100:
        raise DegenerateData(f"need >= 100 scenarios, got {len(scenarios)}")
    y = np.array([s.total for s in scenarios])
    if np.all(y == y[0]):
        raise DegenerateData("every scenario has the same total penalty")
    x = np.stack([_scenario_features(s) for s in scenarios])

    days = sorted({s.day for s in scenarios})
    n_train_days = train_day_count(len(days))
    train_days = set(days[:n_train_days])
    train_idx = np.array([i for i, s in enumerate(scenarios) if s.day in train_days])
    test_idx = np.array([i for i, s in enumerate(scenarios) if s.day not in train_days])

    mean, std = standardize_fit(x[train_idx])
    xs = (x - mean) / std

    rng = np.random.default_rng(np.random.SeedSequence((seed, 8201)))
    model = ModelParams(
        kind="SubsetSurrogate",
        layers=[init_dense(x.shape[1], hidden, "relu", rng),
                init_dense(hidden, 1, "identity", rng)],
        arrays={"feat_mean": mean, "feat_std": std},
        metadata={"seed": seed, "steps": steps, "n_scenarios": len(scenarios)},
    )
    params = param_dict(model)
    adam = init_adam(params, lr=lr)

    def full_mse(idx):
        if idx.size == 0:
            return 0.0
        out, _ = mlp_forward(model.layers, xs[idx])
        return float(((out[:, 0] - y[idx]) ** 2).mean())

    curve = []
    order = np.array([], dtype=int)
    cursor = 0
    epoch = 0
    for step in range(steps):
        if cursor + batch_size > order.size:
            order = np.random.default_rng(
                np.random.SeedSequence((seed, 8202, epoch))).permutation(train_idx.size)
            cursor = 0
            epoch += 1
        sel = train_idx[order[cursor:cursor + batch_size]]
        cursor += batch_size
        out, caches = mlp_forward(model.layers, xs[sel])
        _, dout = mse(out[:, 0], y[sel])
        grads_list, _ = mlp_backward(model.layers, caches, dout[:, None])
        grads = {}
        for li, g in enumerate(grads_list):
            grads[f"layer{li}.w"] = g["w"]
            grads[f"layer{li}.b"] = g["b"]
        adam_update(adam, params, grads)
        if (step + 1) % eval_every == 0 or step == steps - 1:
            curve.append((step + 1, full_mse(train_idx), full_mse(test_idx)))

    uncon = np.array([i for i in test_idx if scenarios[i].l2 == 0.0])
    congested = np.array([i for i in test_idx if scenarios[i].l2 > 0.0])
    model.metadata.update({
        "train_mse": full_mse(train_idx),
        "test_mse": full_mse(test_idx),
        "test_mse_uncongested": full_mse(uncon),
        "test_mse_congested": full_mse(congested),
        "curve": [list(c) for c in curve],
        "n_train": int(train_idx.size),
        "n_test": int(test_idx.size),
        "train_days": sorted(train_days),
    })
    return model


def surrogate_predict(model: ModelParams, pre_voltages, masks) -> np.ndarray:
    """Predicted total penalty for each mask given one voltage profile."""
    pre_voltages = np.asarray(pre_voltages, dtype=float)
    feats = np.stack([np.concatenate([pre_voltages, m.as_array()]) for m in masks])
    xs = (feats - model.arrays["feat_mean"]) / model.arrays["feat_std"]
    out, _ = mlp_forward(model.layers, xs)
    return out[:, 0]


def select_optimal_subset(model: ModelParams, pre_voltages, n_solar: int):
    """Exhaustive surrogate argmin over all 2^n masks.

    Ties prefer more generators on, then the lexicographically smallest mask.
    Returns (mask, predicted total penalty).
    """
    if n_solar > MAX_ENUMERATED_GENERATORS:
        raise TooManyGenerators(
            f"{n_solar} solar generators exceed the enumeration bound "
            f"{MAX_ENUMERATED_GENERATORS}")
    masks = all_masks(n_solar)
    preds = surrogate_predict(model, pre_voltages, masks)
    best = min(range(len(masks)),
               key=lambda i: (preds[i], -masks[i].n_on, masks[i].bits))
    return masks[best], float(preds[best])


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

def brute_force_best_subset(grid: GridState, weather: WeatherSample | None,
                            committed, actual, scaler: PenaltyScaler):
    """True penalty of every mask by full simulation, ranked ascending.

    The grid must already carry the hour's loads; weather is contextual (the
    penalties depend on it only through committed/actual). Non-convergent
    masks are kept in the ranking, flagged by their congestion-grade l2.
    """
    if not scaler.fitted:
        raise ScalerNotFitted("brute_force_best_subset needs a fitted scaler")
    n_solar = len(grid.solar_generators())
    masks = all_masks(n_solar)
    _, rows = _simulate_masks(grid, masks, committed, actual)
    ranked = []
    for mask, raw_l1, congested, converged in rows:
        l1 = scaler.scale(raw_l1)
        total = l1 + compute_l2(congested)
        ranked.append((mask, total))
    ranked.sort(key=lambda item: (item[1], -item[0].n_on, item[0].bits))
    return ranked


# ---------------------------------------------------------------------------
# Scenario file I/O
# ---------------------------------------------------------------------------

def save_scenarios(scenarios, scaler: PenaltyScaler, csv_path, seed: int,
                   grid_hash: str) -> None:
    """Scenario CSV plus a JSON sidecar carrying the scaler bounds."""
    scenarios = list(scenarios)
    n_buses = scenarios[0].pre_voltages.size
    n_solar = len(scenarios[0].mask.bits)
    header = ["day", "hour"]
    header += [f"v_b{b}" for b in range(1, n_buses + 1)]
    header += [f"m_g{i}" for i in range(1, n_solar + 1)]
    header += ["committed_total", "actual_total", "l1", "l2", "total"]
    try:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for s in scenarios:
                row = [s.day, s.hour]
                row += [repr(v) for v in s.pre_voltages.tolist()]
                row += list(s.mask.bits)
                row += [repr(float(s.committed_power.sum())),
                        repr(float(s.actual_power.sum())),
                        repr(s.l1), repr(s.l2), repr(s.total)]
                writer.writerow(row)
        sidecar = {"l1_min": scaler.l1_min, "l1_max": scaler.l1_max,
                   "seed": seed, "grid_hash": grid_hash}
        with open(str(csv_path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write scenarios {csv_path}: {exc}") from exc


def load_scenarios(csv_path):
    """Read a scenario CSV written by save_scenarios; returns (scenarios, scaler).

    Weather and per-generator powers are not stored in the CSV; loaded
    scenarios carry the totals (enough to train and evaluate a surrogate).
    """
    try:
        with open(str(csv_path) + ".json", "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    except OSError as exc:
        raise IoError(f"missing scenario sidecar for {csv_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed scenario sidecar: {exc}") from exc
    scaler = PenaltyScaler(l1_min=float(sidecar["l1_min"]),
                           l1_max=float(sidecar["l1_max"]))

    scenarios = []
    try:
        with open(csv_path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            n_buses = sum(1 for h in header if h.startswith("v_b"))
            n_solar = sum(1 for h in header if h.startswith("m_g"))
            for line in reader:
                day, hour = int(line[0]), int(line[1])
                v = np.array([float(x) for x in line[2:2 + n_buses]])
                bits = tuple(int(x) for x in line[2 + n_buses:2 + n_buses + n_solar])
                committed_total, actual_total, l1, l2, total = (
                    float(x) for x in line[2 + n_buses + n_solar:])
                scenarios.append(SubsetScenario(
                    day=day, hour=hour, pre_voltages=v, mask=SubsetMask(bits=bits),
                    weather=None,
                    committed_power=np.array([committed_total]),
                    actual_power=np.array([actual_total]),
                    l1=l1, l2=l2, total=total,
                ))
    except OSError as exc:
        raise IoError(f"cannot read scenarios {csv_path}: {exc}") from exc
    return scenarios, scaler
