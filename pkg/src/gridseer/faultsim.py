"""Fault injection and synthesis of labeled bus-voltage time series.

Four fault kinds are modeled: three-phase bus faults, branch trips, and the
two unsymmetrical short circuits (line-to-line and line-to-ground) computed
through sequence networks. Each synthesized trace is a T x N matrix of
per-unit voltage magnitudes with the fault kind and faulted bus as labels;
generation is fully deterministic given a seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import IoError, ParseError, SingularNetwork, ValidationError
from .grid import GridState, grid_checksum, with_branch_status, with_loads
from .powerflow import PowerFlowSolution, build_ybus, solve_powerflow

FAULT_KINDS = ("ThreePhase", "BranchTrip", "LineLine", "LineGround")
NO_FAULT = "NoFault"

# Generator model used in the fault networks: 1.0 pu source behind x'' = 0.2,
# solidly grounded neutral with the same reactance in the zero sequence.
GEN_SUBTRANSIENT_X = 0.2
GEN_ZERO_X = 0.2
ZERO_SEQ_X_FACTOR = 3.0  # branch zero-sequence reactance multiplier

TRACE_STEPS = 100
SAMPLE_DT = 0.040  # seconds per sample
ONSET_MIN, ONSET_MAX = 10, 50
SWING_TAU = 0.5  # damping time constant of the post-fault envelope, seconds
SWING_FREQ = 1.5  # electromechanical swing frequency, Hz
NOISE_SIGMA = 0.002  # measurement noise, pu
LOAD_PERTURBATION = 0.05  # +-5% uniform load variation per trace

_A = np.exp(2j * np.pi / 3.0)  # Fortescue operator


@dataclass(frozen=True)
class FaultSpec:
    kind: str
    bus_id: int | None = None  # ThreePhase / LineLine / LineGround
    branch_index: int | None = None  # BranchTrip
    z_fault: float = 0.0  # pu, 0 = bolted
    onset_step: int = 20

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise ValidationError(f"unknown fault kind {self.kind!r}")
        wants_branch = self.kind == "BranchTrip"
        if wants_branch and not (self.branch_index is not None and self.bus_id is None):
            raise ValidationError("BranchTrip must set branch_index and not bus_id")
        if not wants_branch and not (self.bus_id is not None and self.branch_index is None):
            raise ValidationError(f"{self.kind} must set bus_id and not branch_index")
        if not np.isfinite(self.z_fault) or self.z_fault < 0:
            raise ValidationError("z_fault must be finite and >= 0")
        if not (ONSET_MIN <= self.onset_step <= ONSET_MAX):
            raise ValidationError(
                f"onset_step must lie in [{ONSET_MIN}, {ONSET_MAX}]")


@dataclass(frozen=True)
class SequenceImpedances:
    """Thevenin impedances seen from one bus; z2 == z1 (non-salient machines)."""
    z1: complex
    z2: complex
    z0: complex


@dataclass(frozen=True)
class VoltageTrace:
    samples: np.ndarray  # [T, N] voltage magnitudes, pu
    dt: float
    label_kind: str  # a FAULT_KINDS member or NO_FAULT
    label_bus: int  # 0 iff label_kind == NoFault

    def __post_init__(self):
        t, n = self.samples.shape
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("trace contains non-finite samples")
        if self.samples.min() < 0.0 or self.samples.max() > 2.0:
            raise ValidationError("trace samples must lie in [0, 2] pu")
        if (self.label_bus == 0) != (self.label_kind == NO_FAULT):
            raise ValidationError("label_bus must be 0 exactly for NoFault traces")


@dataclass
class FaultDataset:
    traces: list
    seed: int
    grid_hash: str
    dt: float = SAMPLE_DT

    @property
    def n_steps(self) -> int:
        return self.traces[0].samples.shape[0]

    @property
    def n_buses(self) -> int:
        return self.traces[0].samples.shape[1]


# ---------------------------------------------------------------------------
# Symmetrical components
# ---------------------------------------------------------------------------

def symmetrical_components(phasors) -> tuple[complex, complex, complex]:
    """Fortescue transform of three phase phasors -> (zero, positive, negative)."""
    va, vb, vc = complex(phasors[0]), complex(phasors[1]), complex(phasors[2])
    zero = (va + vb + vc) / 3.0
    positive = (va + _A * vb + _A * _A * vc) / 3.0
    negative = (va + _A * _A * vb + _A * vc) / 3.0
    return zero, positive, negative


def inverse_symmetrical_components(sequence) -> tuple[complex, complex, complex]:
    """Rebuild phase phasors (a, b, c) from (zero, positive, negative)."""
    v0, v1, v2 = complex(sequence[0]), complex(sequence[1]), complex(sequence[2])
    va = v0 + v1 + v2
    vb = v0 + _A * _A * v1 + _A * v2
    vc = v0 + _A * v1 + _A * _A * v2
    return va, vb, vc


# ---------------------------------------------------------------------------
# Sequence networks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FaultNetworks:
    """Full positive- and zero-sequence impedance matrices of a grid.

    Independent of bus loads (constant-power loads do not enter the fault
    network), so one instance can be shared across every trace synthesized
    from load-perturbed copies of the same grid.
    """
    z1: np.ndarray  # [N, N] complex
    z0: np.ndarray  # [N, N] complex


def build_fault_networks(grid: GridState) -> FaultNetworks:
    n = grid.n_buses
    y1 = build_ybus(grid).entries.copy()

    y0 = np.zeros((n, n), dtype=complex)
    for br in grid.branches:
        if not br.in_service:
            continue
        i = grid.bus_index(br.from_bus)
        j = grid.bus_index(br.to_bus)
        ys = 1.0 / complex(br.r, ZERO_SEQ_X_FACTOR * br.x)
        ysh = 0.5j * br.b_shunt
        y0[i, i] += ys + ysh
        y0[j, j] += ys + ysh
        y0[i, j] -= ys
        y0[j, i] -= ys

    for g in grid.generators:
        if not g.on:
            continue
        i = grid.bus_index(g.bus_id)
        y1[i, i] += 1.0 / complex(0.0, GEN_SUBTRANSIENT_X)
        y0[i, i] += 1.0 / complex(0.0, GEN_ZERO_X)

    try:
        z1 = np.linalg.inv(y1)
        z0 = np.linalg.inv(y0)
    except np.linalg.LinAlgError as exc:
        raise SingularNetwork(f"sequence network is singular: {exc}") from exc
    return FaultNetworks(z1=z1, z0=z0)


def thevenin_sequence_impedances(grid: GridState, bus_id: int,
                                 networks: FaultNetworks | None = None) -> SequenceImpedances:
    """Thevenin sequence impedances seen from a bus of the fault network."""
    if networks is None:
        networks = build_fault_networks(grid)
    k = grid.bus_index(bus_id)
    z1 = complex(networks.z1[k, k])
    z0 = complex(networks.z0[k, k])
    return SequenceImpedances(z1=z1, z2=z1, z0=z0)


# ---------------------------------------------------------------------------
# During-fault voltages
# ---------------------------------------------------------------------------

def _mean_phase_magnitudes(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    """Average of the three phase-voltage magnitudes per bus.

    The mean keeps every fault kind visible in a magnitude-only trace: a
    line-to-line fault leaves the unfaulted phase untouched, so the maximum
    phase magnitude would hide it entirely.
    """
    va = v0 + v1 + v2
    vb = v0 + _A * _A * v1 + _A * v2
    vc = v0 + _A * v1 + _A * _A * v2
    return (np.abs(va) + np.abs(vb) + np.abs(vc)) / 3.0


def fault_voltages(grid: GridState, spec: FaultSpec,
                   pre: PowerFlowSolution | None = None,
                   networks: FaultNetworks | None = None) -> np.ndarray:
    """Per-bus during-fault voltage magnitudes for a fault specification.

    Bus faults superpose the sequence-network response on the pre-fault
    voltages; the dip at remote buses propagates through the transfer
    impedances. A branch trip re-solves the power flow with the branch out.
    """
    if pre is None:
        pre = solve_powerflow(grid)

    if spec.kind == "BranchTrip":
        branch = grid.branches[spec.branch_index]
        if not branch.in_service:
            return pre.v_mag.copy()
        tripped = with_branch_status(grid, spec.branch_index, False)
        from .grid import with_voltages
        warm = with_voltages(tripped, pre.v_mag, pre.v_ang)
        post = solve_powerflow(warm, warm_start=True)
        return post.v_mag.copy()

    if networks is None:
        networks = build_fault_networks(grid)
    k = grid.bus_index(spec.bus_id)
    v_pre = pre.complex_voltages()
    zf = complex(spec.z_fault)
    z1_col = networks.z1[:, k]
    z0_col = networks.z0[:, k]
    z1_kk = networks.z1[k, k]
    z0_kk = networks.z0[k, k]

    if spec.kind == "ThreePhase":
        i1 = v_pre[k] / (z1_kk + zf)
        v1 = v_pre - z1_col * i1
        mags = np.abs(v1)
        if spec.z_fault == 0.0:
            mags[k] = 0.0  # bolted fault boundary condition, exact
        return mags

    if spec.kind == "LineGround":
        i_seq = v_pre[k] / (2.0 * z1_kk + z0_kk + 3.0 * zf)
        v1 = v_pre - z1_col * i_seq
        v2 = -z1_col * i_seq
        v0 = -z0_col * i_seq
        return _mean_phase_magnitudes(v0, v1, v2)

    # LineLine
    i1 = v_pre[k] / (2.0 * z1_kk + zf)
    v1 = v_pre - z1_col * i1
    v2 = z1_col * i1
    v0 = np.zeros_like(v1)
    return _mean_phase_magnitudes(v0, v1, v2)


def fault_current(grid: GridState, spec: FaultSpec,
                  pre: PowerFlowSolution | None = None,
                  networks: FaultNetworks | None = None) -> complex:
    """Total fault current injected at the faulted bus (bus faults only)."""
    if spec.kind == "BranchTrip":
        raise ValidationError("a branch trip has no fault current")
    if pre is None:
        pre = solve_powerflow(grid)
    seq = thevenin_sequence_impedances(grid, spec.bus_id, networks)
    v_pre = pre.complex_voltages()[grid.bus_index(spec.bus_id)]
    zf = complex(spec.z_fault)
    if spec.kind == "ThreePhase":
        return v_pre / (seq.z1 + zf)
    if spec.kind == "LineGround":
        # phase-a current = 3 I0
        return 3.0 * v_pre / (seq.z1 + seq.z2 + seq.z0 + 3.0 * zf)
    # LineLine: faulted-phase current magnitude |Ib| = sqrt(3) |I1|
    i1 = v_pre / (seq.z1 + seq.z2 + zf)
    return (_A * _A - _A) * i1


# ---------------------------------------------------------------------------
# Trace synthesis
# ---------------------------------------------------------------------------

def _as_generator(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


def _perturb_loads(grid: GridState, rng: np.random.Generator) -> GridState:
    factors = 1.0 + rng.uniform(-LOAD_PERTURBATION, LOAD_PERTURBATION, size=grid.n_buses)
    p = np.array([b.p_load for b in grid.buses]) * factors
    q = np.array([b.q_load for b in grid.buses]) * factors
    return with_loads(grid, p, q)


def synthesize_trace(grid: GridState, spec: FaultSpec | None, rng_seed,
                     n_steps: int = TRACE_STEPS, dt: float = SAMPLE_DT,
                     networks: FaultNetworks | None = None) -> VoltageTrace:
    """One labeled voltage trace: perturbed loads, pre-fault flow, fault event.

    Pass spec=None for a healthy (NoFault) trace. Deterministic given the
    seed; the RNG draws, in order: load perturbation, then measurement noise.
    """
    rng = _as_generator(rng_seed)
    perturbed = _perturb_loads(grid, rng)
    pre = solve_powerflow(perturbed)
    v_pre = pre.v_mag

    n = grid.n_buses
    noise = rng.normal(0.0, NOISE_SIGMA, size=(n_steps, n))

    if spec is None:
        samples = v_pre[None, :] + noise
        label_kind, label_bus = NO_FAULT, 0
    else:
        v_fault = fault_voltages(perturbed, spec, pre=pre, networks=networks)
        onset = spec.onset_step
        samples = np.empty((n_steps, n))
        samples[:onset] = v_pre[None, :]
        # Voltage steps to the during-fault value at the onset sample, then a
        # damped swing rings around it; the sine phase makes the step land
        # exactly on v_fault at onset.
        t_rel = (np.arange(onset, n_steps) - onset) * dt
        envelope = np.exp(-t_rel / SWING_TAU) * np.sin(2.0 * np.pi * SWING_FREQ * t_rel)
        samples[onset:] = v_fault[None, :] + np.outer(envelope, v_pre - v_fault)
        samples += noise
        label_kind = spec.kind
        if spec.kind == "BranchTrip":
            br = grid.branches[spec.branch_index]
            label_bus = min(br.from_bus, br.to_bus)
        else:
            label_bus = spec.bus_id

    np.clip(samples, 0.0, 2.0, out=samples)
    return VoltageTrace(samples=samples, dt=dt, label_kind=label_kind, label_bus=label_bus)


def branch_trip_cases(grid: GridState) -> list[int]:
    """One designated branch index per bus for the BranchTrip enumeration.

    For each bus, the lowest-indexed in-service branch whose lower-numbered
    endpoint is that bus; buses that are never a lower endpoint (the highest
    bus id) fall back to their lowest-indexed incident branch. This maps the
    branch-trip fault family onto exactly N labeled cases.
    """
    cases = []
    for bus in range(1, grid.n_buses + 1):
        chosen = None
        for idx, br in enumerate(grid.branches):
            if br.in_service and min(br.from_bus, br.to_bus) == bus:
                chosen = idx
                break
        if chosen is None:
            for idx, br in enumerate(grid.branches):
                if br.in_service and bus in (br.from_bus, br.to_bus):
                    chosen = idx
                    break
        if chosen is None:
            raise SingularNetwork(f"bus {bus} has no in-service branch")
        cases.append(chosen)
    return cases


def enumerate_cases(grid: GridState) -> list[FaultSpec | None]:
    """Deterministic case list: 4 kinds x N buses, plus N x 4 NoFault slots.

    Fault specs carry a placeholder onset; the per-run onset is drawn from
    the run's own RNG stream inside gen_fault_dataset.
    """
    cases: list[FaultSpec | None] = []
    n = grid.n_buses
    for bus in range(1, n + 1):
        cases.append(FaultSpec(kind="ThreePhase", bus_id=bus))
    for branch_idx in branch_trip_cases(grid):
        cases.append(FaultSpec(kind="BranchTrip", branch_index=branch_idx))
    for bus in range(1, n + 1):
        cases.append(FaultSpec(kind="LineLine", bus_id=bus))
    for bus in range(1, n + 1):
        cases.append(FaultSpec(kind="LineGround", bus_id=bus))
    cases.extend([None] * (4 * n))
    return cases


def gen_fault_dataset(grid: GridState, runs_per_case: int = 100, seed: int = 0,
                      n_steps: int = TRACE_STEPS, dt: float = SAMPLE_DT) -> FaultDataset:
    """Full labeled dataset: every case x runs_per_case traces, case-major order.

    Each (case, run) derives an independent RNG stream from
    (seed, case index, run index), so generation is deterministic and could
    be parallelized per case without changing the output order.
    """
    if runs_per_case < 1:
        raise ValueError("runs_per_case must be >= 1")
    networks = build_fault_networks(grid)
    cases = enumerate_cases(grid)

    total = len(cases) * runs_per_case
    store = np.empty((total, n_steps, grid.n_buses))
    traces = []
    row = 0
    for case_idx, case in enumerate(cases):
        for run_idx in range(runs_per_case):
            rng = np.random.default_rng(
                np.random.SeedSequence((seed, case_idx, run_idx)))
            if case is None:
                spec = None
            else:
                onset = int(rng.integers(ONSET_MIN, ONSET_MAX + 1))
                spec = FaultSpec(kind=case.kind, bus_id=case.bus_id,
                                 branch_index=case.branch_index,
                                 z_fault=case.z_fault, onset_step=onset)
            try:
                trace = synthesize_trace(grid, spec, rng, n_steps=n_steps,
                                         dt=dt, networks=networks)
            except Exception as exc:
                raise type(exc)(
                    f"case {case_idx} run {run_idx} ({case.kind if case else NO_FAULT}): {exc}"
                ) from exc
            store[row] = trace.samples
            traces.append(VoltageTrace(samples=store[row], dt=dt,
                                       label_kind=trace.label_kind,
                                       label_bus=trace.label_bus))
            row += 1
    return FaultDataset(traces=traces, seed=seed, grid_hash=grid_checksum(grid))


# ---------------------------------------------------------------------------
# Dataset file I/O
# ---------------------------------------------------------------------------

def save_fault_dataset(dataset: FaultDataset, csv_path) -> None:
    """CSV with one trace per row plus a JSON sidecar describing the run.

    Columns: label_kind, label_bus, then T*N voltages in time-major order
    (v_t{t}_b{b}); floats use shortest round-trip formatting.
    """
    t_steps, n = dataset.n_steps, dataset.n_buses
    header = ["label_kind", "label_bus"]
    header += [f"v_t{t}_b{b}" for t in range(t_steps) for b in range(1, n + 1)]
    try:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for trace in dataset.traces:
                row = [trace.label_kind, trace.label_bus]
                row += [repr(x) for x in trace.samples.ravel().tolist()]
                writer.writerow(row)
        sidecar = {
            "seed": dataset.seed, "grid_hash": dataset.grid_hash,
            "T": t_steps, "N": n, "dt": dataset.dt,
        }
        with open(str(csv_path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write dataset {csv_path}: {exc}") from exc


def load_fault_dataset(csv_path) -> FaultDataset:
    """Read a dataset CSV written by save_fault_dataset (sidecar required)."""
    try:
        with open(str(csv_path) + ".json", "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    except OSError as exc:
        raise IoError(f"missing dataset sidecar for {csv_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed dataset sidecar: {exc}") from exc
    t_steps, n = int(sidecar["T"]), int(sidecar["N"])

    traces = []
    rows = []
    try:
        with open(csv_path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:2] != ["label_kind", "label_bus"]:
                raise ParseError(f"unexpected dataset header in {csv_path}")
            for line in reader:
                rows.append(line)
    except OSError as exc:
        raise IoError(f"cannot read dataset {csv_path}: {exc}") from exc

    store = np.empty((len(rows), t_steps, n))
    for i, line in enumerate(rows):
        if len(line) != 2 + t_steps * n:
            raise ParseError(f"dataset row {i} has {len(line)} fields")
        store[i] = np.array([float(x) for x in line[2:]]).reshape(t_steps, n)
        traces.append(VoltageTrace(samples=store[i], dt=float(sidecar["dt"]),
                                   label_kind=line[0], label_bus=int(line[1])))
    return FaultDataset(traces=traces, seed=int(sidecar["seed"]),
                        grid_hash=str(sidecar["grid_hash"]), dt=float(sidecar["dt"]))
