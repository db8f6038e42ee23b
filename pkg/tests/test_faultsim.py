"""Fault analysis and trace synthesis: sequence math, fault voltages, datasets."""

import numpy as np
import pytest

from gridseer.errors import ValidationError
from gridseer.faultsim import (
    FAULT_KINDS, NO_FAULT, FaultSpec, VoltageTrace, branch_trip_cases,
    build_fault_networks, enumerate_cases, fault_current, fault_voltages,
    gen_fault_dataset, inverse_symmetrical_components, load_fault_dataset,
    save_fault_dataset, symmetrical_components, synthesize_trace,
    thevenin_sequence_impedances,
)
from gridseer.grid import Branch, Bus, Generator, GridState, with_branch_status
from gridseer.powerflow import solve_powerflow


# ---------------------------------------------------------------------------
# Fortescue transform
# ---------------------------------------------------------------------------

def test_balanced_set_is_pure_positive_sequence():
    a = np.exp(2j * np.pi / 3)
    phasors = (1.0 + 0j, a ** 2, a)  # 1<0, 1<-120, 1<+120
    zero, positive, negative = symmetrical_components(phasors)
    assert abs(zero) < 1e-12
    assert positive == pytest.approx(1.0 + 0j, abs=1e-12)
    assert abs(negative) < 1e-12


def test_equal_phasors_are_pure_zero_sequence():
    zero, positive, negative = symmetrical_components((1.0, 1.0, 1.0))
    assert zero == pytest.approx(1.0 + 0j, abs=1e-12)
    assert abs(positive) < 1e-12
    assert abs(negative) < 1e-12


def test_fortescue_round_trip_random_phasors():
    rng = np.random.default_rng(2)
    for _ in range(50):
        phasors = rng.normal(size=3) + 1j * rng.normal(size=3)
        rebuilt = inverse_symmetrical_components(symmetrical_components(phasors))
        assert np.allclose(rebuilt, phasors, atol=1e-12)


# ---------------------------------------------------------------------------
# Thevenin sequence impedances
# ---------------------------------------------------------------------------

def single_machine_grid():
    """One generator behind its subtransient reactance, nothing else."""
    return GridState(
        base_mva=100.0,
        buses=(Bus(id=1, kind="Slack"), Bus(id=2, kind="PQ")),
        branches=(Branch(from_bus=1, to_bus=2, r=0.0, x=0.4, mva_limit=2.0),),
        generators=(Generator(bus_id=1, kind="Conventional", p_rated=1.0, p_set=0.0),),
    )


def test_thevenin_at_generator_bus_is_machine_reactance():
    grid = single_machine_grid()
    seq = thevenin_sequence_impedances(grid, 1)
    assert seq.z1 == pytest.approx(0.2j, abs=1e-9)
    assert seq.z2 == seq.z1


def test_thevenin_series_parallel_reduction_oracle():
    """Two parallel paths of j0.4 from the source bus: hand reduction gives
    z at the far bus = x_gen + (0.4 || 0.4) = j0.2 + j0.2 = j0.4."""
    grid = GridState(
        base_mva=100.0,
        buses=(Bus(id=1, kind="Slack"), Bus(id=2, kind="PQ")),
        branches=(
            Branch(from_bus=1, to_bus=2, r=0.0, x=0.4, mva_limit=2.0),
            Branch(from_bus=1, to_bus=2, r=0.0, x=0.4, mva_limit=2.0),
        ),
        generators=(Generator(bus_id=1, kind="Conventional", p_rated=1.0, p_set=0.0),),
    )
    seq = thevenin_sequence_impedances(grid, 2)
    assert seq.z1 == pytest.approx(0.4j, abs=1e-9)


def test_thevenin_inductive_everywhere(default_grid):
    networks = build_fault_networks(default_grid)
    for bus in range(1, default_grid.n_buses + 1):
        seq = thevenin_sequence_impedances(default_grid, bus, networks)
        assert seq.z1.imag > 0
        assert seq.z0.imag > 0


# ---------------------------------------------------------------------------
# Fault voltages
# ---------------------------------------------------------------------------

def test_bolted_three_phase_fault_is_exactly_zero(default_grid):
    spec = FaultSpec(kind="ThreePhase", bus_id=7, z_fault=0.0)
    v = fault_voltages(default_grid, spec)
    assert v[default_grid.bus_index(7)] == 0.0


def test_three_phase_monotone_dip(default_grid):
    """The faulted bus dips at least as deep as every other bus."""
    networks = build_fault_networks(default_grid)
    pre = solve_powerflow(default_grid)
    for bus in range(1, default_grid.n_buses + 1):
        spec = FaultSpec(kind="ThreePhase", bus_id=bus, z_fault=0.0)
        v = fault_voltages(default_grid, spec, pre=pre, networks=networks)
        assert v[default_grid.bus_index(bus)] <= v.min() + 1e-12


def test_line_ground_current_closed_form_three_bus():
    """|I_f| = 3 E / |Z1+Z2+Z0+3Zf| on a small network, with the sequence
    impedances taken from the network builder and the current recomputed
    from the closed form independently."""
    grid = GridState(
        base_mva=100.0,
        buses=(Bus(id=1, kind="Slack"), Bus(id=2, kind="PQ"), Bus(id=3, kind="PQ")),
        branches=(
            Branch(from_bus=1, to_bus=2, r=0.0, x=0.10, mva_limit=5.0),
            Branch(from_bus=2, to_bus=3, r=0.0, x=0.15, mva_limit=5.0),
            Branch(from_bus=1, to_bus=3, r=0.0, x=0.30, mva_limit=5.0),
        ),
        generators=(Generator(bus_id=1, kind="Conventional", p_rated=1.0, p_set=0.0),),
    )
    zf = 0.05
    seq = thevenin_sequence_impedances(grid, 3)
    pre = solve_powerflow(grid)
    e = pre.complex_voltages()[2]
    expected = 3.0 * e / (seq.z1 + seq.z2 + seq.z0 + 3.0 * zf)

    spec = FaultSpec(kind="LineGround", bus_id=3, z_fault=zf)
    assert fault_current(grid, spec) == pytest.approx(expected, abs=1e-9)


def test_line_ground_bolted_current_magnitude_hand_formula():
    """Flat 1.0 pu source: |I_f| = 3/|2 z1 + z0| for a bolted fault."""
    grid = single_machine_grid()
    seq = thevenin_sequence_impedances(grid, 2)
    spec = FaultSpec(kind="LineGround", bus_id=2, z_fault=0.0)
    i_f = fault_current(grid, spec)
    e = solve_powerflow(grid).complex_voltages()[1]
    assert abs(i_f) == pytest.approx(abs(3.0 * e / (2 * seq.z1 + seq.z0)), abs=1e-9)


def test_line_line_dips_but_less_than_three_phase(default_grid):
    networks = build_fault_networks(default_grid)
    pre = solve_powerflow(default_grid)
    k = default_grid.bus_index(9)
    v3 = fault_voltages(default_grid, FaultSpec(kind="ThreePhase", bus_id=9),
                        pre=pre, networks=networks)
    vll = fault_voltages(default_grid, FaultSpec(kind="LineLine", bus_id=9),
                         pre=pre, networks=networks)
    assert v3[k] < vll[k] < pre.v_mag[k]


def test_branch_trip_of_out_of_service_branch_is_noop(default_grid):
    grid = with_branch_status(default_grid, 25, False)
    pre = solve_powerflow(grid)
    spec = FaultSpec(kind="BranchTrip", branch_index=25)
    v = fault_voltages(grid, spec, pre=pre)
    assert np.array_equal(v, pre.v_mag)


def test_fault_spec_validation():
    with pytest.raises(ValidationError):
        FaultSpec(kind="ThreePhase", branch_index=3)  # needs bus_id
    with pytest.raises(ValidationError):
        FaultSpec(kind="BranchTrip", bus_id=3)  # needs branch_index
    with pytest.raises(ValidationError):
        FaultSpec(kind="ThreePhase", bus_id=3, z_fault=-1.0)
    with pytest.raises(ValidationError):
        FaultSpec(kind="ThreePhase", bus_id=3, onset_step=5)  # before window


# ---------------------------------------------------------------------------
# Trace synthesis
# ---------------------------------------------------------------------------

def test_nofault_trace_close_to_prefault(default_grid):
    trace = synthesize_trace(default_grid, None, 123)
    assert trace.label_kind == NO_FAULT
    assert trace.label_bus == 0
    assert trace.samples.shape == (100, 23)
    assert np.all(np.abs(trace.samples - 1.0) < 0.1)


def test_same_seed_same_trace(default_grid):
    spec = FaultSpec(kind="LineLine", bus_id=4, onset_step=30)
    a = synthesize_trace(default_grid, spec, 99)
    b = synthesize_trace(default_grid, spec, 99)
    assert np.array_equal(a.samples, b.samples)


def test_three_phase_trace_dips_at_onset(default_grid):
    """The faulted bus collapses exactly at the onset sample: the sample
    before stays at the pre-fault level, the onset sample is at the fault
    level within the 3-sigma noise band."""
    spec = FaultSpec(kind="ThreePhase", bus_id=5, z_fault=0.0, onset_step=20)
    networks = build_fault_networks(default_grid)
    trace = synthesize_trace(default_grid, spec, 7, networks=networks)
    col = default_grid.bus_index(5)
    assert trace.samples[19, col] > 0.9
    assert trace.samples[20, col] < 0.05  # 0 + noise, far under 3 sigma of 0.002
    assert trace.label_kind == "ThreePhase"
    assert trace.label_bus == 5


def test_trace_values_bounded(default_grid):
    networks = build_fault_networks(default_grid)
    for seed, kind, bus in [(1, "ThreePhase", 3), (2, "LineGround", 12),
                            (3, "LineLine", 20)]:
        spec = FaultSpec(kind=kind, bus_id=bus, onset_step=15)
        trace = synthesize_trace(default_grid, spec, seed, networks=networks)
        assert trace.samples.min() >= 0.0
        assert trace.samples.max() <= 2.0
        assert np.all(np.isfinite(trace.samples))


def test_trace_label_consistency_enforced():
    with pytest.raises(ValidationError):
        VoltageTrace(samples=np.ones((10, 3)), dt=0.04, label_kind=NO_FAULT,
                     label_bus=5)
    with pytest.raises(ValidationError):
        VoltageTrace(samples=np.full((10, 3), 3.0), dt=0.04,
                     label_kind="ThreePhase", label_bus=1)


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------

def test_dataset_counts(tiny_fault_dataset, default_grid):
    """4 kinds x 23 cases x runs, plus an equal number of NoFault traces."""
    runs = 2
    n = default_grid.n_buses
    expected_faulted = 4 * n * runs
    total = 2 * expected_faulted
    assert len(tiny_fault_dataset.traces) == total
    by_kind = {}
    for t in tiny_fault_dataset.traces:
        by_kind[t.label_kind] = by_kind.get(t.label_kind, 0) + 1
    assert by_kind[NO_FAULT] == expected_faulted
    for kind in FAULT_KINDS:
        assert by_kind[kind] == n * runs


def test_dataset_full_scale_count_arithmetic(default_grid):
    """runs_per_case=100 yields 4*23*100 faulted + 9200 healthy = 18400."""
    cases = enumerate_cases(default_grid)
    runs = 100
    faulted = sum(1 for c in cases if c is not None) * runs
    healthy = sum(1 for c in cases if c is None) * runs
    assert faulted == 4 * 23 * 100 == 9200
    assert healthy == 9200
    assert faulted + healthy == 18400


def test_dataset_all_kinds_present(tiny_fault_dataset):
    kinds = {t.label_kind for t in tiny_fault_dataset.traces}
    assert kinds == set(FAULT_KINDS) | {NO_FAULT}


def test_class_balance_per_bus(tiny_fault_dataset):
    """Bus-fault kinds have identical trace counts for every (kind, bus)."""
    counts = {}
    for t in tiny_fault_dataset.traces:
        if t.label_kind in ("ThreePhase", "LineLine", "LineGround"):
            counts[(t.label_kind, t.label_bus)] = counts.get(
                (t.label_kind, t.label_bus), 0) + 1
    assert set(counts.values()) == {2}
    assert len(counts) == 3 * 23


def test_branch_trip_cases_one_per_bus(default_grid):
    cases = branch_trip_cases(default_grid)
    assert len(cases) == default_grid.n_buses
    # each designated branch is incident to its bus
    for bus, branch_idx in enumerate(cases, start=1):
        br = default_grid.branches[branch_idx]
        assert bus in (br.from_bus, br.to_bus)


def test_branch_trip_label_is_lower_endpoint(tiny_fault_dataset, default_grid):
    for t in tiny_fault_dataset.traces:
        if t.label_kind == "BranchTrip":
            assert 1 <= t.label_bus <= default_grid.n_buses


def test_dataset_deterministic(default_grid):
    a = gen_fault_dataset(default_grid, runs_per_case=1, seed=5)
    b = gen_fault_dataset(default_grid, runs_per_case=1, seed=5)
    for ta, tb in zip(a.traces, b.traces):
        assert np.array_equal(ta.samples, tb.samples)
        assert ta.label_kind == tb.label_kind and ta.label_bus == tb.label_bus


def test_dataset_csv_round_trip(tmp_path, default_grid):
    ds = gen_fault_dataset(default_grid, runs_per_case=1, seed=3)
    path = tmp_path / "faults.csv"
    save_fault_dataset(ds, path)
    loaded = load_fault_dataset(path)
    assert loaded.seed == ds.seed
    assert loaded.grid_hash == ds.grid_hash
    assert len(loaded.traces) == len(ds.traces)
    for ta, tb in zip(ds.traces, loaded.traces):
        assert np.array_equal(ta.samples, tb.samples)
        assert ta.label_kind == tb.label_kind and ta.label_bus == tb.label_bus


def test_dataset_file_byte_deterministic(tmp_path, default_grid):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    save_fault_dataset(gen_fault_dataset(default_grid, 1, seed=4), p1)
    save_fault_dataset(gen_fault_dataset(default_grid, 1, seed=4), p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert (tmp_path / "a.csv.json").read_bytes() == (tmp_path / "b.csv.json").read_bytes()
