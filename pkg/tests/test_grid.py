"""Grid data model: invariants, bundled 23-bus grid, JSON round-trips."""

import json
from dataclasses import replace

import numpy as np
import pytest

from gridseer.errors import ParseError, ValidationError
from gridseer.grid import (
    Branch, Bus, Generator, GridState, build_default_grid, grid_checksum,
    load_grid, save_grid, validate_grid, with_branch_status, with_loads,
)


def test_default_grid_has_23_buses(default_grid):
    assert default_grid.n_buses == 23


def test_default_grid_shape(default_grid):
    assert len(default_grid.branches) == 30
    assert len(default_grid.generators) == 8
    kinds = [g.kind for g in default_grid.generators]
    assert kinds.count("Solar") == 5
    assert kinds.count("Conventional") == 3


def test_exactly_one_slack(default_grid):
    assert sum(1 for b in default_grid.buses if b.kind == "Slack") == 1
    assert default_grid.buses[0].kind == "Slack"


def test_load_to_rated_generation_ratio(default_grid):
    load = sum(b.p_load for b in default_grid.buses)
    rated = sum(g.p_rated for g in default_grid.generators)
    assert load / rated == pytest.approx(0.9, abs=0.02)


def test_every_bus_degree_at_least_two(default_grid):
    degree = {b.id: 0 for b in default_grid.buses}
    for br in default_grid.branches:
        degree[br.from_bus] += 1
        degree[br.to_bus] += 1
    assert min(degree.values()) >= 2


def test_build_default_grid_is_pure():
    assert build_default_grid() == build_default_grid()


def test_default_grid_power_flow_converges(default_grid):
    # the powerflow solver is the oracle used while designing the grid
    from gridseer.powerflow import solve_powerflow
    sol = solve_powerflow(default_grid)
    assert sol.max_mismatch < 1e-8


def test_save_load_round_trip(default_grid, tmp_path):
    path = tmp_path / "grid.json"
    save_grid(default_grid, path)
    assert load_grid(path) == default_grid


def test_save_is_byte_deterministic(default_grid, tmp_path):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_grid(default_grid, p1)
    save_grid(default_grid, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_saved_json_uses_schema_keys(default_grid, tmp_path):
    path = tmp_path / "grid.json"
    save_grid(default_grid, path)
    obj = json.loads(path.read_text())
    assert set(obj) == {"base_mva", "buses", "branches", "generators"}
    assert set(obj["buses"][0]) == {"id", "kind", "v_mag", "v_ang", "p_load",
                                    "q_load", "base_kv"}
    assert set(obj["branches"][0]) == {"from", "to", "r", "x", "b_shunt",
                                       "mva_limit", "in_service"}
    assert set(obj["generators"][0]) == {"bus", "kind", "p_rated", "p_set",
                                         "q_min", "q_max", "cost_per_pu", "on"}


def test_out_of_service_flag_preserved(default_grid, tmp_path):
    grid = with_branch_status(default_grid, 4, False)
    path = tmp_path / "grid.json"
    save_grid(grid, path)
    assert load_grid(path).branches[4].in_service is False


def test_two_slack_buses_rejected(default_grid, tmp_path):
    buses = list(default_grid.buses)
    buses[5] = replace(buses[5], kind="Slack")
    bad = replace(default_grid, buses=tuple(buses))
    path = tmp_path / "bad.json"
    save_grid(bad, path)
    with pytest.raises(ValidationError, match="Slack"):
        load_grid(path)


def test_dangling_branch_endpoint_rejected(default_grid, tmp_path):
    branches = list(default_grid.branches)
    branches[0] = replace(branches[0], from_bus=99)
    bad = replace(default_grid, branches=tuple(branches))
    path = tmp_path / "bad.json"
    save_grid(bad, path)
    with pytest.raises(ValidationError, match="missing bus"):
        load_grid(path)


def test_malformed_json_raises_parse_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json at all")
    with pytest.raises(ParseError):
        load_grid(path)


def test_missing_field_raises_parse_error(default_grid, tmp_path):
    path = tmp_path / "grid.json"
    save_grid(default_grid, path)
    obj = json.loads(path.read_text())
    del obj["buses"][0]["v_mag"]
    path.write_text(json.dumps(obj))
    with pytest.raises(ParseError, match="v_mag"):
        load_grid(path)


def test_randomized_corruptions_are_rejected(default_grid, tmp_path):
    """Any single-field corruption that breaks an invariant must be rejected."""
    rng = np.random.default_rng(11)
    corruptions = [
        lambda o: o["buses"][3].update(v_mag=0.0),
        lambda o: o["buses"][3].update(v_mag=float("nan")),
        lambda o: o["branches"][2].update(x=0.0),
        lambda o: o["branches"][2].update(r=-0.5),
        lambda o: o["branches"][2].update(mva_limit=0.0),
        lambda o: o["branches"][2].update(to=o["branches"][2]["from"]),
        lambda o: o["generators"][1].update(p_set=99.0),
        lambda o: o["generators"][1].update(q_min=2.0, q_max=-2.0),
        lambda o: o["buses"][3].update(id=1),
        lambda o: o["generators"][0].update(bus=77),
    ]
    path = tmp_path / "grid.json"
    for trial in range(30):
        save_grid(default_grid, path)
        obj = json.loads(path.read_text())
        corruptions[int(rng.integers(len(corruptions)))](obj)
        path.write_text(json.dumps(obj))
        with pytest.raises(ValidationError):
            load_grid(path)


def test_checksum_changes_with_content(default_grid):
    other = with_loads(default_grid,
                       [b.p_load * 1.01 for b in default_grid.buses],
                       [b.q_load for b in default_grid.buses])
    assert grid_checksum(default_grid) != grid_checksum(other)
    assert grid_checksum(default_grid) == grid_checksum(build_default_grid())


def test_slack_must_host_conventional_generator(default_grid, tmp_path):
    gens = tuple(g for g in default_grid.generators if g.bus_id != 1)
    bad = replace(default_grid, generators=gens)
    with pytest.raises(ValidationError, match="slack"):
        validate_grid(bad)
