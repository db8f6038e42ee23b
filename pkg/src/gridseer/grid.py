"""Electrical network data model, the bundled 23-bus grid, and grid file I/O.

All quantities are in per-unit on the system MVA base. A GridState is an
immutable value: mutation happens only by constructing a modified copy, so
instances are safe to share across concurrent workers.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace

from .errors import IoError, ParseError, ValidationError

BUS_KINDS = ("Slack", "PV", "PQ")
GEN_KINDS = ("Solar", "Conventional")


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str  # "Slack" | "PV" | "PQ"
    v_mag: float = 1.0  # setpoint for Slack/PV, initial guess for PQ
    v_ang: float = 0.0  # radians
    p_load: float = 0.0
    q_load: float = 0.0
    base_kv: float = 138.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_shunt: float = 0.0  # total line charging susceptance
    mva_limit: float = 1.0
    in_service: bool = True


@dataclass(frozen=True)
class Generator:
    bus_id: int
    kind: str  # "Solar" | "Conventional"
    p_rated: float
    p_set: float
    q_min: float = -0.5
    q_max: float = 0.5
    cost_per_pu: float = 0.0
    on: bool = True


@dataclass(frozen=True)
class GridState:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    def bus_index(self, bus_id: int) -> int:
        # ids are validated to be contiguous 1..N
        return bus_id - 1

    def solar_generators(self) -> tuple[Generator, ...]:
        return tuple(g for g in self.generators if g.kind == "Solar")

    def slack_index(self) -> int:
        return next(i for i, b in enumerate(self.buses) if b.kind == "Slack")


def _is_finite_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def validate_grid(grid: GridState) -> None:
    """Check every GridState invariant; raise ValidationError naming the first violation."""
    n = len(grid.buses)
    if n == 0:
        raise ValidationError("grid has no buses")
    if not _is_finite_number(grid.base_mva) or grid.base_mva <= 0:
        raise ValidationError("base_mva must be a positive finite number")

    ids = [b.id for b in grid.buses]
    if sorted(ids) != list(range(1, n + 1)):
        raise ValidationError("bus ids must be unique and contiguous 1..N")
    slack_count = sum(1 for b in grid.buses if b.kind == "Slack")
    if slack_count != 1:
        raise ValidationError(f"grid must have exactly one Slack bus, found {slack_count}")
    for b in grid.buses:
        if b.kind not in BUS_KINDS:
            raise ValidationError(f"bus {b.id}: unknown kind {b.kind!r}")
        for name in ("v_mag", "v_ang", "p_load", "q_load", "base_kv"):
            if not _is_finite_number(getattr(b, name)):
                raise ValidationError(f"bus {b.id}: field {name} must be a finite number")
        if b.v_mag <= 0:
            raise ValidationError(f"bus {b.id}: v_mag must be > 0")

    id_set = set(ids)
    for i, br in enumerate(grid.branches):
        if br.from_bus == br.to_bus:
            raise ValidationError(f"branch {i}: from_bus equals to_bus ({br.from_bus})")
        if br.from_bus not in id_set or br.to_bus not in id_set:
            raise ValidationError(f"branch {i}: endpoint references a missing bus")
        for name in ("r", "x", "b_shunt", "mva_limit"):
            if not _is_finite_number(getattr(br, name)):
                raise ValidationError(f"branch {i}: field {name} must be a finite number")
        if br.x == 0:
            raise ValidationError(f"branch {i}: zero-impedance branches are not allowed (x == 0)")
        if br.r < 0:
            raise ValidationError(f"branch {i}: r must be >= 0")
        if br.mva_limit <= 0:
            raise ValidationError(f"branch {i}: mva_limit must be > 0")

    slack_id = next(b.id for b in grid.buses if b.kind == "Slack")
    for i, g in enumerate(grid.generators):
        if g.bus_id not in id_set:
            raise ValidationError(f"generator {i}: bus {g.bus_id} does not exist")
        if g.kind not in GEN_KINDS:
            raise ValidationError(f"generator {i}: unknown kind {g.kind!r}")
        for name in ("p_rated", "p_set", "q_min", "q_max", "cost_per_pu"):
            if not _is_finite_number(getattr(g, name)):
                raise ValidationError(f"generator {i}: field {name} must be a finite number")
        if not (0 <= g.p_set <= g.p_rated):
            raise ValidationError(f"generator {i}: p_set must satisfy 0 <= p_set <= p_rated")
        if g.q_min > g.q_max:
            raise ValidationError(f"generator {i}: q_min must be <= q_max")
    if not any(g.kind == "Conventional" and g.bus_id == slack_id for g in grid.generators):
        raise ValidationError("the slack bus must host at least one Conventional generator")


# ---------------------------------------------------------------------------
# Modified-copy helpers (GridState is immutable)
# ---------------------------------------------------------------------------

def with_loads(grid: GridState, p_loads, q_loads) -> GridState:
    """Copy of the grid with per-bus loads replaced (arrays indexed by bus order)."""
    buses = tuple(
        replace(b, p_load=float(p_loads[i]), q_load=float(q_loads[i]))
        for i, b in enumerate(grid.buses)
    )
    return replace(grid, buses=buses)


def with_branch_status(grid: GridState, branch_index: int, in_service: bool) -> GridState:
    branches = list(grid.branches)
    branches[branch_index] = replace(branches[branch_index], in_service=in_service)
    return replace(grid, branches=tuple(branches))


def with_voltages(grid: GridState, v_mag, v_ang) -> GridState:
    """Copy carrying a solved voltage profile, usable as a warm start."""
    buses = tuple(
        replace(b, v_mag=float(v_mag[i]), v_ang=float(v_ang[i]))
        for i, b in enumerate(grid.buses)
    )
    return replace(grid, buses=buses)


def with_generators(grid: GridState, generators) -> GridState:
    return replace(grid, generators=tuple(generators))


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def _grid_to_dict(grid: GridState) -> dict:
    return {
        "base_mva": grid.base_mva,
        "buses": [
            {
                "id": b.id, "kind": b.kind, "v_mag": b.v_mag, "v_ang": b.v_ang,
                "p_load": b.p_load, "q_load": b.q_load, "base_kv": b.base_kv,
            }
            for b in grid.buses
        ],
        "branches": [
            {
                "from": br.from_bus, "to": br.to_bus, "r": br.r, "x": br.x,
                "b_shunt": br.b_shunt, "mva_limit": br.mva_limit,
                "in_service": br.in_service,
            }
            for br in grid.branches
        ],
        "generators": [
            {
                "bus": g.bus_id, "kind": g.kind, "p_rated": g.p_rated, "p_set": g.p_set,
                "q_min": g.q_min, "q_max": g.q_max, "cost_per_pu": g.cost_per_pu,
                "on": g.on,
            }
            for g in grid.generators
        ],
    }


def _require(obj: dict, key: str, types, context: str):
    if key not in obj:
        raise ParseError(f"{context}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, types) or isinstance(value, bool) and bool not in (
        types if isinstance(types, tuple) else (types,)
    ):
        raise ParseError(f"{context}: field {key!r} has the wrong type")
    return value


def _grid_from_dict(obj: dict) -> GridState:
    if not isinstance(obj, dict):
        raise ParseError("grid file must contain a single JSON object")
    base_mva = _require(obj, "base_mva", (int, float), "grid")
    raw_buses = _require(obj, "buses", list, "grid")
    raw_branches = _require(obj, "branches", list, "grid")
    raw_gens = _require(obj, "generators", list, "grid")

    buses = []
    for i, rb in enumerate(raw_buses):
        if not isinstance(rb, dict):
            raise ParseError(f"bus entry {i} is not an object")
        ctx = f"bus entry {i}"
        buses.append(Bus(
            id=int(_require(rb, "id", (int, float), ctx)),
            kind=str(_require(rb, "kind", str, ctx)),
            v_mag=float(_require(rb, "v_mag", (int, float), ctx)),
            v_ang=float(_require(rb, "v_ang", (int, float), ctx)),
            p_load=float(_require(rb, "p_load", (int, float), ctx)),
            q_load=float(_require(rb, "q_load", (int, float), ctx)),
            base_kv=float(_require(rb, "base_kv", (int, float), ctx)),
        ))
    branches = []
    for i, rb in enumerate(raw_branches):
        if not isinstance(rb, dict):
            raise ParseError(f"branch entry {i} is not an object")
        ctx = f"branch entry {i}"
        branches.append(Branch(
            from_bus=int(_require(rb, "from", (int, float), ctx)),
            to_bus=int(_require(rb, "to", (int, float), ctx)),
            r=float(_require(rb, "r", (int, float), ctx)),
            x=float(_require(rb, "x", (int, float), ctx)),
            b_shunt=float(_require(rb, "b_shunt", (int, float), ctx)),
            mva_limit=float(_require(rb, "mva_limit", (int, float), ctx)),
            in_service=bool(_require(rb, "in_service", bool, ctx)),
        ))
    generators = []
    for i, rg in enumerate(raw_gens):
        if not isinstance(rg, dict):
            raise ParseError(f"generator entry {i} is not an object")
        ctx = f"generator entry {i}"
        generators.append(Generator(
            bus_id=int(_require(rg, "bus", (int, float), ctx)),
            kind=str(_require(rg, "kind", str, ctx)),
            p_rated=float(_require(rg, "p_rated", (int, float), ctx)),
            p_set=float(_require(rg, "p_set", (int, float), ctx)),
            q_min=float(_require(rg, "q_min", (int, float), ctx)),
            q_max=float(_require(rg, "q_max", (int, float), ctx)),
            cost_per_pu=float(_require(rg, "cost_per_pu", (int, float), ctx)),
            on=bool(_require(rg, "on", bool, ctx)),
        ))
    return GridState(
        base_mva=float(base_mva),
        buses=tuple(buses),
        branches=tuple(branches),
        generators=tuple(generators),
    )


def save_grid(grid: GridState, path) -> None:
    """Write the grid as JSON with sorted keys (byte-stable serialization)."""
    text = json.dumps(_grid_to_dict(grid), sort_keys=True, indent=2)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write grid file {path}: {exc}") from exc


def load_grid(path) -> GridState:
    """Parse and validate a grid JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read grid file {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {path}: {exc}") from exc
    grid = _grid_from_dict(obj)
    validate_grid(grid)
    return grid


def grid_checksum(grid: GridState) -> str:
    """SHA-256 of the canonical JSON serialization."""
    text = json.dumps(_grid_to_dict(grid), sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Bundled 23-bus grid
# ---------------------------------------------------------------------------
#
# Ring 1-2-...-23-1 plus seven chords, so every bus has degree >= 2 and no
# single branch trip islands the grid. Conventional plants sit in the north
# (buses 1-3); the five solar plants are embedded in the load pockets. Branch
# limits are sized so the all-generation base case runs uncongested while the
# north-south corridors overload once the solar plants drop out under full
# load (see tests and the dispatch scenarios).

_RING_DATA = [
    # (from, to, r, x, b_shunt, mva_limit)
    (1, 2, 0.010, 0.060, 0.020, 2.10),
    (2, 3, 0.012, 0.065, 0.020, 1.60),
    (3, 4, 0.014, 0.075, 0.022, 1.35),
    (4, 5, 0.016, 0.085, 0.024, 1.10),
    (5, 6, 0.014, 0.070, 0.020, 0.95),
    (6, 7, 0.018, 0.090, 0.026, 0.90),
    (7, 8, 0.016, 0.080, 0.022, 0.85),
    (8, 9, 0.014, 0.072, 0.020, 0.90),
    (9, 10, 0.018, 0.092, 0.026, 0.85),
    (10, 11, 0.016, 0.078, 0.022, 0.85),
    (11, 12, 0.014, 0.074, 0.020, 0.85),
    (12, 13, 0.018, 0.088, 0.024, 0.85),
    (13, 14, 0.016, 0.082, 0.022, 0.85),
    (14, 15, 0.014, 0.070, 0.020, 0.85),
    (15, 16, 0.018, 0.094, 0.026, 0.85),
    (16, 17, 0.016, 0.076, 0.022, 0.85),
    (17, 18, 0.014, 0.068, 0.020, 0.85),
    (18, 19, 0.018, 0.086, 0.024, 0.85),
    (19, 20, 0.016, 0.084, 0.022, 0.85),
    (20, 21, 0.014, 0.066, 0.020, 0.85),
    (21, 22, 0.018, 0.096, 0.026, 0.95),
    (22, 23, 0.016, 0.080, 0.022, 1.10),
    (23, 1, 0.012, 0.064, 0.020, 1.60),
]

_CHORD_DATA = [
    (1, 13, 0.024, 0.130, 0.030, 1.30),
    (2, 8, 0.022, 0.120, 0.030, 1.20),
    (3, 19, 0.026, 0.140, 0.032, 1.20),
    (5, 11, 0.024, 0.128, 0.030, 0.80),
    (9, 14, 0.022, 0.118, 0.028, 0.75),
    (12, 20, 0.026, 0.136, 0.032, 0.75),
    (16, 22, 0.024, 0.126, 0.030, 0.80),
]

# (bus, p_load, q_load); buses absent here carry no load
_LOAD_DATA = {
    2: (0.15, 0.05), 3: (0.20, 0.07), 4: (0.25, 0.09), 5: (0.30, 0.10),
    6: (0.20, 0.07), 7: (0.40, 0.13), 8: (0.15, 0.05), 9: (0.45, 0.15),
    10: (0.30, 0.10), 11: (0.20, 0.07), 12: (0.38, 0.12), 13: (0.25, 0.08),
    14: (0.15, 0.05), 15: (0.30, 0.10), 16: (0.25, 0.09), 17: (0.20, 0.07),
    18: (0.30, 0.10), 19: (0.25, 0.08), 20: (0.15, 0.05), 21: (0.30, 0.10),
    22: (0.25, 0.09), 23: (0.20, 0.07),
}

_SOLAR_BUSES = (8, 11, 14, 17, 20)


def build_default_grid() -> GridState:
    """The bundled 23-bus synthetic grid (deterministic, no randomness).

    23 buses, 30 branches, 8 generators (5 Solar + 3 Conventional), slack at
    bus 1, total load ~= 0.9 x total rated generation.
    """
    buses = []
    for bid in range(1, 24):
        p, q = _LOAD_DATA.get(bid, (0.0, 0.0))
        if bid == 1:
            buses.append(Bus(id=1, kind="Slack", v_mag=1.04, p_load=p, q_load=q))
        elif bid == 2:
            buses.append(Bus(id=2, kind="PV", v_mag=1.03, p_load=p, q_load=q))
        elif bid == 3:
            buses.append(Bus(id=3, kind="PV", v_mag=1.02, p_load=p, q_load=q))
        else:
            buses.append(Bus(id=bid, kind="PQ", v_mag=1.0, p_load=p, q_load=q))

    branches = tuple(
        Branch(from_bus=f, to_bus=t, r=r, x=x, b_shunt=b, mva_limit=lim)
        for f, t, r, x, b, lim in _RING_DATA + _CHORD_DATA
    )

    generators = [
        Generator(bus_id=1, kind="Conventional", p_rated=2.00, p_set=1.20,
                  q_min=-1.00, q_max=2.00, cost_per_pu=30.0),
        Generator(bus_id=2, kind="Conventional", p_rated=1.25, p_set=1.00,
                  q_min=-1.00, q_max=1.60, cost_per_pu=35.0),
        Generator(bus_id=3, kind="Conventional", p_rated=1.05, p_set=0.85,
                  q_min=-0.80, q_max=1.40, cost_per_pu=32.0),
    ]
    for sbus in _SOLAR_BUSES:
        generators.append(Generator(
            bus_id=sbus, kind="Solar", p_rated=0.38, p_set=0.34,
            q_min=0.0, q_max=0.0, cost_per_pu=2.0,
        ))

    grid = GridState(
        base_mva=100.0,
        buses=tuple(buses),
        branches=branches,
        generators=tuple(generators),
    )
    validate_grid(grid)
    return grid
