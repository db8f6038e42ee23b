"""Bus admittance matrix and Newton-Raphson AC power flow in polar form.

Dense linear algebra with an explicit partial-pivot Gaussian elimination;
at 23 buses sparsity machinery buys nothing and the explicit factorization
lets us detect near-singular Jacobians at a fixed pivot threshold. All
functions are pure: solving twice from the same grid yields bitwise-identical
solutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence, SingularJacobian, SingularNetwork
from .grid import GridState

PIVOT_THRESHOLD = 1e-12


@dataclass(frozen=True)
class AdmittanceMatrix:
    n: int
    entries: np.ndarray  # complex [n, n]


@dataclass(frozen=True)
class PowerFlowSolution:
    v_mag: np.ndarray  # per bus, pu
    v_ang: np.ndarray  # per bus, radians
    iterations: int
    max_mismatch: float  # pu
    branch_flows: np.ndarray  # apparent power per branch (worst end), pu

    def complex_voltages(self) -> np.ndarray:
        return self.v_mag * np.exp(1j * self.v_ang)


@dataclass(frozen=True)
class CongestionReport:
    congested: bool
    overloads: tuple  # (branch_index, loading_ratio) pairs, in branch order


def build_ybus(grid: GridState) -> AdmittanceMatrix:
    """Assemble the bus admittance matrix from the standard branch pi model.

    Out-of-service branches contribute nothing. Raises SingularNetwork if any
    bus ends up isolated (zero row).
    """
    n = grid.n_buses
    y = np.zeros((n, n), dtype=complex)
    for br in grid.branches:
        if not br.in_service:
            continue
        i = grid.bus_index(br.from_bus)
        j = grid.bus_index(br.to_bus)
        ys = 1.0 / complex(br.r, br.x)
        ysh = 0.5j * br.b_shunt
        y[i, i] += ys + ysh
        y[j, j] += ys + ysh
        y[i, j] -= ys
        y[j, i] -= ys
    isolated = np.flatnonzero(np.all(y == 0, axis=1))
    if isolated.size:
        raise SingularNetwork(f"bus {isolated[0] + 1} is isolated (zero Ybus row)")
    return AdmittanceMatrix(n=n, entries=y)


def gauss_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a dense linear system by Gaussian elimination with partial pivoting.

    Raises SingularJacobian when the best available pivot falls below
    PIVOT_THRESHOLD in magnitude.
    """
    a = np.array(a, dtype=float)
    x = np.array(b, dtype=float)
    n = a.shape[0]
    for k in range(n):
        pivot_row = k + int(np.argmax(np.abs(a[k:, k])))
        pivot = a[pivot_row, k]
        if abs(pivot) < PIVOT_THRESHOLD:
            raise SingularJacobian(
                f"pivot {abs(pivot):.3e} below {PIVOT_THRESHOLD:g} at column {k}"
            )
        if pivot_row != k:
            a[[k, pivot_row]] = a[[pivot_row, k]]
            x[[k, pivot_row]] = x[[pivot_row, k]]
        factors = a[k + 1:, k] / pivot
        a[k + 1:, k:] -= np.outer(factors, a[k, k:])
        x[k + 1:] -= factors * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def _scheduled_injections(grid: GridState):
    """Net scheduled P injection per bus and Q injection at PQ buses.

    Generators at PQ buses (solar inverters) run at unity power factor, so
    they contribute active power only.
    """
    n = grid.n_buses
    p = np.zeros(n)
    q = np.zeros(n)
    for g in grid.generators:
        if g.on:
            p[grid.bus_index(g.bus_id)] += g.p_set
    for i, bus in enumerate(grid.buses):
        p[i] -= bus.p_load
        q[i] -= bus.q_load
    return p, q


def _bus_q_limits(grid: GridState):
    """Aggregate reactive limits of the in-service generators at each bus."""
    n = grid.n_buses
    qmin = np.zeros(n)
    qmax = np.zeros(n)
    has_gen = np.zeros(n, dtype=bool)
    for g in grid.generators:
        if g.on:
            i = grid.bus_index(g.bus_id)
            qmin[i] += g.q_min
            qmax[i] += g.q_max
            has_gen[i] = True
    return qmin, qmax, has_gen


def _mismatch(v: np.ndarray, ybus: np.ndarray, p_sched, q_sched, pvpq, pq):
    s = v * np.conj(ybus @ v)
    dp = p_sched[pvpq] - s.real[pvpq]
    dq = q_sched[pq] - s.imag[pq]
    return np.concatenate([dp, dq]), s


def power_flow_jacobian(v: np.ndarray, ybus: np.ndarray, pvpq, pq) -> np.ndarray:
    """Polar-form Jacobian of the calculated injections S(theta, |V|).

    Uses the closed-form complex derivatives
      dS/dtheta = j.diag(V).(diag(I) - Y.diag(V))*
      dS/d|V|   = diag(V/|V|).diag(I)* + diag(V).(Y.diag(V/|V|))*
    and slices the real blocks for the unknowns.
    """
    i_bus = ybus @ v
    v_norm = v / np.abs(v)
    diag_v = np.diag(v)
    ds_dva = 1j * diag_v @ np.conj(np.diag(i_bus) - ybus @ diag_v)
    ds_dvm = np.diag(v_norm * np.conj(i_bus)) + diag_v @ np.conj(ybus @ np.diag(v_norm))
    j11 = ds_dva.real[np.ix_(pvpq, pvpq)]
    j12 = ds_dvm.real[np.ix_(pvpq, pq)]
    j21 = ds_dva.imag[np.ix_(pq, pvpq)]
    j22 = ds_dvm.imag[np.ix_(pq, pq)]
    return np.block([[j11, j12], [j21, j22]])


def compute_branch_flows(grid: GridState, v: np.ndarray) -> np.ndarray:
    """Apparent power carried by each branch: the worse of the two ends, pu.

    Out-of-service branches report zero flow.
    """
    flows = np.zeros(len(grid.branches))
    for k, br in enumerate(grid.branches):
        if not br.in_service:
            continue
        i = grid.bus_index(br.from_bus)
        j = grid.bus_index(br.to_bus)
        ys = 1.0 / complex(br.r, br.x)
        ysh = 0.5j * br.b_shunt
        s_from = v[i] * np.conj(ys * (v[i] - v[j]) + ysh * v[i])
        s_to = v[j] * np.conj(ys * (v[j] - v[i]) + ysh * v[j])
        flows[k] = max(abs(s_from), abs(s_to))
    return flows


def _solve_fixed_types(grid, ybus, p_sched, q_sched, kinds, tol, max_iter, v0):
    n = grid.n_buses
    pvpq = np.flatnonzero(kinds != 0)  # 0 = slack, 1 = PV, 2 = PQ
    pq = np.flatnonzero(kinds == 2)
    vm = v0[0].copy()
    va = v0[1].copy()
    n_ang = pvpq.size

    v = vm * np.exp(1j * va)
    rhs, _ = _mismatch(v, ybus, p_sched, q_sched, pvpq, pq)
    max_mis = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    iterations = 0
    while max_mis > tol:
        if iterations >= max_iter:
            raise NonConvergence(
                f"no convergence after {max_iter} iterations "
                f"(max mismatch {max_mis:.3e} pu)",
                mismatch=max_mis,
            )
        jac = power_flow_jacobian(v, ybus, pvpq, pq)
        dx = gauss_solve(jac, rhs)
        va[pvpq] += dx[:n_ang]
        vm[pq] += dx[n_ang:]
        iterations += 1
        v = vm * np.exp(1j * va)
        rhs, _ = _mismatch(v, ybus, p_sched, q_sched, pvpq, pq)
        max_mis = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    return vm, va, iterations, max_mis


def solve_powerflow(grid: GridState, tol: float = 1e-8, max_iter: int = 20,
                    warm_start: bool = False,
                    enforce_q_limits: bool = False) -> PowerFlowSolution:
    """Newton-Raphson power flow from a flat start (or the grid's stored voltages).

    With enforce_q_limits, PV buses whose aggregate generator reactive output
    leaves [q_min, q_max] are switched to PQ at the violated limit and the
    system is re-solved (steady-state dispatch behavior). Fault-window solves
    leave the flag off.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    ybus = build_ybus(grid).entries
    p_sched, q_sched = _scheduled_injections(grid)

    kind_code = {"Slack": 0, "PV": 1, "PQ": 2}
    kinds = np.array([kind_code[b.kind] for b in grid.buses])
    setpoints = np.array([b.v_mag for b in grid.buses])

    if warm_start:
        vm = np.array([b.v_mag for b in grid.buses], dtype=float)
        va = np.array([b.v_ang for b in grid.buses], dtype=float)
    else:
        vm = np.where(kinds == 2, 1.0, setpoints)
        va = np.zeros(grid.n_buses)
        va[kinds == 0] = np.array([b.v_ang for b in grid.buses])[kinds == 0]

    vm, va, iterations, max_mis = _solve_fixed_types(
        grid, ybus, p_sched, q_sched, kinds, tol, max_iter, (vm, va))

    if enforce_q_limits:
        qmin, qmax, _ = _bus_q_limits(grid)
        q_load = np.array([b.q_load for b in grid.buses])
        for _ in range(5):
            v = vm * np.exp(1j * va)
            s = v * np.conj(ybus @ v)
            q_gen = s.imag + q_load
            switched = False
            for i in np.flatnonzero(kinds == 1):
                if q_gen[i] > qmax[i] + 1e-9:
                    kinds[i] = 2
                    q_sched[i] = qmax[i] - q_load[i]
                    switched = True
                elif q_gen[i] < qmin[i] - 1e-9:
                    kinds[i] = 2
                    q_sched[i] = qmin[i] - q_load[i]
                    switched = True
            if not switched:
                break
            vm, va, extra_iters, max_mis = _solve_fixed_types(
                grid, ybus, p_sched, q_sched, kinds, tol, max_iter, (vm, va))
            iterations += extra_iters

    v = vm * np.exp(1j * va)
    return PowerFlowSolution(
        v_mag=np.abs(v),
        v_ang=va,
        iterations=iterations,
        max_mismatch=max_mis,
        branch_flows=compute_branch_flows(grid, v),
    )


def check_congestion(solution: PowerFlowSolution, grid: GridState) -> CongestionReport:
    """Flag any in-service branch whose apparent flow exceeds its MVA limit."""
    overloads = []
    for k, br in enumerate(grid.branches):
        if not br.in_service:
            continue
        if solution.branch_flows[k] > br.mva_limit:
            overloads.append((k, solution.branch_flows[k] / br.mva_limit))
    return CongestionReport(congested=bool(overloads), overloads=tuple(overloads))


def total_injection_balance(grid: GridState, solution: PowerFlowSolution) -> complex:
    """Total generation minus load minus losses; ~0 for a converged solution.

    Generation and load come from the solved bus injections S = V.(YV)*;
    losses are recomputed branch by branch from the terminal voltages, so the
    two sides of the balance travel independent code paths.
    """
    ybus = build_ybus(grid).entries
    v = solution.complex_voltages()
    s = v * np.conj(ybus @ v)  # net injection per bus = gen - load
    load = sum(complex(b.p_load, b.q_load) for b in grid.buses)
    gen = s.sum() + load

    losses = 0j
    for br in grid.branches:
        if not br.in_service:
            continue
        i = grid.bus_index(br.from_bus)
        j = grid.bus_index(br.to_bus)
        ys = 1.0 / complex(br.r, br.x)
        ysh = 0.5j * br.b_shunt
        s_from = v[i] * np.conj(ys * (v[i] - v[j]) + ysh * v[i])
        s_to = v[j] * np.conj(ys * (v[j] - v[i]) + ysh * v[j])
        losses += s_from + s_to
    return gen - load - losses
