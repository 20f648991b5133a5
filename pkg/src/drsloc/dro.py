"""Worst-case measure over the total-variation ball and the
cutting-plane loop for the distributionally-robust location problem.

The master is unbounded in its first iteration as printed, so the
engine caps the epigraph variable by the instance-wide utility upper
bound, which is itself a valid bound.  Termination fires on the
repeated-solution rule or on the eta-versus-certified-value gap,
whichever comes first.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lp import LinearProgram, Tolerances, solve_lp
from .milp import MilpOptions, MixedBinaryProgram, solve_milp
from .model import AmbiguitySet, Instance, ScenarioSet, utility_upper_bound
from .recourse import RecourseSolution, cut_coefficients, evaluate_recourse

__all__ = [
    "WorstCaseMeasure",
    "MasterState",
    "DroSolution",
    "DroOptions",
    "worst_case_measure",
    "worst_case_measure_lp",
    "solve_master",
    "certified_value",
    "solve_dro",
]


@dataclass(frozen=True)
class WorstCaseMeasure:
    mu: np.ndarray
    value: float


@dataclass
class AggregatedCut:
    mu: np.ndarray
    r: np.ndarray  # per scenario
    t: np.ndarray  # (n_scenarios, n_candidates)

    @property
    def constant(self) -> float:
        return float(self.mu @ self.r)

    @property
    def slope(self) -> np.ndarray:
        return self.mu @ self.t


@dataclass
class MasterState:
    eta_cap: float
    cuts: list[AggregatedCut] = field(default_factory=list)
    visited: set[tuple[int, ...]] = field(default_factory=set)
    iteration: int = 0


@dataclass
class IterationRecord:
    n: int
    eta: float
    certified: float
    gap: float
    seconds: float
    visited: int


@dataclass
class DroSolution:
    y: tuple[int, ...]
    eta: float
    value: float  # exact worst-case expected recourse at y
    iterations: int
    wall_time: float
    converged: bool
    log: list[IterationRecord] = field(default_factory=list)


@dataclass
class DroOptions:
    max_iterations: int = 500
    rel_gap: float = 1e-6
    threads: int = 1
    milp: MilpOptions = field(default_factory=MilpOptions)
    lp_tol: Tolerances = field(default_factory=Tolerances)


def worst_case_measure(q_values, ambiguity: AmbiguitySet) -> WorstCaseMeasure:
    """Minimize the expected value over the TV ball by greedy mass
    transfer: up to radius/2 total mass moves from the highest-value
    scenarios onto the single lowest-value scenario (ties to the lowest
    index)."""
    if ambiguity.radius < 0:
        raise ValueError("radius must be nonnegative")
    q = np.asarray(q_values, dtype=float)
    mu = np.array(ambiguity.nominal, dtype=float)
    budget = ambiguity.radius / 2.0
    target = int(np.lexsort((np.arange(len(q)), q))[0])
    # drain the costliest scenarios first, never below zero
    order = np.lexsort((np.arange(len(q)), -q))
    moved = 0.0
    for w in order:
        if w == target or budget - moved <= 1e-15:
            continue
        if q[w] <= q[target]:
            break
        take = min(mu[w], budget - moved)
        mu[w] -= take
        mu[target] += take
        moved += take
    return WorstCaseMeasure(mu=mu, value=float(mu @ q))


def worst_case_measure_lp(
    q_values, ambiguity: AmbiguitySet, tol: Tolerances | None = None
) -> WorstCaseMeasure:
    """LP certification of the greedy transfer, solving the worst-case
    measure problem directly."""
    q = np.asarray(q_values, dtype=float)
    k = len(q)
    mu0 = np.array(ambiguity.nominal, dtype=float)
    # variables: mu (k), rho (k)
    nv = 2 * k
    rows = []
    b = []
    senses = []
    row = np.zeros(nv)
    row[k:] = 1.0
    rows.append(row); b.append(ambiguity.radius); senses.append("<=")
    for w in range(k):
        r1 = np.zeros(nv); r1[w] = 1.0; r1[k + w] = -1.0
        rows.append(r1); b.append(mu0[w]); senses.append("<=")
        r2 = np.zeros(nv); r2[w] = -1.0; r2[k + w] = -1.0
        rows.append(r2); b.append(-mu0[w]); senses.append("<=")
    r3 = np.zeros(nv); r3[:k] = 1.0
    rows.append(r3); b.append(1.0); senses.append("=")
    c = np.concatenate([q, np.zeros(k)])
    lp = LinearProgram(
        sense="min", c=c, A=np.array(rows), senses=senses, b=np.array(b),
        lb=np.zeros(nv), ub=np.full(nv, np.inf),
    )
    sol = solve_lp(lp, tol)
    if sol.status != "optimal":
        raise RuntimeError(f"worst-case measure LP returned {sol.status}")
    return WorstCaseMeasure(mu=sol.x[:k], value=float(sol.objective))


def _master_program(state: MasterState, instance: Instance) -> MixedBinaryProgram:
    m = instance.n_candidates
    nv = m + 1  # y block then eta
    rows = []
    b = []
    row = np.zeros(nv)
    row[:m] = instance.open_cost
    rows.append(row); b.append(instance.budget)
    for cut in state.cuts:
        r = np.zeros(nv)
        r[m] = 1.0
        r[:m] = -cut.slope
        rows.append(r); b.append(cut.constant)
    c = np.zeros(nv); c[m] = 1.0
    lb = np.zeros(nv)
    ub = np.ones(nv); ub[m] = state.eta_cap
    lp = LinearProgram(
        sense="max", c=c, A=np.array(rows), senses=["<="] * len(rows),
        b=np.array(b), lb=lb, ub=ub,
    )
    return MixedBinaryProgram(lp=lp, binary_idx=tuple(range(m)))


def solve_master(
    state: MasterState, instance: Instance,
    options: MilpOptions | None = None,
) -> tuple[tuple[int, ...], float]:
    """Optimal (y, eta) of the cut-constrained master problem."""
    sol = solve_milp(_master_program(state, instance), options)
    if sol.status not in ("optimal",):
        raise RuntimeError(f"master MILP returned {sol.status}")
    m = instance.n_candidates
    y = tuple(int(round(v)) for v in sol.x[:m])
    return y, float(sol.objective)


def _scenario_values(
    instance: Instance, y, scenario_set: ScenarioSet, threads: int,
) -> list[RecourseSolution]:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(
                pool.map(lambda d: evaluate_recourse(instance, y, d),
                         scenario_set.scenarios)
            )
    return [evaluate_recourse(instance, y, d) for d in scenario_set.scenarios]


def certified_value(
    instance: Instance, y, scenario_set: ScenarioSet,
    ambiguity: AmbiguitySet, threads: int = 1,
) -> float:
    """Exact worst-case expected recourse at a fixed decision."""
    sols = _scenario_values(instance, y, scenario_set, threads)
    q = [s.value for s in sols]
    return worst_case_measure(q, ambiguity).value


def solve_dro(
    instance: Instance,
    scenario_set: ScenarioSet,
    ambiguity: AmbiguitySet,
    options: DroOptions | None = None,
) -> DroSolution:
    """Cutting-plane loop: master, per-scenario recourse at the master
    decision, worst-case measure, aggregated cut; repeat until the
    decision repeats or the bound gap closes."""
    opt = options or DroOptions()
    t0 = time.perf_counter()
    cap = utility_upper_bound(instance, scenario_set)
    state = MasterState(eta_cap=cap)
    log: list[IterationRecord] = []

    y = tuple(0 for _ in range(instance.n_candidates))
    eta = cap
    best_y, best_val = y, 0.0
    converged = False

    while state.iteration < opt.max_iterations:
        state.iteration += 1
        it_start = time.perf_counter()

        y, eta = solve_master(state, instance, opt.milp)
        if y in state.visited:
            # a cut generated at y already bounds eta by its certified
            # value, so the master can no longer improve
            converged = True
            state.iteration -= 1
            break
        state.visited.add(y)
        sols = _scenario_values(instance, y, scenario_set, opt.threads)
        q = np.array([s.value for s in sols])
        wc = worst_case_measure(q, ambiguity)
        if wc.value > best_val or best_y is None:
            best_y, best_val = y, float(wc.value)
        r = np.zeros(len(q))
        t = np.zeros((len(q), instance.n_candidates))
        for w, s in enumerate(sols):
            r[w], t[w] = cut_coefficients(s, instance, scenario_set[w])
        state.cuts.append(AggregatedCut(mu=wc.mu, r=r, t=t))

        gap = eta - best_val
        log.append(IterationRecord(
            n=state.iteration, eta=eta, certified=float(wc.value),
            gap=float(gap), seconds=time.perf_counter() - it_start,
            visited=len(state.visited),
        ))
        if gap <= opt.rel_gap * (1.0 + abs(eta)):
            converged = True
            break

    return DroSolution(
        y=best_y, eta=float(eta), value=float(best_val),
        iterations=state.iteration, wall_time=time.perf_counter() - t0,
        converged=converged, log=log,
    )
