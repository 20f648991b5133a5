"""Deterministic location MILP, consistency checking, the
uncapacitated single-stage reformulation, and brute-force oracles.

The printed single-stage model omits the linking row between the TV
multiplier and the scenario multipliers that its own derivation needs;
the model here is re-derived from the dual of the inner minimization
(lambda >= alpha + beta per scenario) and is certified against the
cutting-plane solver in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dro import certified_value, worst_case_measure
from .lp import LinearProgram
from .milp import MilpOptions, MixedBinaryProgram, solve_milp
from .model import Allocation, AmbiguitySet, Instance, ScenarioSet

__all__ = [
    "ConsistencyCertificate",
    "solve_ddsl",
    "check_consistency",
    "solve_uncap_reformulation",
    "brute_force_dro",
    "enumerate_budget_feasible",
]


@dataclass(frozen=True)
class ConsistencyCertificate:
    consistent: bool
    strong: bool
    # per-site candidate order, most dominant first (only when consistent)
    orders: tuple[tuple[int, ...], ...] | None
    witness: tuple[int, int, int, int] | None  # (site, j, k, scenario)


def _dominates(instance, scenario_set, i, j, k) -> bool:
    """Weak dominance of candidate j over k for site i, jointly in the
    utility and every scenario's demand."""
    if instance.utility[(i, j)] < instance.utility[(i, k)]:
        return False
    return all(
        dem[(i, j)] >= dem[(i, k)] for dem in scenario_set.scenarios
    )


def check_consistency(
    instance: Instance, scenario_set: ScenarioSet
) -> ConsistencyCertificate:
    """Strong consistency: for every site and candidate pair, one of the
    two weakly dominates the other in utility and in the demand of every
    scenario simultaneously.  Pairwise totality of this (transitive)
    dominance yields a witness inside every neighborhood subset."""
    orders: list[tuple[int, ...]] = []
    for i in range(instance.n_sites):
        nbrs = list(instance.neighborhood[i])
        for a in range(len(nbrs)):
            for b in range(a + 1, len(nbrs)):
                j, k = nbrs[a], nbrs[b]
                if not (_dominates(instance, scenario_set, i, j, k)
                        or _dominates(instance, scenario_set, i, k, j)):
                    # a scenario whose demand ordering blocks whichever
                    # direction the utilities would still allow
                    uj, uk = instance.utility[(i, j)], instance.utility[(i, k)]
                    w = 0
                    for ww, dem in enumerate(scenario_set.scenarios):
                        dj, dk = dem[(i, j)], dem[(i, k)]
                        if (uj >= uk and dj < dk) or (uj <= uk and dj > dk):
                            w = ww
                            break
                    return ConsistencyCertificate(
                        consistent=False, strong=False,
                        orders=None, witness=(i, j, k, w),
                    )
        key = lambda j: (
            instance.utility[(i, j)],
            tuple(dem[(i, j)] for dem in scenario_set.scenarios),
            -j,
        )
        orders.append(tuple(sorted(nbrs, key=key, reverse=True)))
    return ConsistencyCertificate(
        consistent=True, strong=True, orders=tuple(orders), witness=None,
    )


def _ddsl_program(
    instance: Instance, demand: dict[tuple[int, int], float]
) -> tuple[MixedBinaryProgram, list[tuple[int, int]]]:
    n, m = instance.n_sites, instance.n_candidates
    pairs = instance.pairs
    np_ = len(pairs)
    nv = m + 2 * np_  # y | x | q
    c = np.zeros(nv)
    rows, b = [], []

    def new_row():
        rows.append(np.zeros(nv))
        return rows[-1]

    r = new_row(); r[:m] = instance.open_cost; b.append(instance.budget)
    cap_rows = {}
    for j in range(m):
        r = new_row(); r[j] = -instance.capacity[j]
        cap_rows[j] = r; b.append(0.0)
    dem_rows, sel_rows = {}, {}
    for i in range(n):
        dem_rows[i] = new_row(); b.append(0.0)
        sel_rows[i] = new_row(); b.append(1.0)
    for k, (i, j) in enumerate(pairs):
        c[m + k] = instance.utility[(i, j)]
        cap_rows[j][m + k] = 1.0
        dem_rows[i][m + k] = 1.0
        dem_rows[i][m + np_ + k] = -demand[(i, j)]
        sel_rows[i][m + np_ + k] = 1.0
        r = new_row(); r[m + np_ + k] = 1.0; r[j] = -1.0; b.append(0.0)
    lb = np.zeros(nv)
    ub = np.concatenate([np.ones(m), np.full(np_, np.inf), np.ones(np_)])
    lp = LinearProgram(
        sense="max", c=c, A=np.array(rows), senses=["<="] * len(rows),
        b=np.array(b), lb=lb, ub=ub,
    )
    return MixedBinaryProgram(lp=lp, binary_idx=tuple(range(m))), pairs


def solve_ddsl(
    instance: Instance,
    demand: dict[tuple[int, int], float],
    options: MilpOptions | None = None,
) -> tuple[tuple[int, ...], Allocation, float]:
    """Deterministic single-demand location MILP."""
    mbp, pairs = _ddsl_program(instance, demand)
    sol = solve_milp(mbp, options)
    if sol.status != "optimal":
        raise RuntimeError(f"deterministic MILP returned {sol.status}")
    m = instance.n_candidates
    np_ = len(pairs)
    y = tuple(int(round(v)) for v in sol.x[:m])
    x = {pairs[k]: float(sol.x[m + k]) for k in range(np_)}
    q = {pairs[k]: float(sol.x[m + np_ + k]) for k in range(np_)}
    return y, Allocation(x=x, q=q), float(sol.objective)


def solve_uncap_reformulation(
    instance: Instance,
    scenario_set: ScenarioSet,
    ambiguity: AmbiguitySet,
    options: MilpOptions | None = None,
    certificate: ConsistencyCertificate | None = None,
) -> tuple[tuple[int, ...], float]:
    """Single-stage mixed 0-1 model for the capacity-free problem.

    Maximizes gamma - lambda*d + sum_w mu0_w (beta_w - alpha_w) over the
    dualized inner problem; valid only under strong consistency.
    """
    cert = certificate or check_consistency(instance, scenario_set)
    if not cert.strong:
        raise ValueError(
            f"reformulation requires strong consistency; witness {cert.witness}"
        )
    n, m = instance.n_sites, instance.n_candidates
    pairs = instance.pairs
    np_ = len(pairs)
    k = len(scenario_set)
    mu0 = np.array(ambiguity.nominal)
    # variables: y (m) | s (np_) | lambda | gamma | alpha (k) | beta (k)
    nv = m + np_ + 2 + 2 * k
    i_lam = m + np_
    i_gam = i_lam + 1
    i_alp = i_gam + 1
    i_bet = i_alp + k
    c = np.zeros(nv)
    c[i_lam] = -ambiguity.radius
    c[i_gam] = 1.0
    c[i_alp : i_alp + k] = -mu0
    c[i_bet : i_bet + k] = mu0
    rows, b, senses = [], [], []

    r = np.zeros(nv); r[:m] = instance.open_cost
    rows.append(r); b.append(instance.budget); senses.append("<=")
    for w, dem in enumerate(scenario_set.scenarios):
        r = np.zeros(nv)
        for kk, (i, j) in enumerate(pairs):
            r[m + kk] = instance.utility[(i, j)] * dem[(i, j)]
        r[i_alp + w] = 1.0
        r[i_bet + w] = -1.0
        r[i_gam] = -1.0
        rows.append(r); b.append(0.0); senses.append(">=")
        r = np.zeros(nv)
        r[i_lam] = 1.0; r[i_alp + w] = -1.0; r[i_bet + w] = -1.0
        rows.append(r); b.append(0.0); senses.append(">=")
    for kk, (i, j) in enumerate(pairs):
        r = np.zeros(nv); r[m + kk] = 1.0; r[j] = -1.0
        rows.append(r); b.append(0.0); senses.append("<=")
    for i in range(n):
        r = np.zeros(nv)
        for kk, (ii, _) in enumerate(pairs):
            if ii == i:
                r[m + kk] = 1.0
        rows.append(r); b.append(1.0); senses.append("<=")

    lb = np.zeros(nv); lb[i_gam] = -np.inf
    ub = np.full(nv, np.inf)
    ub[:m] = 1.0
    ub[m : m + np_] = 1.0
    lp = LinearProgram(
        sense="max", c=c, A=np.array(rows), senses=senses,
        b=np.array(b), lb=lb, ub=ub,
    )
    sol = solve_milp(MixedBinaryProgram(lp=lp, binary_idx=tuple(range(m))), options)
    if sol.status != "optimal":
        raise RuntimeError(f"reformulation MILP returned {sol.status}")
    y = tuple(int(round(v)) for v in sol.x[:m])
    return y, float(sol.objective)


def enumerate_budget_feasible(instance: Instance, limit: int = 1 << 20):
    """Yield every budget-feasible binary decision, lexicographically."""
    m = instance.n_candidates
    cost = instance.open_cost
    budget = instance.budget
    count = 0
    y = [0] * m

    def rec(j, spent):
        nonlocal count
        if j == m:
            count += 1
            if count > limit:
                raise ValueError("budget-feasible enumeration limit exceeded")
            yield tuple(y)
            return
        yield from rec(j + 1, spent)
        if spent + cost[j] <= budget + 1e-9:
            y[j] = 1
            yield from rec(j + 1, spent + cost[j])
            y[j] = 0

    yield from rec(0, 0.0)


def brute_force_dro(
    instance: Instance,
    scenario_set: ScenarioSet,
    ambiguity: AmbiguitySet,
    limit: int = 1 << 20,
) -> tuple[tuple[int, ...], float]:
    """Ground-truth oracle: exhaust budget-feasible decisions, exact
    worst-case inner value for each."""
    best_y, best_v = None, -np.inf
    for y in enumerate_budget_feasible(instance, limit):
        v = certified_value(instance, y, scenario_set, ambiguity)
        if v > best_v + 1e-12:
            best_y, best_v = y, v
    return best_y, float(best_v)
