"""Second-stage evaluation: exact recourse LP with duals, the
uncapacitated closed form, a greedy feasible heuristic, and the
optimality-cut coefficients built from the duals.

The demand rows are arranged as sum_j x_ij - sum_j D_ij q_ij <= 0 so
their duals do not enter the cut coefficients; only the capacity,
selection and linking duals do.

For speed the LP is solved over the opened candidates only and the
duals of eliminated columns (closed candidates) are recovered by a
minimal dual-feasible extension, which keeps every generated cut valid
for arbitrary binary decisions while staying tight at the generating
one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import LinearProgram, Tolerances, solve_lp
from .model import Allocation, Instance

__all__ = [
    "RecourseSolution",
    "evaluate_recourse",
    "closed_form_uncap_value",
    "greedy_recourse",
    "cut_coefficients",
]


@dataclass(frozen=True)
class RecourseSolution:
    value: float
    allocation: Allocation
    alpha: tuple[float, ...]  # capacity rows, per candidate
    beta: tuple[float, ...]  # demand rows, per site
    gamma: tuple[float, ...]  # selection (sum q <= 1) rows, per site
    tau: dict[tuple[int, int], float]  # linking q <= y rows, per pair
    status: str = "optimal"


def evaluate_recourse(
    instance: Instance,
    y,
    demand: dict[tuple[int, int], float],
    tol: Tolerances | None = None,
) -> RecourseSolution:
    """Exact optimum of the scenario problem at decision ``y`` with all
    four dual families populated."""
    n, m = instance.n_sites, instance.n_candidates
    open_j = [j for j in range(m) if y[j]]
    open_set = set(open_j)
    pairs = [(i, j) for i in range(n) for j in instance.neighborhood[i] if j in open_set]

    beta = np.zeros(n)
    gamma = np.zeros(n)
    alpha = np.zeros(m)
    tau: dict[tuple[int, int], float] = {}
    x_map: dict[tuple[int, int], float] = {}
    q_map: dict[tuple[int, int], float] = {}
    value = 0.0

    if pairs:
        npair = len(pairs)
        nv = 2 * npair  # x block then q block
        cap_row = {j: k for k, j in enumerate(open_j)}
        nrow = len(open_j) + 2 * n + npair
        A = np.zeros((nrow, nv))
        b = np.zeros(nrow)
        senses = ["<="] * nrow
        c = np.zeros(nv)
        for k, (i, j) in enumerate(pairs):
            c[k] = instance.utility[(i, j)]
            A[cap_row[j], k] = 1.0
            A[len(open_j) + i, k] = 1.0
            A[len(open_j) + i, npair + k] = -demand[(i, j)]
            A[len(open_j) + n + i, npair + k] = 1.0
            A[len(open_j) + 2 * n + k, npair + k] = 1.0
            b[len(open_j) + 2 * n + k] = 1.0
        for j, k in cap_row.items():
            b[k] = instance.capacity[j]
        b[len(open_j) + n : len(open_j) + 2 * n] = 1.0
        lp = LinearProgram(
            sense="max", c=c, A=A, senses=senses, b=b,
            lb=np.zeros(nv), ub=np.full(nv, np.inf),
        )
        sol = solve_lp(lp, tol)
        if sol.status != "optimal":
            return RecourseSolution(
                value=float("nan"), allocation=Allocation({}, {}),
                alpha=(), beta=(), gamma=(), tau={}, status=sol.status,
            )
        value = sol.objective
        for k, (i, j) in enumerate(pairs):
            x_map[(i, j)] = float(sol.x[k])
            q_map[(i, j)] = float(sol.x[npair + k])
        for j, k in cap_row.items():
            alpha[j] = max(0.0, float(sol.duals[k]))
        beta = np.maximum(sol.duals[len(open_j) : len(open_j) + n], 0.0)
        gamma = np.maximum(sol.duals[len(open_j) + n : len(open_j) + 2 * n], 0.0)
        for k, (i, j) in enumerate(pairs):
            tau[(i, j)] = max(0.0, float(sol.duals[len(open_j) + 2 * n + k]))

    # sites without an opened neighbor: the LP leaves their duals free;
    # pick the extension giving the flattest valid cut slopes.
    reached = {i for (i, _) in pairs}
    for i in range(n):
        if i not in reached:
            beta[i] = max(instance.utility[(i, j)] for j in instance.neighborhood[i])
            gamma[i] = 0.0

    # minimal dual-feasible completion for closed candidates
    for i in range(n):
        for j in instance.neighborhood[i]:
            if j in open_set:
                continue
            tau[(i, j)] = max(0.0, demand[(i, j)] * beta[i] - gamma[i])
    for j in range(m):
        if j in open_set:
            continue
        vals = [
            instance.utility[(i, j)] - beta[i]
            for i in instance.reverse_neighborhood[j]
        ]
        alpha[j] = max(0.0, max(vals, default=0.0))

    return RecourseSolution(
        value=float(value),
        allocation=Allocation(x=x_map, q=q_map),
        alpha=tuple(float(v) for v in alpha),
        beta=tuple(float(v) for v in beta),
        gamma=tuple(float(v) for v in gamma),
        tau=tau,
    )


def closed_form_uncap_value(
    instance: Instance,
    y,
    demand: dict[tuple[int, int], float],
    certificate,
) -> float:
    """Capacity-free scenario optimum: per site, the best opened
    utility-demand product.  Requires a consistency certificate
    (see static_models.check_consistency)."""
    if certificate is None or not getattr(certificate, "consistent", False):
        raise ValueError("closed form requires a certified consistent instance")
    total = 0.0
    for i in range(instance.n_sites):
        opened = [j for j in instance.neighborhood[i] if y[j]]
        if opened:
            total += max(instance.utility[(i, j)] * demand[(i, j)] for j in opened)
    return total


def greedy_recourse(
    instance: Instance,
    y,
    demand: dict[tuple[int, int], float],
) -> tuple[float, Allocation]:
    """Feasible allocation by scanning opened pairs in nonincreasing
    utility order; always a lower bound on the exact recourse value."""
    open_set = {j for j in range(instance.n_candidates) if y[j]}
    pairs = sorted(
        ((i, j) for i in range(instance.n_sites)
         for j in instance.neighborhood[i] if j in open_set),
        key=lambda ij: (-instance.utility[ij], ij),
    )
    site_resid = {}
    for i in range(instance.n_sites):
        opened = [j for j in instance.neighborhood[i] if j in open_set]
        site_resid[i] = max((demand[(i, j)] for j in opened), default=0.0)
    cap_resid = list(instance.capacity)
    x: dict[tuple[int, int], float] = {}
    q: dict[tuple[int, int], float] = {}
    value = 0.0
    for (i, j) in pairs:
        flow = min(site_resid[i], cap_resid[j])
        if flow > 0:
            x[(i, j)] = flow
            site_resid[i] -= flow
            cap_resid[j] -= flow
            value += instance.utility[(i, j)] * flow
    # q mass on the demand argmax among opened neighbors (lowest index tie)
    for i in range(instance.n_sites):
        opened = [j for j in instance.neighborhood[i] if j in open_set]
        if opened:
            best = max(opened, key=lambda j: (demand[(i, j)], -j))
            q[(i, best)] = 1.0
    return value, Allocation(x=x, q=q)


def cut_coefficients(
    solution: RecourseSolution,
    instance: Instance,
    demand: dict[tuple[int, int], float],
) -> tuple[float, np.ndarray]:
    """Optimality-cut data (r, t) from an optimal recourse solution:
    Q(y', D) <= r + t . y' for every binary y', tight at the
    generating decision."""
    if solution.status != "optimal":
        raise ValueError(f"recourse solution status is {solution.status!r}")
    r = float(sum(solution.gamma))
    t = np.zeros(instance.n_candidates)
    for j in range(instance.n_candidates):
        t[j] = instance.capacity[j] * solution.alpha[j]
    for (i, j), v in solution.tau.items():
        t[j] += v
    # Any slope may be clipped at the scenario value bound U: if some
    # clipped candidate is open, the cut's right-hand side is already
    # >= U >= Q(y', D); otherwise the sum is unchanged.  This keeps
    # capacity-scaled slopes (C_j * alpha_j with very large C_j) out of
    # the master program.
    cap = 0.0
    for i in range(instance.n_sites):
        if not instance.neighborhood[i]:
            continue
        best_u = max(instance.utility[i, j] for j in instance.neighborhood[i])
        best_d = max(demand.get((i, j), 0.0) for j in instance.neighborhood[i])
        cap += best_u * best_d
    np.minimum(t, cap, out=t)
    return r, t
