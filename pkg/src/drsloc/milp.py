"""Branch-and-bound over binary variables on top of the LP kernel.

Branching picks the most fractional binary (ties to the lowest index);
search is depth-first with a best-bound reordering of the open node
list every 1000 processed nodes.  Deterministic for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lp import LinearProgram, LpSolution, Tolerances, solve_lp

__all__ = ["MixedBinaryProgram", "MilpOptions", "MilpSolution", "solve_milp"]


@dataclass
class MixedBinaryProgram:
    lp: LinearProgram
    binary_idx: tuple[int, ...]

    def __post_init__(self):
        n = self.lp.A.shape[1]
        for j in self.binary_idx:
            if not 0 <= j < n:
                raise ValueError(f"binary index {j} out of range")
            if self.lp.lb[j] < -1e-12 or self.lp.ub[j] > 1 + 1e-12:
                raise ValueError(f"binary variable {j} must have bounds within [0, 1]")


@dataclass
class MilpOptions:
    abs_gap: float = 1e-6
    int_tol: float = 1e-6
    node_limit: int = 200_000
    restart_every: int = 1000


@dataclass
class MilpSolution:
    status: str  # optimal | infeasible | unbounded | node_limit
    x: np.ndarray | None = None
    objective: float | None = None
    nodes: int = 0
    gap: float | None = None
    incumbent_trace: list[float] = field(default_factory=list)


def _node_lp(mbp: MixedBinaryProgram, fixed: dict[int, int]) -> LinearProgram:
    lb = mbp.lp.lb.copy()
    ub = mbp.lp.ub.copy()
    for j, v in fixed.items():
        lb[j] = ub[j] = float(v)
    return LinearProgram(
        sense=mbp.lp.sense, c=mbp.lp.c, A=mbp.lp.A,
        senses=mbp.lp.senses, b=mbp.lp.b, lb=lb, ub=ub,
    )


def solve_milp(mbp: MixedBinaryProgram, options: MilpOptions | None = None,
               lp_tol: Tolerances | None = None) -> MilpSolution:
    opt = options or MilpOptions()
    sgn = 1.0 if mbp.lp.sense == "max" else -1.0  # internally maximize sgn*obj

    root = solve_lp(_node_lp(mbp, {}), lp_tol)
    if root.status == "infeasible":
        return MilpSolution(status="infeasible")
    if root.status == "unbounded":
        return MilpSolution(status="unbounded")
    if root.status == "stalled":
        raise RuntimeError("LP relaxation stalled at the root node")

    best_x: np.ndarray | None = None
    best_obj = -np.inf  # in sgn-normalized units
    trace: list[float] = []
    # stack entries: (bound, fixed) -- bound is the parent relaxation value
    stack: list[tuple[float, dict[int, int]]] = [(sgn * root.objective, {})]
    nodes = 0

    while stack:
        if nodes >= opt.node_limit:
            break
        if nodes and nodes % opt.restart_every == 0:
            stack.sort(key=lambda e: e[0])  # best bound to the stack top
        bound, fixed = stack.pop()
        if bound <= best_obj + opt.abs_gap:
            continue
        nodes += 1
        sol = solve_lp(_node_lp(mbp, fixed), lp_tol)
        if sol.status == "infeasible":
            continue
        if sol.status != "optimal":
            raise RuntimeError(f"node LP returned {sol.status}")
        val = sgn * sol.objective
        if val <= best_obj + opt.abs_gap:
            continue
        frac = np.array([abs(sol.x[j] - round(sol.x[j])) for j in mbp.binary_idx])
        if np.all(frac <= opt.int_tol):
            x = sol.x.copy()
            for j in mbp.binary_idx:
                x[j] = round(x[j])
            best_x, best_obj = x, val
            trace.append(sgn * val)
            continue
        k = int(np.argmax(frac))  # ties to lowest index via argmax semantics
        j = mbp.binary_idx[k]
        v = int(round(sol.x[j]))
        # explore the rounded value first (pushed last)
        far = dict(fixed); far[j] = 1 - v
        near = dict(fixed); near[j] = v
        stack.append((val, far))
        stack.append((val, near))

    if best_x is None:
        if nodes >= opt.node_limit and stack:
            return MilpSolution(status="node_limit", nodes=nodes,
                                gap=float("inf"), incumbent_trace=trace)
        return MilpSolution(status="infeasible", nodes=nodes)
    remaining = max((e[0] for e in stack), default=-np.inf)
    gap = max(0.0, remaining - best_obj)
    status = "optimal" if not stack or gap <= opt.abs_gap else "node_limit"
    return MilpSolution(
        status=status, x=best_x, objective=float(sgn * best_obj),
        nodes=nodes, gap=gap, incumbent_trace=trace,
    )
