"""Dense revised-simplex LP solver with dual extraction.

All constraint rows are normalized to <= internally (equalities are
split into two rows) so a single pricing/dual code path suffices.
Variables carry explicit lower/upper bounds, either possibly infinite.
Anti-cycling: Dantzig pricing switches to Bland's rule after a streak
of degenerate pivots.

Dual sign convention is the shadow price d(objective)/d(rhs) in the
problem's own sense, so a binding <= row of a max problem has a
nonnegative dual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LinearProgram",
    "LpSolution",
    "Tolerances",
    "solve_lp",
    "check_lp_solution",
]

_AT_LB = 0
_AT_UB = 1
_FREE = 2
_BASIC = 3


@dataclass
class Tolerances:
    feas_tol: float = 1e-8
    duality_tol: float = 1e-7
    comp_tol: float = 1e-7
    pivot_tol: float = 1e-9
    # reduced-cost threshold for entering candidates
    dj_tol: float = 1e-9


@dataclass
class LinearProgram:
    sense: str  # "max" | "min"
    c: np.ndarray
    A: np.ndarray  # (m, n)
    senses: list[str]  # per row: "<=", "=", ">="
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        m, n = self.A.shape
        if not (len(self.c) == n == len(self.lb) == len(self.ub)):
            raise ValueError("inconsistent column dimensions")
        if not (len(self.b) == m == len(self.senses)):
            raise ValueError("inconsistent row dimensions")
        if self.sense not in ("max", "min"):
            raise ValueError(f"bad sense {self.sense!r}")
        for s in self.senses:
            if s not in ("<=", "=", ">="):
                raise ValueError(f"bad row comparator {s!r}")
        for arr in (self.c, self.A, self.b):
            if not np.all(np.isfinite(arr)):
                raise ValueError("nonfinite problem data")


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | stalled
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0


class _Simplex:
    """Bounded-variable revised simplex on min c'x, Ax <= b, l <= x <= u."""

    def __init__(self, c, A, b, lb, ub, tol: Tolerances):
        m, n = A.shape
        self.m, self.n = m, n
        self.tol = tol
        # columns: n structural, m slacks
        self.A = np.hstack([A, np.eye(m)])
        self.c = np.concatenate([c, np.zeros(m)])
        self.lb = np.concatenate([lb, np.zeros(m)])
        self.ub = np.concatenate([ub, np.full(m, np.inf)])
        self.b = b.copy()
        self.n_art = 0
        self.iterations = 0

    # -- state helpers ------------------------------------------------

    def _nonbasic_value(self, j):
        s = self.status[j]
        if s == _AT_LB:
            return self.lb[j]
        if s == _AT_UB:
            return self.ub[j]
        return 0.0

    def _values(self):
        x = np.empty(self.A.shape[1])
        for j in range(len(x)):
            x[j] = self._nonbasic_value(j)
        x[self.basis] = self.x_b
        return x

    def _refactor(self):
        B = self.A[:, self.basis]
        self.B_inv = np.linalg.inv(B)
        x_n = np.array(
            [0.0 if self.status[j] == _BASIC else self._nonbasic_value(j)
             for j in range(self.A.shape[1])]
        )
        self.x_b = self.B_inv @ (self.b - self.A @ x_n)

    def setup(self):
        """Initial basis from slacks; artificials cover rows whose slack
        would start negative."""
        m, n = self.m, self.n
        self.status = np.full(self.A.shape[1], _AT_LB, dtype=np.int8)
        for j in range(n):
            if np.isfinite(self.lb[j]):
                self.status[j] = _AT_LB
            elif np.isfinite(self.ub[j]):
                self.status[j] = _AT_UB
            else:
                self.status[j] = _FREE
        x_n = np.array([self._nonbasic_value(j) for j in range(n)])
        s0 = self.b - self.A[:, :n] @ x_n
        bad = np.where(s0 < -self.tol.feas_tol)[0]
        if len(bad):
            art = np.zeros((m, len(bad)))
            for k, i in enumerate(bad):
                art[i, k] = -1.0
            self.A = np.hstack([self.A, art])
            self.c = np.concatenate([self.c, np.zeros(len(bad))])
            self.lb = np.concatenate([self.lb, np.zeros(len(bad))])
            self.ub = np.concatenate([self.ub, np.full(len(bad), np.inf)])
            self.status = np.concatenate(
                [self.status, np.full(len(bad), _AT_LB, dtype=np.int8)]
            )
            self.n_art = len(bad)
        self.basis = np.arange(n, n + m)
        for k, i in enumerate(bad):
            self.basis[i] = n + m + k
        self.status[self.basis] = _BASIC
        self._refactor()

    # -- core loop ----------------------------------------------------

    def _iterate(self, c, max_iter):
        """Run simplex to optimality for cost vector c.

        Returns "optimal", "unbounded" or "stalled".
        """
        tol = self.tol
        degen_streak = 0
        bland = False
        since_refactor = 0
        while True:
            if self.iterations >= max_iter:
                return "stalled"
            self.iterations += 1
            since_refactor += 1
            if since_refactor >= 120:
                self._refactor()
                since_refactor = 0

            y = c[self.basis] @ self.B_inv
            d = c - y @ self.A
            d[self.basis] = 0.0

            # entering candidates and their improvement rates
            at_lb = self.status == _AT_LB
            at_ub = self.status == _AT_UB
            free = self.status == _FREE
            score = np.zeros_like(d)
            score[at_lb] = -d[at_lb]
            score[at_ub] = d[at_ub]
            score[free] = np.abs(d[free])
            eligible = score > tol.dj_tol
            if not np.any(eligible):
                return "optimal"
            if bland:
                e = int(np.flatnonzero(eligible)[0])
            else:
                e = int(np.argmax(score))
            direction = 1.0
            if self.status[e] == _AT_UB or (self.status[e] == _FREE and d[e] > 0):
                direction = -1.0

            w = self.B_inv @ self.A[:, e]
            step_basic = w * direction  # basic values move by -step_basic * theta

            # ratio test
            theta = np.inf
            leave = -1
            leave_to = _AT_LB
            lb_b = self.lb[self.basis]
            ub_b = self.ub[self.basis]
            dec = step_basic > tol.pivot_tol  # basic decreases toward lb
            inc = step_basic < -tol.pivot_tol  # basic increases toward ub
            with np.errstate(invalid="ignore"):
                lim_dec = np.where(
                    dec & np.isfinite(lb_b), (self.x_b - lb_b) / np.where(dec, step_basic, 1.0), np.inf
                )
                lim_inc = np.where(
                    inc & np.isfinite(ub_b), (ub_b - self.x_b) / np.where(inc, -step_basic, 1.0), np.inf
                )
            lims = np.minimum(lim_dec, lim_inc)
            lims = np.maximum(lims, 0.0)
            k = int(np.argmin(lims)) if self.m else -1
            if k >= 0 and lims[k] < theta:
                theta = lims[k]
                leave = k
                leave_to = _AT_LB if lim_dec[k] <= lim_inc[k] else _AT_UB
            # entering variable hitting its own far bound
            own_range = self.ub[e] - self.lb[e]
            flip = False
            if np.isfinite(own_range) and own_range < theta - tol.pivot_tol:
                theta = own_range
                flip = True
            if not np.isfinite(theta):
                return "unbounded"

            if theta <= tol.pivot_tol:
                degen_streak += 1
                if degen_streak > 40:
                    bland = True
            else:
                degen_streak = 0
                bland = False

            self.x_b = self.x_b - step_basic * theta
            if flip:
                self.status[e] = _AT_UB if self.status[e] == _AT_LB else _AT_LB
                continue

            # pivot: e enters, basis[leave] leaves
            enter_val = self._nonbasic_value(e) + direction * theta
            out = self.basis[leave]
            self.status[out] = leave_to if np.isfinite(
                self.lb[out] if leave_to == _AT_LB else self.ub[out]
            ) else _FREE
            self.basis[leave] = e
            self.status[e] = _BASIC
            # eta update of B_inv
            piv = w[leave]
            if abs(piv) < 1e-11:
                self._refactor()
            else:
                row = self.B_inv[leave] / piv
                self.B_inv -= np.outer(w, row)
                self.B_inv[leave] = row
            self.x_b[leave] = enter_val

    def solve(self, max_iter):
        self.setup()
        if self.n_art:
            phase1_c = np.zeros(self.A.shape[1])
            phase1_c[-self.n_art:] = 1.0
            st = self._iterate(phase1_c, max_iter)
            if st != "optimal":
                return st
            art_idx = np.arange(self.A.shape[1] - self.n_art, self.A.shape[1])
            infeas = float(np.sum(self._values()[art_idx]))
            if infeas > 1e-7:
                return "infeasible"
            # pin artificials at zero for phase 2
            self.ub[art_idx] = 0.0
            self.x_b[np.isin(self.basis, art_idx)] = 0.0
        st = self._iterate(self.c, max_iter)
        return st

    def extract(self):
        x_all = self._values()
        y = self.c[self.basis] @ self.B_inv
        d = self.c - y @ self.A
        return x_all[: self.n], y, d[: self.n + self.m]


def solve_lp(lp: LinearProgram, tol: Tolerances | None = None,
             max_iter: int | None = None) -> LpSolution:
    """Solve an LP to optimality with primal and per-row dual values.

    Iteration-limit exhaustion yields status "stalled", never a wrong
    answer.
    """
    tol = tol or Tolerances()
    m, n = lp.A.shape

    # normalize: min sense, all rows <=; remember the original row each
    # internal row came from and with what orientation.
    c = lp.c.copy() if lp.sense == "min" else -lp.c
    rows = []
    row_map: list[tuple[int, float]] = []  # (orig_row, sign on dual)
    rhs = []
    for i in range(m):
        if lp.senses[i] == "<=":
            rows.append(lp.A[i])
            rhs.append(lp.b[i])
            row_map.append((i, 1.0))
        elif lp.senses[i] == ">=":
            rows.append(-lp.A[i])
            rhs.append(-lp.b[i])
            row_map.append((i, -1.0))
        else:  # "=" split into <= pair
            rows.append(lp.A[i])
            rhs.append(lp.b[i])
            row_map.append((i, 1.0))
            rows.append(-lp.A[i])
            rhs.append(-lp.b[i])
            row_map.append((i, -1.0))
    A_in = np.array(rows, dtype=float) if rows else np.zeros((0, n))
    b_in = np.array(rhs, dtype=float)

    if max_iter is None:
        max_iter = 20000 + 60 * (len(b_in) + n)

    sx = _Simplex(c, A_in, b_in, lp.lb.copy(), lp.ub.copy(), tol)
    status = sx.solve(max_iter)
    if status == "infeasible":
        return LpSolution(status="infeasible", iterations=sx.iterations)
    if status == "unbounded":
        return LpSolution(status="unbounded", iterations=sx.iterations)
    if status == "stalled":
        return LpSolution(status="stalled", iterations=sx.iterations)

    x, y_int, d = sx.extract()
    # a numerically degraded basis must never surface as "optimal":
    # verify the reported point actually satisfies bounds and rows.
    scale = 1.0 + float(np.max(np.abs(b_in), initial=0.0)) + float(
        np.max(np.abs(x), initial=0.0)
    )
    guard = 1e4 * tol.feas_tol * scale
    if (
        np.any(x < lp.lb - guard)
        or np.any(x > lp.ub + guard)
        or (len(b_in) and float(np.max(A_in @ x - b_in, initial=0.0)) > guard)
    ):
        return LpSolution(status="stalled", iterations=sx.iterations)
    # internal duals are shadow prices of the min problem on <= rows
    # (nonpositive); fold split rows back and convert to problem sense.
    duals = np.zeros(m)
    for k, (i, sgn) in enumerate(row_map):
        duals[i] += sgn * y_int[k]
    rcosts = d[:n]
    if lp.sense == "max":
        duals = -duals
        rcosts = -rcosts
    obj = float(lp.c @ x)
    return LpSolution(
        status="optimal",
        x=x,
        duals=duals,
        objective=obj,
        reduced_costs=rcosts,
        iterations=sx.iterations,
    )


def check_lp_solution(lp: LinearProgram, sol: LpSolution,
                      tol: Tolerances | None = None) -> None:
    """Assert primal feasibility, dual feasibility, complementary
    slackness and strong duality of an optimal solution.

    Raises AssertionError with the violated quantity.
    """
    tol = tol or Tolerances()
    assert sol.status == "optimal", f"status {sol.status}"
    x, y = sol.x, sol.duals
    scale = 1.0 + float(np.max(np.abs(lp.b), initial=0.0)) + float(
        np.max(np.abs(x), initial=0.0)
    )
    row_act = lp.A @ x
    sgn = 1.0 if lp.sense == "max" else -1.0
    # primal feasibility
    for i, s in enumerate(lp.senses):
        r = row_act[i] - lp.b[i]
        if s == "<=":
            assert r <= tol.feas_tol * scale, f"row {i} violated by {r}"
        elif s == ">=":
            assert r >= -tol.feas_tol * scale, f"row {i} violated by {-r}"
        else:
            assert abs(r) <= tol.feas_tol * scale, f"row {i} violated by {abs(r)}"
    assert np.all(x >= lp.lb - tol.feas_tol * scale), "lower bound violated"
    assert np.all(x <= lp.ub + tol.feas_tol * scale), "upper bound violated"
    # dual sign feasibility: for max, <= rows carry y >= 0, >= rows y <= 0
    for i, s in enumerate(lp.senses):
        if s == "<=":
            assert sgn * y[i] >= -tol.comp_tol * scale, f"dual sign row {i}"
        elif s == ">=":
            assert sgn * y[i] <= tol.comp_tol * scale, f"dual sign row {i}"
    # reduced costs and bound multipliers
    rc = lp.c - y @ lp.A
    for j in range(len(x)):
        at_lb = np.isfinite(lp.lb[j]) and x[j] <= lp.lb[j] + tol.comp_tol * scale
        at_ub = np.isfinite(lp.ub[j]) and x[j] >= lp.ub[j] - tol.comp_tol * scale
        if at_lb and at_ub:
            continue
        if at_lb:
            assert sgn * rc[j] <= tol.comp_tol * scale, f"reduced cost sign col {j}"
        elif at_ub:
            assert sgn * rc[j] >= -tol.comp_tol * scale, f"reduced cost sign col {j}"
        else:
            assert abs(rc[j]) <= tol.comp_tol * scale, f"interior reduced cost col {j}"
    # complementary slackness on rows
    for i, s in enumerate(lp.senses):
        if s != "=":
            slack = lp.b[i] - row_act[i]
            assert abs(y[i] * slack) <= tol.comp_tol * scale * (
                1.0 + abs(y[i])
            ), f"complementarity row {i}"
    # strong duality via independently assembled dual objective
    lam_hi = np.where(np.isfinite(lp.ub), np.maximum(sgn * rc, 0.0), 0.0)
    lam_lo = np.where(np.isfinite(lp.lb), np.maximum(-sgn * rc, 0.0), 0.0)
    lo = np.where(np.isfinite(lp.lb), lp.lb, 0.0)
    hi = np.where(np.isfinite(lp.ub), lp.ub, 0.0)
    dual_obj = float(y @ lp.b + sgn * (lam_hi @ hi - lam_lo @ lo))
    gap = abs(sol.objective - dual_obj)
    assert gap <= tol.duality_tol * scale * (
        1.0 + abs(sol.objective)
    ), f"duality gap {gap}"
