"""Ground truth and certification: Hilbert metric, dual recovery, balance
verification, an exact desk-scale LP oracle, and the greedy allocator.

A plan is balanced exactly when positive weights alpha and dual variables
beta exist with alpha_i b_ij <= beta_j everywhere and equality wherever
the plan is positive, together with both marginal constraints.  In
additive form this is complementary slackness for the transport dual:
lambda_i + mu_j >= a_ij with equality on the support.  All checks here
run in the additive domain for numerical range, and all reported
violations are relative (multiplicative) deviations.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import (
    DimensionMismatch,
    InconsistentSupport,
    LengthMismatch,
    NonPositiveEntry,
    SizeGuardExceeded,
    ValidationError,
)
from .model import (
    MAXIMIZE,
    MINIMIZE,
    DualPotentials,
    ObjectiveReport,
    Problem,
    TransportPlan,
    additive_weights,
    objective_report,
    require_valid,
)

#: Plan entries above this fraction of the largest entry count as support.
SUPPORT_RTOL = 1e-10

#: Relative tolerance for every balance-verification field.
KKT_RTOL = 1e-8

#: Reduced-cost optimality tolerance of the exact oracle.
ORACLE_OPT_TOL = 1e-11

#: Default cell-count guard of the exact oracle; the environment variable
#: BT_MAX_ORACLE_CELLS overrides it.
ORACLE_CELL_GUARD = 10_000


def hilbert_distance(x: np.ndarray, y: np.ndarray) -> float:
    """log(max_i(x_i/y_i) / min_i(x_i/y_i)) for positive vectors.

    A pseudo-metric on the positive cone: symmetric, satisfies the
    triangle inequality, and vanishes exactly on proportional pairs.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"vectors must share one length, got {x.shape} and {y.shape}")
    if not (np.all(x > 0) and np.all(y > 0)):
        raise NonPositiveEntry("Hilbert distance requires strictly positive vectors")
    ratios = x / y
    return float(np.log(np.max(ratios) / np.min(ratios)))


def support_mask(plan_values: np.ndarray, rtol: float = SUPPORT_RTOL) -> np.ndarray:
    """Entries larger than rtol times the largest entry."""
    values = np.asarray(plan_values, dtype=float)
    return values > rtol * np.max(values) if np.max(values) > 0 else np.zeros_like(values, dtype=bool)


def _support_tree(values: np.ndarray, mask: np.ndarray):
    """Maximum-mass spanning forest of the bipartite support graph.

    Returns (tree adjacency per node, non-tree support edges in
    descending-mass order).  Nodes 0..n-1 are rows, n..n+m-1 columns.
    Heavier entries anchor the duals, so contradictions surface at the
    lightest inconsistent cells.
    """
    n, m = values.shape
    cells = [(i, j) for i in range(n) for j in range(m) if mask[i, j]]
    cells.sort(key=lambda ij: (-values[ij], ij))
    parent = list(range(n + m))

    def find(u: int) -> int:
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    adjacency: List[List[Tuple[int, int, int]]] = [[] for _ in range(n + m)]
    non_tree: List[Tuple[int, int]] = []
    for i, j in cells:
        ru, rv = find(i), find(n + j)
        if ru == rv:
            non_tree.append((i, j))
        else:
            parent[ru] = rv
            adjacency[i].append((n + j, i, j))
            adjacency[n + j].append((i, i, j))
    return adjacency, non_tree


def recover_duals(
    problem: Problem,
    plan: TransportPlan,
    strict: bool = True,
    rtol: float = KKT_RTOL,
) -> DualPotentials:
    """Potentials with lambda_i + mu_j = a_ij across the plan's support.

    The support graph is traversed along a maximum-mass spanning forest,
    anchoring lambda = 0 at the lowest-indexed row of each component.
    Rows or columns without support get the tightest dual-feasible value.
    With ``strict`` set, a support cell whose potentials disagree with
    its weight beyond ``rtol`` raises InconsistentSupport, certifying
    that the plan is not optimal.
    """
    require_valid(problem)
    a = additive_weights(problem)
    n, m = a.shape
    if plan.values.shape != (n, m):
        raise DimensionMismatch(f"plan shape {plan.values.shape} does not match problem ({n}, {m})")
    mask = support_mask(plan.values)
    adjacency, non_tree = _support_tree(plan.values, mask)
    lam = np.full(n, np.nan)
    mu = np.full(m, np.nan)
    for root in range(n):  # lowest-indexed row of each component anchors it
        if not np.isnan(lam[root]) or not adjacency[root]:
            continue
        lam[root] = 0.0
        stack = [root]
        while stack:
            node = stack.pop()
            for other, i, j in adjacency[node]:
                if node < n:  # row -> column
                    if np.isnan(mu[j]):
                        mu[j] = a[i, j] - lam[i]
                        stack.append(other)
                else:  # column -> row
                    if np.isnan(lam[i]):
                        lam[i] = a[i, j] - mu[j]
                        stack.append(other)
    # Tightest feasible values for unsupported columns, then rows.
    sense_max = problem.sense == MAXIMIZE
    assigned = ~np.isnan(lam)
    if not np.any(assigned):
        lam[:] = 0.0
        assigned = ~np.isnan(lam)
    for j in range(m):
        if np.isnan(mu[j]):
            gaps = a[assigned, j] - lam[assigned]
            mu[j] = np.max(gaps) if sense_max else np.min(gaps)
    for i in range(n):
        if np.isnan(lam[i]):
            gaps = a[i, :] - mu
            lam[i] = np.max(gaps) if sense_max else np.min(gaps)
    if strict:
        scale = max(1.0, float(np.max(np.abs(a))))
        for i, j in non_tree:
            gap = a[i, j] - lam[i] - mu[j]
            if abs(gap) > rtol * scale:
                raise InconsistentSupport(
                    f"support entry ({i + 1}, {j + 1}) forces contradictory potentials"
                    f" (residual {gap:.3e}); the plan is not optimal",
                    entry=(i + 1, j + 1),
                )
    return DualPotentials(lam, mu)


@dataclass(frozen=True)
class KKTReport:
    """Balance certificate for one plan (all violation fields relative)."""

    is_balanced: bool
    max_slackness_violation: float
    max_dual_infeasibility: float
    marginal_residuals: Tuple[float, float]
    objectives: ObjectiveReport
    duality_gap: float


def verify_balanced(
    problem: Problem,
    plan: TransportPlan,
    duals: Optional[DualPotentials] = None,
    rtol: float = KKT_RTOL,
) -> KKTReport:
    """Check the balance (complementary-slackness) conditions of a plan.

    Verifies, relative to ``rtol``: equality alpha_i b_ij = beta_j on the
    support, the dual inequality off the support (direction set by the
    problem's sense), and both marginal constraints.  When no duals are
    passed they are recovered from the support (non-strictly, so that an
    inconsistent support shows up as a slackness violation rather than an
    exception).  The duality gap is dual value minus primal value for
    maximization and the negative of that for minimization.
    """
    require_valid(problem)
    a = additive_weights(problem)
    n, m = a.shape
    if plan.values.shape != (n, m):
        raise DimensionMismatch(f"plan shape {plan.values.shape} does not match problem ({n}, {m})")
    if np.any(plan.values < 0):
        raise ValidationError("plan contains negative entries")
    if duals is None:
        duals = recover_duals(problem, plan, strict=False, rtol=rtol)
    mask = support_mask(plan.values)
    gap_matrix = a - duals.lam[:, None] - duals.mu[None, :]  # log(alpha b / beta)
    if problem.sense == MINIMIZE:
        gap_matrix = -gap_matrix
    slack = float(np.max(np.abs(np.expm1(gap_matrix[mask])))) if np.any(mask) else 0.0
    off = ~mask
    infeas = float(np.max(np.clip(np.expm1(gap_matrix[off]), 0.0, None))) if np.any(off) else 0.0
    row_res = float(np.max(np.abs(plan.values.sum(axis=1) / problem.row_marginals - 1.0)))
    col_res = float(np.max(np.abs(plan.values.sum(axis=0) / problem.col_marginals - 1.0)))
    objectives = objective_report(problem, plan, duals)
    primal = objectives.total_ot_value
    dual_value = objectives.dual_value
    gap = dual_value - primal if problem.sense == MAXIMIZE else primal - dual_value
    balanced = slack <= rtol and infeas <= rtol and row_res <= rtol and col_res <= rtol
    return KKTReport(
        is_balanced=bool(balanced),
        max_slackness_violation=slack,
        max_dual_infeasibility=infeas,
        marginal_residuals=(row_res, col_res),
        objectives=objectives,
        duality_gap=float(gap),
    )


def greedy_northwest(problem: Problem) -> TransportPlan:
    """Northwest-corner allocation, scanning rows and columns in order.

    x_ij = min(remaining row mass, remaining column mass).  Ignores the
    weights entirely; optimal exactly on problems passing monge_check.
    """
    require_valid(problem)
    x, _ = _northwest_basis(problem.row_marginals, problem.col_marginals)
    return TransportPlan.against(x, problem.row_marginals, problem.col_marginals)


@dataclass(frozen=True)
class OracleResult:
    """Exact optimum with its certificate ingredients.

    ``min_offbasis_reduced_cost`` is the smallest reduced cost over
    nonbasic cells at the final basis (in the internal minimization
    form); a strictly positive value certifies that the optimal plan is
    unique.
    """

    plan: TransportPlan
    objective: float
    duals: DualPotentials
    min_offbasis_reduced_cost: float
    pivots: int

    def is_unique(self, threshold: float = 1e-9) -> bool:
        return self.min_offbasis_reduced_cost > threshold


def _oracle_cell_guard() -> int:
    env = os.environ.get("BT_MAX_ORACLE_CELLS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"BT_MAX_ORACLE_CELLS must be an integer, got {env!r}")
    return ORACLE_CELL_GUARD


def _northwest_basis(r: np.ndarray, c: np.ndarray):
    """Northwest-corner start: allocations plus exactly n+m-1 basic cells."""
    n, m = r.shape[0], c.shape[0]
    x = np.zeros((n, m))
    basis: List[Tuple[int, int]] = []
    rr = r.copy()
    cc = c.copy()
    i = j = 0
    while True:
        q = min(rr[i], cc[j])
        x[i, j] = q
        basis.append((i, j))
        rr[i] -= q
        cc[j] -= q
        if i == n - 1 and j == m - 1:
            break
        if rr[i] == 0 and i < n - 1:
            i += 1
        elif cc[j] == 0 and j < m - 1:
            j += 1
        elif i < n - 1:
            i += 1
        else:
            j += 1
    return x, basis


def lp_oracle(problem: Problem) -> OracleResult:
    """Exact optimal basic plan via the transportation simplex.

    Northwest-corner start, Bland's smallest-index entering/leaving rule
    for anti-cycling, reduced-cost optimality tolerance ORACLE_OPT_TOL.
    Guarded to n*m <= BT_MAX_ORACLE_CELLS (default 10^4) because the
    dense tableau walk is meant for desk-scale certification, not bulk
    solving.  Minimization is handled by negating weights internally;
    the reported objective and duals are in the caller's sense.
    """
    require_valid(problem)
    a = additive_weights(problem)
    n, m = a.shape
    guard = _oracle_cell_guard()
    if n * m > guard:
        raise SizeGuardExceeded(f"problem has {n * m} cells, above the oracle guard {guard}")
    r = problem.row_marginals
    c = problem.col_marginals
    # Internal form: minimize cost over the transportation polytope.
    cost = -a if problem.sense == MAXIMIZE else a

    x, basis_list = _northwest_basis(r, c)
    basis = set(basis_list)
    max_pivots = 10 * (n + m) * n * m + 1000  # Bland terminates well before this
    pivots = 0
    u = np.zeros(n)
    v = np.zeros(m)
    while True:
        # Duals from the basis tree: u_i + v_j = cost_ij on basic cells.
        rows_of: List[List[int]] = [[] for _ in range(n)]
        cols_of: List[List[int]] = [[] for _ in range(m)]
        for bi, bj in basis:
            rows_of[bi].append(bj)
            cols_of[bj].append(bi)
        u.fill(np.nan)
        v.fill(np.nan)
        u[0] = 0.0
        stack = [("r", 0)]
        while stack:
            kind, k = stack.pop()
            if kind == "r":
                for j in rows_of[k]:
                    if np.isnan(v[j]):
                        v[j] = cost[k, j] - u[k]
                        stack.append(("c", j))
            else:
                for i in cols_of[k]:
                    if np.isnan(u[i]):
                        u[i] = cost[i, k] - v[k]
                        stack.append(("r", i))
        if np.any(np.isnan(u)) or np.any(np.isnan(v)):
            raise ValidationError("basis graph is not a spanning tree")  # internal invariant

        reduced = cost - u[:, None] - v[None, :]
        entering = None
        for i in range(n):  # Bland: smallest (i, j) with negative reduced cost
            row = reduced[i]
            for j in range(m):
                if row[j] < -ORACLE_OPT_TOL and (i, j) not in basis:
                    entering = (i, j)
                    break
            if entering:
                break
        if entering is None:
            break

        # The unique cycle: path between the entering cell's row and column
        # through the basis tree, alternating row and column nodes.
        target = n + entering[1]
        parent_edge = {entering[0]: None}
        stack = [entering[0]]
        adjacency: List[List[Tuple[int, Tuple[int, int]]]] = [[] for _ in range(n + m)]
        for bi, bj in basis:
            adjacency[bi].append((n + bj, (bi, bj)))
            adjacency[n + bj].append((bi, (bi, bj)))
        while stack:
            node = stack.pop()
            if node == target:
                break
            for other, edge in adjacency[node]:
                if other not in parent_edge:
                    parent_edge[other] = (node, edge)
                    stack.append(other)
        if target not in parent_edge:
            raise ValidationError("entering cell closes no cycle")  # internal invariant
        path_cells: List[Tuple[int, int]] = []
        node = target
        while parent_edge[node] is not None:
            node, edge = parent_edge[node]
            path_cells.append(edge)
        # Orientation: entering gets +, then alternate along the path
        # starting from the column side of the entering cell.
        cycle = [entering] + path_cells[::-1]
        minus_cells = cycle[1::2]
        theta = min(x[cell] for cell in minus_cells)
        leaving = min(cell for cell in minus_cells if x[cell] == theta)
        for k, cell in enumerate(cycle):
            x[cell] = x[cell] + theta if k % 2 == 0 else x[cell] - theta
        x[leaving] = 0.0
        basis.remove(leaving)
        basis.add(entering)
        pivots += 1
        if pivots > max_pivots:
            raise ValidationError("pivot budget exhausted; this should be unreachable with Bland's rule")

    np.clip(x, 0.0, None, out=x)
    off_mask = np.ones((n, m), dtype=bool)
    for cell in basis:
        off_mask[cell] = False
    min_off = float(np.min(reduced[off_mask])) if np.any(off_mask) else np.inf
    if problem.sense == MAXIMIZE:
        lam, mu = -u, -v
    else:
        lam, mu = u.copy(), v.copy()
    plan = TransportPlan.against(x, r, c)
    objective = plan.objective(problem)
    return OracleResult(
        plan=plan,
        objective=objective,
        duals=DualPotentials(lam, mu),
        min_offbasis_reduced_cost=min_off,
        pivots=pivots,
    )
