"""Problem, plan, and scaling data types plus problem-level transforms.

Two equivalent problem forms are supported.  The additive form carries a
weight matrix ``a`` and asks for a transport plan maximizing (or
minimizing) ``sum(a * x)`` under prescribed row and column sums.  The
multiplicative form carries strictly positive coefficients ``b`` and asks
for a balanced allocation, one linear objective per row.  The two are
linked entrywise by ``a = log(b)``, and a plan solves one problem exactly
when it solves the other.

All types are immutable value objects: arrays are copied on construction
and marked read-only, so instances can be shared freely across threads.
Indices in user-facing reports are 1-based; everything internal is
0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    GlobalFeasibilityViolation,
    LengthMismatch,
    NonFiniteEntry,
    NonPositiveCoefficient,
    NonPositiveEntry,
    NonPositiveMarginal,
    NonPositiveScale,
    NonPositiveWeight,
    Overflow,
    ValidationError,
)

#: Relative slack allowed between total row mass and total column mass.
FEASIBILITY_RTOL = 1e-10

MAXIMIZE = "maximize"
MINIMIZE = "minimize"


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise LengthMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _check_sense(sense: str) -> str:
    if sense not in (MAXIMIZE, MINIMIZE):
        raise ValidationError(f"sense must be '{MAXIMIZE}' or '{MINIMIZE}', got {sense!r}")
    return sense


@dataclass(frozen=True)
class OTProblem:
    """Discrete transport problem in additive (weight-matrix) form.

    ``weights[i, j]`` is the reward per unit of mass routed from row i to
    column j; it may be any finite real.  ``row_marginals`` and
    ``col_marginals`` are the prescribed row and column sums, both
    strictly positive with equal totals.
    """

    weights: np.ndarray
    row_marginals: np.ndarray
    col_marginals: np.ndarray
    sense: str = MAXIMIZE

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen_array(self.weights, 2, "weights"))
        object.__setattr__(self, "row_marginals", _frozen_array(self.row_marginals, 1, "row_marginals"))
        object.__setattr__(self, "col_marginals", _frozen_array(self.col_marginals, 1, "col_marginals"))
        _check_sense(self.sense)
        n, m = self.weights.shape
        if self.row_marginals.shape != (n,):
            raise LengthMismatch(f"row_marginals has length {self.row_marginals.shape[0]}, expected {n}")
        if self.col_marginals.shape != (m,):
            raise LengthMismatch(f"col_marginals has length {self.col_marginals.shape[0]}, expected {m}")

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class MOMAProblem:
    """Multi-objective allocation problem in multiplicative form.

    ``coefficients[i, j]`` is the strictly positive marginal reward of row
    objective i per unit allocated in column j.
    """

    coefficients: np.ndarray
    row_marginals: np.ndarray
    col_marginals: np.ndarray
    sense: str = MAXIMIZE

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _frozen_array(self.coefficients, 2, "coefficients"))
        object.__setattr__(self, "row_marginals", _frozen_array(self.row_marginals, 1, "row_marginals"))
        object.__setattr__(self, "col_marginals", _frozen_array(self.col_marginals, 1, "col_marginals"))
        _check_sense(self.sense)
        n, m = self.coefficients.shape
        if self.row_marginals.shape != (n,):
            raise LengthMismatch(f"row_marginals has length {self.row_marginals.shape[0]}, expected {n}")
        if self.col_marginals.shape != (m,):
            raise LengthMismatch(f"col_marginals has length {self.col_marginals.shape[0]}, expected {m}")

    @property
    def n(self) -> int:
        return self.coefficients.shape[0]

    @property
    def m(self) -> int:
        return self.coefficients.shape[1]


Problem = Union[OTProblem, MOMAProblem]


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative allocation matrix with marginal residual metadata.

    ``row_residual`` and ``col_residual`` are the worst absolute
    deviations of the plan's row and column sums from the marginals it
    was checked against.
    """

    values: np.ndarray
    row_residual: float
    col_residual: float

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, 2, "values"))

    @classmethod
    def against(cls, values, row_marginals, col_marginals) -> "TransportPlan":
        """Build a plan, computing residuals against the given marginals."""
        arr = np.array(values, dtype=float)
        r = np.asarray(row_marginals, dtype=float)
        c = np.asarray(col_marginals, dtype=float)
        if arr.shape != (r.shape[0], c.shape[0]):
            raise DimensionMismatch(
                f"plan shape {arr.shape} does not match marginals ({r.shape[0]}, {c.shape[0]})"
            )
        if np.any(arr < 0):
            i, j = np.unravel_index(int(np.argmax(arr < 0)), arr.shape)
            raise ValidationError(f"plan entry [{i + 1}, {j + 1}] = {arr[i, j]} is negative")
        row_res = float(np.max(np.abs(arr.sum(axis=1) - r)))
        col_res = float(np.max(np.abs(arr.sum(axis=0) - c)))
        return cls(arr, row_res, col_res)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def objective(self, problem: Problem) -> float:
        """Total additive value of the plan under the problem's weights."""
        a = additive_weights(problem)
        return float(np.sum(a * self.values))


@dataclass(frozen=True)
class Scalings:
    """Multiplicative weights alpha (rows) and dual variables beta (columns)."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen_array(self.alpha, 1, "alpha"))
        object.__setattr__(self, "beta", _frozen_array(self.beta, 1, "beta"))
        if not (np.all(self.alpha > 0) and np.all(self.beta > 0)):
            raise NonPositiveEntry("scalings must be strictly positive")
        if not (np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.beta))):
            raise NonFiniteEntry("scalings must be finite")

    def to_potentials(self) -> "DualPotentials":
        """Additive potentials: lambda = -log(alpha), mu = log(beta)."""
        return DualPotentials(-np.log(self.alpha), np.log(self.beta))


@dataclass(frozen=True)
class DualPotentials:
    """Additive dual potentials lambda (rows) and mu (columns)."""

    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lam", _frozen_array(self.lam, 1, "lam"))
        object.__setattr__(self, "mu", _frozen_array(self.mu, 1, "mu"))

    def to_scalings(self) -> Scalings:
        """Multiplicative form: alpha = exp(-lambda), beta = exp(mu)."""
        return Scalings(np.exp(-self.lam), np.exp(self.mu))

    def value(self, row_marginals, col_marginals) -> float:
        """Dual objective sum(lambda * r) + sum(mu * c)."""
        return float(np.dot(self.lam, row_marginals) + np.dot(self.mu, col_marginals))


@dataclass(frozen=True)
class TransformSpec:
    """Row weights p, column weights q, and a scale s, all positive."""

    row_weights: np.ndarray
    col_weights: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "row_weights", _frozen_array(self.row_weights, 1, "row_weights"))
        object.__setattr__(self, "col_weights", _frozen_array(self.col_weights, 1, "col_weights"))
        if not (np.all(self.row_weights > 0) and np.all(np.isfinite(self.row_weights))):
            raise NonPositiveWeight("row weights must be positive and finite")
        if not (np.all(self.col_weights > 0) and np.all(np.isfinite(self.col_weights))):
            raise NonPositiveWeight("column weights must be positive and finite")
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise NonPositiveScale(f"scale must be positive, got {self.scale}")

    def reciprocal(self) -> "TransformSpec":
        return TransformSpec(1.0 / self.row_weights, 1.0 / self.col_weights, 1.0 / self.scale)


@dataclass(frozen=True)
class ObjectiveReport:
    """Per-row objective values plus total additive and dual values."""

    per_row_values: np.ndarray
    total_ot_value: float
    dual_value: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "per_row_values", _frozen_array(self.per_row_values, 1, "per_row_values"))


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of validate_problem: ok, or the first violated invariant."""

    ok: bool
    error: Optional[ValidationError] = None

    def raise_if_invalid(self) -> None:
        if not self.ok:
            raise self.error


def validate_problem(problem: Problem) -> ValidationResult:
    """Check all type invariants, reporting the first violation found.

    Checks run in a fixed order: finiteness of every array, positivity of
    the marginals, positivity of multiplicative coefficients, and the
    global feasibility condition sum(r) == sum(c) up to a relative slack
    of ``FEASIBILITY_RTOL``.
    """
    if isinstance(problem, MOMAProblem):
        mat, mat_name = problem.coefficients, "coefficients"
    else:
        mat, mat_name = problem.weights, "weights"
    if not np.all(np.isfinite(mat)):
        return ValidationResult(False, NonFiniteEntry(f"{mat_name} contains non-finite entries"))
    for name, vec in (("row_marginals", problem.row_marginals), ("col_marginals", problem.col_marginals)):
        if not np.all(np.isfinite(vec)):
            return ValidationResult(False, NonFiniteEntry(f"{name} contains non-finite entries"))
        if not np.all(vec > 0):
            k = int(np.argmax(~(vec > 0)))
            return ValidationResult(
                False, NonPositiveMarginal(f"{name}[{k + 1}] = {vec[k]} is not positive")
            )
    if isinstance(problem, MOMAProblem) and not np.all(mat > 0):
        i, j = np.unravel_index(int(np.argmax(~(mat > 0))), mat.shape)
        return ValidationResult(
            False, NonPositiveCoefficient(f"coefficients[{i + 1}, {j + 1}] = {mat[i, j]} is not positive")
        )
    total_r = float(np.sum(problem.row_marginals))
    total_c = float(np.sum(problem.col_marginals))
    if abs(total_r - total_c) > FEASIBILITY_RTOL * max(total_r, total_c):
        return ValidationResult(
            False,
            GlobalFeasibilityViolation(
                f"total row mass {total_r!r} != total column mass {total_c!r}"
            ),
        )
    return ValidationResult(True, None)


def require_valid(problem: Problem) -> Problem:
    """Validate and return the problem, raising on the first violation."""
    validate_problem(problem).raise_if_invalid()
    return problem


def additive_weights(problem: Problem) -> np.ndarray:
    """The additive weight matrix of either problem form (log of b)."""
    if isinstance(problem, MOMAProblem):
        return np.log(problem.coefficients)
    return problem.weights


def ot_to_moma(problem: OTProblem) -> MOMAProblem:
    """Convert additive weights to multiplicative coefficients, b = exp(a)."""
    require_valid(problem)
    with np.errstate(over="ignore"):
        b = np.exp(problem.weights)
    if not np.all(np.isfinite(b)):
        i, j = np.unravel_index(int(np.argmax(~np.isfinite(b))), b.shape)
        raise Overflow(f"exp(weights[{i + 1}, {j + 1}]) = exp({problem.weights[i, j]}) overflows")
    return MOMAProblem(b, problem.row_marginals, problem.col_marginals, problem.sense)


def moma_to_ot(problem: MOMAProblem) -> OTProblem:
    """Convert multiplicative coefficients to additive weights, a = log(b)."""
    require_valid(problem)
    return OTProblem(np.log(problem.coefficients), problem.row_marginals, problem.col_marginals, problem.sense)


def unweight(problem: MOMAProblem, spec: TransformSpec) -> MOMAProblem:
    """Reduce a problem with weighted row/column sums to plain sums.

    The input is read as carrying constraints sum_i p_i x_ij = c_j and
    sum_j q_j x_ij = r_i.  Substituting xt_ij = p_i q_j x_ij yields an
    equivalent plain-sum problem with ct_j = q_j c_j, rt_i = p_i r_i, and
    bt_ij = b_ij / (p_i q_j), so each row objective keeps its value.  A
    plan xt is balanced for the output exactly when x = xt / (p q) is
    balanced for the input.
    """
    require_valid(problem)
    p = spec.row_weights
    q = spec.col_weights
    if p.shape[0] != problem.n or q.shape[0] != problem.m:
        raise LengthMismatch(
            f"transform weights ({p.shape[0]}, {q.shape[0]}) do not match problem ({problem.n}, {problem.m})"
        )
    b = problem.coefficients / (p[:, None] * q[None, :])
    return MOMAProblem(b, p * problem.row_marginals, q * problem.col_marginals, problem.sense)


def map_plan_from_unweighted(plan_values: np.ndarray, spec: TransformSpec) -> np.ndarray:
    """Pull a plan of the unweighted problem back: x = xt / (p_i q_j)."""
    return np.asarray(plan_values, dtype=float) / (
        spec.row_weights[:, None] * spec.col_weights[None, :]
    )


def conjugate_linear(problem: MOMAProblem) -> MOMAProblem:
    """Swap maximization and minimization by inverting the coefficients.

    The balanced-solution sets of input and output coincide.
    """
    require_valid(problem)
    flipped = MINIMIZE if problem.sense == MAXIMIZE else MAXIMIZE
    return MOMAProblem(1.0 / problem.coefficients, problem.row_marginals, problem.col_marginals, flipped)


def rescale(problem: MOMAProblem, scale: float) -> MOMAProblem:
    """Divide both marginal vectors by ``scale`` (> 0).

    X is balanced for the input exactly when X / scale is balanced for
    the output; coefficients are unchanged.
    """
    if not (scale > 0 and np.isfinite(scale)):
        raise NonPositiveScale(f"scale must be positive, got {scale}")
    require_valid(problem)
    return MOMAProblem(
        problem.coefficients,
        problem.row_marginals / scale,
        problem.col_marginals / scale,
        problem.sense,
    )


@dataclass(frozen=True)
class MongeCheckResult:
    """Outcome of the 2x2-minor inequality scan (1-based indices)."""

    is_monge: bool
    first_violation: Optional[tuple] = None

    def __bool__(self) -> bool:
        return self.is_monge


def monge_check(problem: Problem) -> MongeCheckResult:
    """Test the inequality a[i1,j1] + a[i2,j2] >= a[i1,j2] + a[i2,j1].

    Required of every quadruple i1 < i2, j1 < j2 for maximization (for
    minimization the inequality is reversed).  Comparisons are exact:
    ties satisfy the inequality.  On failure the lexicographically first
    violating quadruple (i1, i2, j1, j2) is reported, 1-based.  For the
    multiplicative form this is equivalent to nonnegativity of all 2x2
    determinants of the coefficient matrix.
    """
    require_valid(problem)
    a = additive_weights(problem)
    if problem.sense == MINIMIZE:
        a = -a
    n, m = a.shape
    # Adjacent minors decide the property; scan all quadruples only when
    # a violation exists, to locate the lexicographically first one.
    adjacent_ok = np.all(a[:-1, :-1] + a[1:, 1:] >= a[:-1, 1:] + a[1:, :-1])
    if adjacent_ok:
        return MongeCheckResult(True, None)
    for i1 in range(n - 1):
        for i2 in range(i1 + 1, n):
            for j1 in range(m - 1):
                for j2 in range(j1 + 1, m):
                    if a[i1, j1] + a[i2, j2] < a[i1, j2] + a[i2, j1]:
                        return MongeCheckResult(False, (i1 + 1, i2 + 1, j1 + 1, j2 + 1))
    return MongeCheckResult(True, None)


def objective_report(
    problem: Problem, plan: TransportPlan, duals: Optional[DualPotentials] = None
) -> ObjectiveReport:
    """Per-row objective values and totals for a plan (and optional duals)."""
    if isinstance(problem, MOMAProblem):
        b = problem.coefficients
    else:
        with np.errstate(over="ignore"):
            b = np.exp(problem.weights)
        if not np.all(np.isfinite(b)):
            raise Overflow("weights too large to form multiplicative objectives")
    per_row = (b * plan.values).sum(axis=1)
    total = plan.objective(problem)
    dual_value = None
    if duals is not None:
        dual_value = duals.value(problem.row_marginals, problem.col_marginals)
    return ObjectiveReport(per_row, total, dual_value)
