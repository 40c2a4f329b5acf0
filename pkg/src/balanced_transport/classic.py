"""Non-regularized scaling map, plain IPFP in both forms, and the general
concave marginal-inverse iteration.

The non-regularized map is the eta -> 0 limit of the regularized update:
column maxima replace column norms and row minima replace row norms.  It
reaches a fixed point after a single application but has many fixed
points, none of which determines a plan, which is why regularization is
needed in the first place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import (
    DivisionDegeneracy,
    LengthMismatch,
    MaxItersExceeded,
    NonPositiveEntry,
    RootBracketFailure,
    ValidationError,
    ZeroLine,
)
from .model import DualPotentials

#: Default relative fixed-point tolerance for eigenvalue reports.
FIXED_POINT_RTOL = 1e-6

#: Cycle detection: no 10% improvement of the running-minimum column error
#: over this many consecutive iterations, while the error stays above
#: CYCLE_ERROR_FLOOR, is declared cycling.
CYCLE_WINDOW = 200
CYCLE_IMPROVEMENT = 0.9
CYCLE_ERROR_FLOOR = 1e-6


def nonreg_step(alpha: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """One application of the max/min update.

    beta_j = max_i alpha_i b_ij (the column maxima of the row-scaled
    matrix) and alpha_hat_i = min_j beta_j / b_ij, i.e. each row is
    rescaled by the smallest factor that makes it reach some column
    maximum.  Column maxima are unchanged, and a second application
    reproduces the first up to a couple of ulps.
    """
    alpha = np.asarray(alpha, dtype=float)
    b = np.asarray(b, dtype=float)
    if not np.all(alpha > 0):
        raise NonPositiveEntry("alpha must be strictly positive")
    if not np.all(b > 0):
        raise NonPositiveEntry("matrix must be strictly positive")
    scaled = alpha[:, None] * b
    beta = np.max(scaled, axis=0)
    # Relative form: ratios beta_j / (alpha_i b_ij) are >= 1 exactly, so a
    # state whose rows already touch their column maxima is a bitwise
    # fixed point.
    rho = np.min(beta[None, :] / scaled, axis=1)
    return alpha * rho, beta


@dataclass(frozen=True)
class FixedPointReport:
    """Eigenvalue estimate for one update alpha -> alpha_hat."""

    theta: float
    is_fixed_point: bool
    component_ratios: np.ndarray

    def __post_init__(self):
        ratios = np.array(self.component_ratios, dtype=float)
        ratios.setflags(write=False)
        object.__setattr__(self, "component_ratios", ratios)


def fixed_point_report(alpha: np.ndarray, alpha_hat: np.ndarray, rtol: float = FIXED_POINT_RTOL) -> FixedPointReport:
    """Compare an iterate with its update: ratios alpha_hat / alpha.

    ``theta`` is the largest componentwise ratio; the state counts as a
    fixed point when every ratio is within ``rtol`` of 1 (at a true
    fixed point the eigenvalue is forced to 1 by global feasibility).
    """
    alpha = np.asarray(alpha, dtype=float)
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    ratios = alpha_hat / alpha
    return FixedPointReport(
        theta=float(np.max(ratios)),
        is_fixed_point=bool(np.max(np.abs(ratios - 1.0)) <= rtol),
        component_ratios=ratios,
    )


def ipfp_vector(
    x0: np.ndarray,
    u0: np.ndarray,
    r: np.ndarray,
    c: np.ndarray,
    iters: int,
) -> List[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Cumulative-form IPFP: returns [(u, v, x)] for k = 1..iters.

    v_j = c_j / sum_i(u_i x0_ij), u_i = r_i / sum_j(x0_ij v_j), and
    x = u_i x0_ij v_j.  With u0 all ones this produces the same matrix
    sequence as the incremental matrix form.
    """
    x0 = np.asarray(x0, dtype=float)
    u = np.asarray(u0, dtype=float).copy()
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    if not np.all(x0 > 0):
        raise NonPositiveEntry("vector-form IPFP requires a strictly positive start matrix")
    if not np.all(u > 0):
        raise NonPositiveEntry("u0 must be strictly positive")
    if iters < 1:
        raise ValidationError(f"iters must be >= 1, got {iters}")
    out = []
    for _ in range(iters):
        den_v = x0.T @ u
        if np.any(den_v == 0):
            raise DivisionDegeneracy("column denominator underflowed to zero")
        v = c / den_v
        den_u = x0 @ v
        if np.any(den_u == 0):
            raise DivisionDegeneracy("row denominator underflowed to zero")
        u = r / den_u
        x = u[:, None] * x0 * v[None, :]
        out.append((u.copy(), v.copy(), x))
    return out


@dataclass
class IPFPMatrixResult:
    """Outcome of the incremental matrix iteration.

    ``status`` is one of ``converged``, ``cycling``, or ``max_iters``.
    ``col_errors[k]`` is the infinity-norm column-sum error before
    iteration k+1; ``history`` holds the post-step matrices when
    requested.
    """

    x: np.ndarray
    status: str
    iterations: int
    col_errors: List[float] = field(default_factory=list)
    history: Optional[List[np.ndarray]] = None


def ipfp_matrix(
    x0: np.ndarray,
    r: np.ndarray,
    c: np.ndarray,
    max_iters: int = 10_000,
    tol: float = 1e-12,
    keep_history: bool = False,
) -> IPFPMatrixResult:
    """Incremental IPFP: column-normalize, then row-normalize, repeatedly.

    Stops as soon as the column-sum error max_j |colsum_j - c_j| falls to
    ``tol`` (an already-feasible start therefore takes zero iterations).
    Declares cycling when that error makes no 10% improvement on its
    running minimum over ``CYCLE_WINDOW`` consecutive iterations while
    staying above ``CYCLE_ERROR_FLOOR``; sparse support patterns that
    cannot meet both marginals show exactly this signature.
    """
    x = np.array(x0, dtype=float)
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(x < 0):
        raise NonPositiveEntry("start matrix must be nonnegative")
    row_mass = x.sum(axis=1)
    col_mass = x.sum(axis=0)
    if np.any(row_mass == 0) or np.any(col_mass == 0):
        k = int(np.argmax(row_mass == 0)) if np.any(row_mass == 0) else int(np.argmax(col_mass == 0))
        kind = "row" if np.any(row_mass == 0) else "column"
        raise ZeroLine(f"{kind} {k + 1} of the start matrix is entirely zero")
    history: Optional[List[np.ndarray]] = [] if keep_history else None
    col_errors: List[float] = []
    running_min = np.inf
    last_progress = 0
    status = "max_iters"
    iterations = 0
    for k in range(max_iters + 1):
        err = float(np.max(np.abs(x.sum(axis=0) - c)))
        col_errors.append(err)
        if err <= tol:
            status = "converged"
            iterations = k
            break
        if err < CYCLE_IMPROVEMENT * running_min:
            last_progress = k
        running_min = min(running_min, err)
        if k - last_progress >= CYCLE_WINDOW and err > CYCLE_ERROR_FLOOR:
            status = "cycling"
            iterations = k
            break
        if k == max_iters:
            iterations = k
            break
        x = x * (c / x.sum(axis=0))[None, :]
        x = x * (r / x.sum(axis=1))[:, None]
        if history is not None:
            history.append(x.copy())
    return IPFPMatrixResult(x=x, status=status, iterations=iterations, col_errors=col_errors, history=history)


@dataclass(frozen=True)
class ConcaveFamily:
    """Indexed family of inverse marginal-reward functions F_ij.

    ``inverse_marginal`` maps an (n, m) matrix T of multiplier sums
    lambda_i + mu_j to the elementwise values F_ij(T_ij); each F_ij must
    be strictly decreasing and positive on the real line.  ``bracket_lo``
    and ``bracket_hi`` seed the root brackets.
    """

    label: str
    n: int
    m: int
    inverse_marginal: Callable[[np.ndarray], np.ndarray]
    bracket_lo: float = -1.0
    bracket_hi: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValidationError("family dimensions must be >= 1")
        if not self.bracket_lo < self.bracket_hi:
            raise ValidationError("bracket_lo must be below bracket_hi")
        # Spot-check decrease and positivity at three probe points.
        probes = np.linspace(self.bracket_lo, self.bracket_hi, 3)
        vals = [self.evaluate(np.full((self.n, self.m), t)) for t in probes]
        for v in vals:
            if not np.all(v > 0):
                raise ValidationError(f"family {self.label!r} is not positive on its bracket")
        for lo, hi in zip(vals, vals[1:]):
            if not np.all(hi < lo):
                raise ValidationError(f"family {self.label!r} is not strictly decreasing")

    def evaluate(self, T: np.ndarray) -> np.ndarray:
        out = np.asarray(self.inverse_marginal(np.asarray(T, dtype=float)), dtype=float)
        if out.shape != (self.n, self.m):
            raise LengthMismatch(f"family returned shape {out.shape}, expected {(self.n, self.m)}")
        return out


@dataclass(frozen=True)
class ConcaveIterationParams:
    tol: float = 1e-10
    max_sweeps: int = 10_000
    root_tol: float = 1e-12
    max_bracket_expansions: int = 200


@dataclass
class ConcaveIterationResult:
    duals: DualPotentials
    plan: np.ndarray
    sweeps: int
    residuals: List[float]
    plans: List[np.ndarray] = field(default_factory=list)


def _solve_monotone(g: Callable[[float], float], start: float, params: ConcaveIterationParams) -> float:
    """Root of a strictly decreasing scalar g by bracket expansion + bisection."""
    lo = hi = start
    glo = g(lo)
    step = 1.0
    expansions = 0
    while glo < 0:  # need g(lo) >= 0: move left
        lo -= step
        step *= 2.0
        glo = g(lo)
        expansions += 1
        if expansions > params.max_bracket_expansions:
            raise RootBracketFailure("could not bracket the root from below")
    step = 1.0
    ghi = g(hi)
    expansions = 0
    while ghi > 0:  # need g(hi) <= 0: move right
        hi += step
        step *= 2.0
        ghi = g(hi)
        expansions += 1
        if expansions > params.max_bracket_expansions:
            raise RootBracketFailure("could not bracket the root from above")
    while hi - lo > params.root_tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def concave_iteration(
    family: ConcaveFamily,
    r: np.ndarray,
    c: np.ndarray,
    lambda0: np.ndarray,
    params: Optional[ConcaveIterationParams] = None,
    keep_plans: bool = False,
) -> ConcaveIterationResult:
    """Alternate multiplier sweeps for a strictly concave problem.

    Given lambda, each mu_j solves sum_i F_ij(lambda_i + mu_j) = c_j (a
    scalar strictly monotone root problem); given mu, each lambda_i
    solves sum_j F_ij(lambda_i + mu_j) = r_i.  The plan at any stage is
    x_ij = F_ij(lambda_i + mu_j).  Stops when the worst relative column
    residual of the post-sweep plan falls below ``params.tol``.
    """
    params = params or ConcaveIterationParams()
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    lam = np.asarray(lambda0, dtype=float).copy()
    mu = np.zeros(family.m)
    residuals: List[float] = []
    plans: List[np.ndarray] = []

    def column_value(j: int, mu_j: float) -> float:
        T = lam[:, None] + mu[None, :]
        T[:, j] = lam + mu_j
        return float(family.evaluate(T)[:, j].sum()) - c[j]

    def row_value(i: int, lam_i: float) -> float:
        T = lam[:, None] + mu[None, :]
        T[i, :] = lam_i + mu
        return float(family.evaluate(T)[i, :].sum()) - r[i]

    for sweep in range(1, params.max_sweeps + 1):
        for j in range(family.m):
            mu[j] = _solve_monotone(lambda t: column_value(j, t), mu[j], params)
        for i in range(family.n):
            lam[i] = _solve_monotone(lambda t: row_value(i, t), lam[i], params)
        plan = family.evaluate(lam[:, None] + mu[None, :])
        resid = float(np.max(np.abs(plan.sum(axis=0) / c - 1.0)))
        residuals.append(resid)
        if keep_plans:
            plans.append(plan)
        if resid <= params.tol:
            return ConcaveIterationResult(DualPotentials(lam, mu), plan, sweep, residuals, plans)
    raise MaxItersExceeded(
        f"no convergence to tol={params.tol} within {params.max_sweeps} sweeps",
        partial=ConcaveIterationResult(DualPotentials(lam, mu), family.evaluate(lam[:, None] + mu[None, :]),
                                       params.max_sweeps, residuals, plans),
    )


def entropic_family(a: np.ndarray, eta: float) -> ConcaveFamily:
    """Inverse marginals of the entropy-smoothed additive rewards.

    For rewards a_ij x + eta(-x log x) the marginal reward is
    a_ij - eta(log x + 1), whose inverse is F_ij(t) = exp((a_ij - t)/eta - 1).
    """
    a = np.asarray(a, dtype=float)
    n, m = a.shape
    return ConcaveFamily(
        label=f"entropic(eta={eta})",
        n=n,
        m=m,
        inverse_marginal=lambda T: np.exp((a - T) / eta - 1.0),
    )


def isoelastic_family(b: np.ndarray, eta: float) -> ConcaveFamily:
    """Inverse marginals of the isoelastic multiplicative rewards.

    For rewards b_ij x^(1-eta)/(1-eta) with multiplier sum t = log(beta_j)
    - log(alpha_i), the first-order condition gives
    F_ij(t) = (b_ij exp(-t))^(1/eta).
    """
    b = np.asarray(b, dtype=float)
    if not np.all(b > 0):
        raise NonPositiveEntry("coefficients must be strictly positive")
    n, m = b.shape
    return ConcaveFamily(
        label=f"isoelastic(eta={eta})",
        n=n,
        m=m,
        inverse_marginal=lambda T: (b * np.exp(-T)) ** (1.0 / eta),
    )
