"""Temperature-regularized scaling iteration with stagewise annealing.

The additive problem max sum(a*x) is smoothed by replacing each linear
reward a_ij*x with a_ij*x + eta*(-x log x); on the multiplicative side
this is the isoelastic family b_ij * x^(1-eta)/(1-eta).  The resulting
fixed-point iteration alternates column and row fits of the matrix
z_ij = alpha_i b_ij / beta_j, from which the plan is x = z^(1/eta):

    s_j = c_j^eta / ||z_:j||_{1/eta}        (column multipliers)
    t_i = r_i^eta / ||z_i:'||_{1/eta}       (row multipliers, post column fit)

All 1/eta-norms are evaluated in max-factored form, so no intermediate
quantity leaves the z-domain; this is what keeps the iteration usable at
temperatures where x itself would overflow.  After each full step the
quantity (1/eta) * log(max_j s_j / min_j s_j) equals the Hilbert distance
between the plan's column sums and c, giving a stopping criterion for
free.

Annealing runs the iteration over a decreasing temperature ladder.  The
z matrix is carried unchanged between stages: z encodes the dual
potentials (z_ij = exp(a_ij - lambda_i - mu_j)), so keeping it fixed
warm-starts each colder stage from the incumbent potentials while the
plan x = z^(1/eta) resharpens, which is what makes staging effective.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import (
    MaxItersExceeded,
    NonFiniteEntry,
    NonPositiveEntry,
    NumericalDegeneracy,
    ValidationError,
)
from .model import (
    MAXIMIZE,
    MOMAProblem,
    OTProblem,
    Scalings,
    TransportPlan,
    ot_to_moma,
    require_valid,
)

#: Temperatures below this floor freeze the iteration at machine epsilon
#: (norms collapse to max-norms, powers to 1) and are rejected outright.
ETA_FLOOR = 1e-8

DEFAULT_TOL = 1e-2
DEFAULT_MAX_ITERS = 100_000


def power_norm(values: np.ndarray, eta: float, axis: Optional[int] = None) -> np.ndarray:
    """The 1/eta-norm, evaluated as M * (sum((v/M)^(1/eta)))^eta, M = max v.

    Factoring out the maximum keeps every intermediate in [0, len(v)], so
    the norm neither overflows nor underflows even for very small eta.
    Entries must be strictly positive.
    """
    v = np.asarray(values, dtype=float)
    vmax = np.max(v, axis=axis, keepdims=True)
    total = np.sum((v / vmax) ** (1.0 / eta), axis=axis, keepdims=True)
    out = vmax * total**eta
    if axis is None:
        return float(out.squeeze())
    return np.squeeze(out, axis=axis)


def isoelastic_utility(x, eta: float):
    """Power utility x^(1-eta)/(1-eta), the multiplicative-side regularizer.

    Its relative risk aversion -g''(x)/g'(x) equals eta/x, which is eta
    times that of the logarithmic benchmark 1/x.
    """
    return np.asarray(x, dtype=float) ** (1.0 - eta) / (1.0 - eta)


@dataclass(frozen=True)
class RegParams:
    """Temperature, stopping threshold, and iteration budget for one stage."""

    eta: float
    tol: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS

    def __post_init__(self):
        if not (self.eta >= ETA_FLOOR and np.isfinite(self.eta)):
            raise ValidationError(f"eta must be >= {ETA_FLOOR} (the eta floor), got {self.eta}")
        if not (self.tol > 0):
            raise ValidationError(f"tol must be positive, got {self.tol}")
        if not (self.max_iters >= 1):
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class ZState:
    """Stabilized iteration state: positive matrix z with x = z^(1/eta)."""

    z: np.ndarray
    eta: float
    iteration_index: int = 0

    def __post_init__(self):
        z = np.array(self.z, dtype=float)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        if not np.all(np.isfinite(z)):
            raise NonFiniteEntry("z contains non-finite entries")
        if not np.all(z > 0):
            raise NonPositiveEntry("z must be strictly positive")
        if not (self.eta >= ETA_FLOOR):
            raise ValidationError(f"eta must be >= {ETA_FLOOR}, got {self.eta}")

    def plan_values(self) -> np.ndarray:
        return self.z ** (1.0 / self.eta)


@dataclass(frozen=True)
class StepMultipliers:
    """Incremental column multipliers s and row multipliers t of one step."""

    s: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        t = np.array(self.t, dtype=float)
        if not (np.all(s > 0) and np.all(t > 0)):
            raise NonPositiveEntry("step multipliers must be strictly positive")
        s.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)


@dataclass(frozen=True)
class AnnealingSchedule:
    """Ordered stages of (eta, tol), with strictly decreasing temperatures."""

    stages: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        stages = tuple((float(e), float(t)) for e, t in self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise ValidationError("schedule must contain at least one stage")
        for eta, tol in stages:
            RegParams(eta, tol)  # reuses the bounds checks
        etas = [e for e, _ in stages]
        if any(e2 >= e1 for e1, e2 in zip(etas, etas[1:])):
            raise ValidationError(f"stage temperatures must be strictly decreasing, got {etas}")

    @property
    def eta_final(self) -> float:
        return self.stages[-1][0]


def make_schedule(eta_final: float, stages: int, factor: float, tol: float = DEFAULT_TOL) -> AnnealingSchedule:
    """Geometric ladder: stage k of K has eta = eta_final * factor^(K-1-k).

    The last stage equals ``eta_final`` exactly.
    """
    if stages < 1:
        raise ValidationError(f"stages must be >= 1, got {stages}")
    if not (factor > 1):
        raise ValidationError(f"factor must be > 1, got {factor}")
    RegParams(eta_final, tol)
    etas = [eta_final * factor ** (stages - 1 - k) for k in range(stages)]
    etas[-1] = eta_final
    return AnnealingSchedule(tuple((e, tol) for e in etas))


@dataclass
class ConvergenceTrace:
    """Per-iteration record of the stopping criterion, plus optional snapshots.

    ``iterations`` holds the global 1-based step index, ``etas`` the stage
    temperature, ``criteria`` the post-step criterion value, and
    ``wall_times`` seconds since the run started.  ``snapshots`` holds
    (iteration, plan matrix) pairs when a snapshot stride was requested.
    """

    iterations: List[int] = field(default_factory=list)
    etas: List[float] = field(default_factory=list)
    criteria: List[float] = field(default_factory=list)
    wall_times: List[float] = field(default_factory=list)
    snapshots: List[Tuple[int, np.ndarray]] = field(default_factory=list)

    def record(self, k: int, eta: float, crit: float, wall: float) -> None:
        self.iterations.append(k)
        self.etas.append(eta)
        self.criteria.append(crit)
        self.wall_times.append(wall)

    def __len__(self) -> int:
        return len(self.iterations)

    def rows(self) -> List[Tuple[int, float, float]]:
        return list(zip(self.iterations, self.etas, self.criteria))


@dataclass(frozen=True)
class SolveResult:
    """Plan, recovered scalings, trace, and per-stage iteration counts.

    ``final_z`` is the raw iteration state the plan was extracted from
    (plan = final_z^(1/eta_final)); kept for debugging since the plan
    itself may underflow where z is merely below 1.
    """

    plan: TransportPlan
    scalings: Scalings
    trace: ConvergenceTrace
    converged: bool
    stage_iterations: Tuple[int, ...]
    final_criterion: float
    final_z: Optional[np.ndarray] = None

    @property
    def iterations(self) -> int:
        return int(sum(self.stage_iterations))


@dataclass(frozen=True)
class SolveOptions:
    """Knobs for solve that are not part of the schedule itself."""

    max_iters: int = DEFAULT_MAX_ITERS  # per stage
    snapshot_stride: Optional[int] = None
    raise_on_max_iters: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.snapshot_stride is not None and self.snapshot_stride < 1:
            raise ValidationError("snapshot_stride must be >= 1 when given")


def row_equilibrate(b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Scale each row minimally so it touches one of its column maxima.

    alpha_i = min_j (max_i b_ij) / b_ij and bhat = alpha_i * b_ij.  The
    scaling never changes any column maximum, and afterwards every row of
    bhat contains an entry equal to its column's maximum.
    """
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise NonFiniteEntry("matrix contains non-finite entries")
    if not np.all(b > 0):
        raise NonPositiveEntry("row equilibration requires a strictly positive matrix")
    col_max = np.max(b, axis=0)
    alpha = np.min(col_max[None, :] / b, axis=1)
    return alpha[:, None] * b, alpha


def phi_eta_step(alpha: np.ndarray, problem: MOMAProblem, eta: float) -> Tuple[np.ndarray, np.ndarray]:
    """One application of the regularized weight-update mapping.

    beta_j = ||alpha * b_:j||_{1/eta} / c_j^eta, then
    alpha_hat_i = r_i^eta / ||b_i: / beta||_{1/eta}.

    The mapping is homogeneous of degree one and strongly monotone, so
    iterating it converges to a fixed point that is unique up to scale.
    Returns (alpha_hat, beta).
    """
    alpha = np.asarray(alpha, dtype=float)
    if not np.all(alpha > 0):
        raise NonPositiveEntry("alpha must be strictly positive")
    if eta < ETA_FLOOR:
        raise ValidationError(f"eta must be >= {ETA_FLOOR}, got {eta}")
    b = problem.coefficients
    beta = power_norm(alpha[:, None] * b, eta, axis=0) / problem.col_marginals**eta
    alpha_hat = problem.row_marginals**eta / power_norm(b / beta[None, :], eta, axis=1)
    if not (np.all(np.isfinite(alpha_hat)) and np.all(np.isfinite(beta))):
        raise NonFiniteEntry("weight update produced non-finite values")
    return alpha_hat, beta


def z_step(state: ZState, r: np.ndarray, c: np.ndarray) -> Tuple[ZState, StepMultipliers]:
    """One full column-then-row fit of the z matrix.

    s_j = c_j^eta / ||z_:j||_{1/eta} rescales the columns; t_i is then
    computed from the half-updated matrix and rescales the rows.  After
    the full step the extracted plan's row sums equal r (row fits are
    exact up to z-domain rounding, which the extraction amplifies by a
    factor 1/eta).
    """
    eta = state.eta
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    s = c**eta / power_norm(state.z, eta, axis=0)
    z_half = state.z * s[None, :]
    t = r**eta / power_norm(z_half, eta, axis=1)
    z_next = z_half * t[:, None]
    if not np.all(np.isfinite(z_next)):
        raise NonFiniteEntry("z update overflowed")
    return ZState(z_next, eta, state.iteration_index + 1), StepMultipliers(s, t)


def criterion(multipliers, eta: float) -> float:
    """Stopping criterion (1/eta) * log(max_j s_j / min_j s_j).

    Equals the Hilbert distance between the column sums of the plan the
    multipliers were computed from and the prescribed column sums.
    """
    s = multipliers.s if isinstance(multipliers, StepMultipliers) else np.asarray(multipliers, dtype=float)
    if not np.all(s > 0):
        raise NonPositiveEntry("column multipliers must be strictly positive")
    return float((1.0 / eta) * np.log(np.max(s) / np.min(s)))


def solve(
    problem: OTProblem,
    schedule: AnnealingSchedule,
    options: Optional[SolveOptions] = None,
) -> SolveResult:
    """Run the annealed scaling iteration on an additive-form problem.

    Steps: form b = exp(a) (negating a first for minimization), apply the
    preliminary row equilibration, initialize z = bhat, then per stage
    iterate full z steps until the criterion measured on the post-step
    plan drops below the stage tolerance.  z carries over to the next
    stage unchanged.  The returned scalings are the cumulative products
    of the step multipliers together with the equilibration, and satisfy
    x_ij = (alpha_i b_ij / beta_j)^(1/eta_final) with b the internal
    (sense-adjusted) coefficients.

    On an exhausted iteration budget the best iterate is returned with
    ``converged=False`` (or MaxItersExceeded is raised when
    ``options.raise_on_max_iters`` is set).
    """
    require_valid(problem)
    opts = options or SolveOptions()
    moma = ot_to_moma(problem if problem.sense == MAXIMIZE else OTProblem(
        -problem.weights, problem.row_marginals, problem.col_marginals, MAXIMIZE))
    r = moma.row_marginals
    c = moma.col_marginals
    z, alpha = row_equilibrate(moma.coefficients)
    beta = np.ones(moma.m)
    trace = ConvergenceTrace()
    stage_iterations: List[int] = []
    converged = True
    crit = np.inf
    k_global = 0
    t0 = time.perf_counter()
    for eta, tol in schedule.stages:
        # The column multipliers double as the stopping measurement: the s
        # computed after a full step measures the post-step plan and, if
        # the stage continues, drives the next column fit.
        s = c**eta / power_norm(z, eta, axis=0)
        iters = 0
        while True:
            z_before = z
            z = z * s[None, :]
            beta = beta / s
            t = r**eta / power_norm(z, eta, axis=1)
            z = z * t[:, None]
            alpha = alpha * t
            if not np.all(np.isfinite(z)):
                raise NonFiniteEntry("z update overflowed")
            iters += 1
            k_global += 1
            s = c**eta / power_norm(z, eta, axis=0)
            crit = float((1.0 / eta) * np.log(np.max(s) / np.min(s)))
            trace.record(k_global, eta, crit, time.perf_counter() - t0)
            if opts.snapshot_stride and k_global % opts.snapshot_stride == 0:
                trace.snapshots.append((k_global, z ** (1.0 / eta)))
            if crit < tol:
                break
            if np.array_equal(z, z_before):
                raise NumericalDegeneracy(
                    f"updates no longer move z at eta={eta} while the criterion is {crit:.3g};"
                    " the temperature is below usable resolution"
                )
            if iters >= opts.max_iters:
                converged = False
                break
        stage_iterations.append(iters)
        if not converged:
            break
    eta_final = schedule.stages[len(stage_iterations) - 1][0]
    x = z ** (1.0 / eta_final)
    plan = TransportPlan.against(x, problem.row_marginals, problem.col_marginals)
    result = SolveResult(
        plan=plan,
        scalings=Scalings(alpha, beta),
        trace=trace,
        converged=converged,
        stage_iterations=tuple(stage_iterations),
        final_criterion=float(crit),
        final_z=z,
    )
    if not converged and opts.raise_on_max_iters:
        raise MaxItersExceeded(
            f"stage at eta={eta_final} did not reach tol within {opts.max_iters} iterations",
            partial=result,
        )
    return result
