"""Accelerated proximal gradient (FISTA-type) solver with backtracking.

Minimizes ``l(x) + lambda1 ||x||_1 + lambda2 sum_i w_i ||x_{G_i}||`` for a
smooth convex loss ``l``. Each step evaluates the overlapping group prox at a
momentum search point; the local constant ``L`` doubles until the quadratic
model dominates the objective and never decreases across iterations.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Protocol

import numpy as np

from .dual import DualVariable
from .errors import DimensionMismatch, InputError, LineSearchOverflow, OGLError
from .groups import GroupStructure, PenaltyParams, penalty_value
from .prox import ProxOptions, ProxSolution, prox

logger = logging.getLogger(__name__)

L_OVERFLOW = 1e30
DEFAULT_RHO_GRID = (5e-1, 2e-1, 1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3)


class SmoothLoss(Protocol):
    def value(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...

    def value_and_gradient(self, x: np.ndarray) -> tuple[float, np.ndarray]: ...


def least_squares_value_and_gradient(A, b, x):
    """``(1/2 ||Ax - b||^2, A^T (Ax - b))`` from a single residual."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],) or x.shape != (A.shape[1],):
        raise DimensionMismatch(f"A {A.shape}, b {b.shape}, x {x.shape} are inconsistent")
    r = A @ x - b
    return 0.5 * float(r @ r), A.T @ r


class LeastSquaresLoss:
    """``l(x) = 1/2 ||Ax - b||^2``."""

    def __init__(self, A, b):
        A = np.ascontiguousarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise DimensionMismatch(f"A has shape {A.shape} but b has shape {b.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InputError("A and b must be finite")
        self.A = A
        self.b = b

    @property
    def n_features(self) -> int:
        return self.A.shape[1]

    def value(self, x):
        r = self.A @ x - self.b
        return 0.5 * float(r @ r)

    def gradient(self, x):
        return self.A.T @ (self.A @ x - self.b)

    def value_and_gradient(self, x):
        return least_squares_value_and_gradient(self.A, self.b, x)


def lambda_max(A, b) -> float:
    """``||A^T b||_inf``: with ``lambda2 = 0`` and ``lambda1`` at least this, zero is optimal."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise DimensionMismatch(f"A has shape {A.shape} but b has shape {b.shape}")
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(A.T @ b)))


@dataclass
class SolverOptions:
    L0: float = 1.0
    outer_tol: float = 1e-5
    max_outer: int = 10_000
    gap_tol: float = 1e-10
    max_inner: int = 100_000

    def __post_init__(self):
        for name in ("L0", "outer_tol", "max_outer", "gap_tol", "max_inner"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")

    @property
    def prox_options(self) -> ProxOptions:
        return ProxOptions(gap_tol=self.gap_tol, max_inner=self.max_inner)


@dataclass
class SolverState:
    x_curr: np.ndarray
    x_prev: np.ndarray
    alpha_curr: float = 1.0
    alpha_prev: float = 0.0
    L: float = 1.0
    iteration: int = 0

    @property
    def beta(self) -> float:
        return (self.alpha_prev - 1.0) / self.alpha_curr

    def search_point(self) -> np.ndarray:
        return self.x_curr + self.beta * (self.x_curr - self.x_prev)

    def advance(self, x_next: np.ndarray, L: float) -> None:
        self.x_prev, self.x_curr = self.x_curr, x_next
        self.L = L
        self.iteration += 1
        self.alpha_prev, self.alpha_curr = self.alpha_curr, next_alpha(self.alpha_curr)


def next_alpha(alpha: float) -> float:
    return (1.0 + math.sqrt(1.0 + 4.0 * alpha * alpha)) / 2.0


@dataclass
class IterationRecord:
    objective: float
    L: float
    trials: int
    inner_iterations: int
    inner_iterations_total: int
    zero_fraction: float
    gap: float
    rel_change: float
    alpha: float
    beta: float

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class SolverResult:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool
    telemetry: list = field(default_factory=list)
    final_prox: ProxSolution | None = field(default=None, repr=False)
    message: str = ""

    @property
    def L_max(self) -> float:
        return max((rec.L for rec in self.telemetry), default=float("nan"))

    @property
    def warm_Y(self) -> DualVariable | None:
        return None if self.final_prox is None else self.final_prox.warm_Y

    def telemetry_arrays(self) -> dict:
        keys = IterationRecord.__dataclass_fields__.keys()
        return {k: [getattr(rec, k) for rec in self.telemetry] for k in keys}


def objective_value(loss, x, gs, params) -> float:
    return loss.value(x) + penalty_value(x, gs, params)


def model_upper_bound(loss_s, grad_s, x, s, L, gs, params) -> float:
    """Quadratic model of the objective around ``s`` evaluated at ``x``.

    ``l(s) + <grad_s, x - s> + penalty(x) + L/2 ||x - s||^2``.
    """
    if not L > 0:
        raise InputError("L must be positive")
    d = np.asarray(x, dtype=float) - s
    return loss_s + float(grad_s @ d) + penalty_value(x, gs, params) + 0.5 * L * float(d @ d)


class LineSearchStep(NamedTuple):
    x: np.ndarray
    L: float
    trials: int
    prox: ProxSolution
    objective: float
    inner_iterations_total: int


def line_search_step(
    s,
    L_prev: float,
    loss,
    gs: GroupStructure,
    params: PenaltyParams,
    warm_Y: DualVariable | None = None,
    prox_options: ProxOptions | None = None,
    prox_fn: Callable = prox,
    loss_and_grad_s=None,
) -> LineSearchStep:
    """Find the smallest ``L = 2**j * L_prev`` whose prox step is dominated by the model."""
    if not L_prev > 0:
        raise InputError("L_prev must be positive")
    loss_s, grad_s = loss_and_grad_s if loss_and_grad_s is not None else loss.value_and_gradient(s)
    L = float(L_prev)
    trials = 0
    inner_total = 0
    while True:
        trials += 1
        sol = prox_fn(s - grad_s / L, gs, params.scaled(1.0 / L), prox_options, warm_Y)
        inner_total += sol.inner_iterations
        x = sol.x
        f_x = objective_value(loss, x, gs, params)
        if f_x <= model_upper_bound(loss_s, grad_s, x, s, L, gs, params):
            return LineSearchStep(x, L, trials, sol, f_x, inner_total)
        L *= 2.0
        if L > L_OVERFLOW:
            raise LineSearchOverflow(
                f"line search constant exceeded {L_OVERFLOW:g} without acceptance"
            )


def foglasso_solve(
    loss,
    gs: GroupStructure,
    params: PenaltyParams,
    options: SolverOptions | None = None,
    x0=None,
    warm_Y: DualVariable | None = None,
    prox_fn: Callable = prox,
) -> SolverResult:
    """Accelerated proximal gradient for the overlapping group Lasso.

    Parameters
    ----------
    loss : SmoothLoss
    gs : GroupStructure
    params : PenaltyParams
    options : SolverOptions, optional
    x0 : ndarray, optional
        Starting point, zero by default.
    warm_Y : DualVariable, optional
        Dual warm start for the first prox evaluation.
    prox_fn : callable, optional
        Replacement prox with the signature of :func:`ogl.prox.prox`.

    Returns
    -------
    SolverResult
        Stops once ``|f(x_{k+1}) - f(x_k)| / max(1, |f(x_k)|) <= outer_tol``.
        If ``max_outer`` is reached first, the best iterate is returned with
        ``converged=False``.
    """
    options = options or SolverOptions()
    p = gs.p
    x0 = np.zeros(p) if x0 is None else np.array(x0, dtype=float)
    if x0.shape != (p,):
        raise DimensionMismatch(f"x0 has shape {x0.shape}, expected ({p},)")

    state = SolverState(x_curr=x0, x_prev=x0.copy(), L=float(options.L0))
    f_curr = objective_value(loss, x0, gs, params)
    best_x, best_f = x0, f_curr
    telemetry = []
    prox_options = options.prox_options
    last = None
    converged = False

    while state.iteration < options.max_outer:
        beta = state.beta
        s = state.search_point()
        step = line_search_step(
            s, state.L, loss, gs, params, warm_Y, prox_options, prox_fn=prox_fn
        )
        last = step.prox
        warm_Y = step.prox.warm_Y
        rel = abs(step.objective - f_curr) / max(1.0, abs(f_curr))
        telemetry.append(
            IterationRecord(
                objective=step.objective,
                L=step.L,
                trials=step.trials,
                inner_iterations=step.prox.inner_iterations,
                inner_iterations_total=step.inner_iterations_total,
                zero_fraction=step.prox.zero_fraction,
                gap=step.prox.gap,
                rel_change=rel,
                alpha=state.alpha_curr,
                beta=beta,
            )
        )
        state.advance(step.x, step.L)
        f_curr = step.objective
        if f_curr < best_f:
            best_x, best_f = step.x, f_curr
        if rel <= options.outer_tol:
            converged = True
            break

    if converged:
        return SolverResult(state.x_curr, f_curr, state.iteration, True, telemetry, last)
    logger.warning("no convergence after %d outer iterations", state.iteration)
    return SolverResult(
        best_x, best_f, state.iteration, False, telemetry, last,
        message=f"max_outer={options.max_outer} reached",
    )


@dataclass
class PathEntry:
    rho: float
    lambda1: float
    lambda2: float
    result: SolverResult | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.result is not None


@dataclass
class PathResult:
    lambda1_max: float
    entries: list


def reg_path(
    loss,
    gs: GroupStructure,
    rho_grid=DEFAULT_RHO_GRID,
    options: SolverOptions | None = None,
    l2_ratio: float = 1.0,
    x0=None,
) -> PathResult:
    """Warm-started path over ``lambda1 = rho * lambda1_max``, ``lambda2 = l2_ratio * lambda1``.

    ``lambda1_max`` is ``||grad l(0)||_inf``, i.e. ``||A^T b||_inf`` for least
    squares. Each solve starts from the previous solution and its dual
    variable. Failures are recorded on the entry and the path continues from
    the last good point.
    """
    rho_grid = [float(r) for r in rho_grid]
    if not rho_grid:
        raise InputError("empty rho grid")
    if any(not (0 < r <= 1) for r in rho_grid):
        raise InputError("rho values must lie in (0, 1]")
    if any(b >= a for a, b in zip(rho_grid, rho_grid[1:])):
        raise InputError("rho grid must be strictly decreasing")
    if l2_ratio < 0:
        raise InputError("l2_ratio must be >= 0")

    lam_max = float(np.max(np.abs(loss.gradient(np.zeros(gs.p))))) if gs.p else 0.0
    x = np.zeros(gs.p) if x0 is None else np.asarray(x0, dtype=float)
    warm_Y = None
    entries = []
    for rho in rho_grid:
        lam1 = rho * lam_max
        params = PenaltyParams(lam1, l2_ratio * lam1)
        try:
            res = foglasso_solve(loss, gs, params, options, x0=x, warm_Y=warm_Y)
        except OGLError as exc:
            logger.error("path point rho=%g failed: %s", rho, exc)
            entries.append(PathEntry(rho, params.lambda1, params.lambda2, None, str(exc)))
            continue
        entries.append(PathEntry(rho, params.lambda1, params.lambda2, res))
        x, warm_Y = res.x, res.warm_Y
    return PathResult(lam_max, entries)
