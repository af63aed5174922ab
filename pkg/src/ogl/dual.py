"""Smooth dual of the nonnegative group-penalized projection problem.

For ``u > 0`` the problem

    min_{x >= 0}  1/2 ||x - u||^2 + lambda2 * sum_i w_i ||x_{G_i}||

is solved through the dual variable ``Y`` whose column ``i`` lives on ``G_i``
and has norm at most ``lambda2 * w_i``. The primal point is recovered as
``x = max(u - Y e, 0)`` where ``Y e`` sums the columns. Only the on-support
entries of ``Y`` are stored, in the flat layout of :class:`GroupStructure`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InfeasibleDual
from .groups import GroupStructure

GAP_CLAMP = 1e-14
FEASIBILITY_SLACK = 1e-12


@dataclass
class DualVariable:
    """On-support entries of the dual matrix, one dense block per group.

    ``values[gs.ptr[i]:gs.ptr[i + 1]]`` holds column ``i`` restricted to
    ``gs.groups[i]``; everything off-support is structurally zero.
    """

    gs: GroupStructure
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.gs.nnz,):
            raise DimensionMismatch(
                f"dual values have shape {self.values.shape}, expected ({self.gs.nnz},)"
            )

    @classmethod
    def zeros(cls, gs: GroupStructure) -> "DualVariable":
        return cls(gs, np.zeros(gs.nnz))

    @classmethod
    def from_blocks(cls, gs: GroupStructure, blocks) -> "DualVariable":
        if len(blocks) != gs.g:
            raise DimensionMismatch(f"{len(blocks)} blocks for {gs.g} groups")
        if gs.g == 0:
            return cls.zeros(gs)
        return cls(gs, np.concatenate([np.asarray(b, dtype=float) for b in blocks]))

    def block(self, i: int) -> np.ndarray:
        return self.values[self.gs.ptr[i]:self.gs.ptr[i + 1]]

    def column_norms(self) -> np.ndarray:
        return _segment_norms(self.values, self.gs)

    def row_sums(self) -> np.ndarray:
        """``Y e``: per-feature sum over the columns."""
        return _row_sums(self.values, self.gs)

    def to_dense(self) -> np.ndarray:
        """Materialize the full ``p x g`` matrix (small problems / tests only)."""
        dense = np.zeros((self.gs.p, self.gs.g))
        cols = np.repeat(np.arange(self.gs.g), self.gs.sizes)
        dense[self.gs.flat_idx, cols] = self.values
        return dense

    def copy(self) -> "DualVariable":
        return DualVariable(self.gs, self.values.copy())


@dataclass
class DualSolveReport:
    gap: float
    iterations: int
    final_step_L: float
    converged: bool
    gap_history: list = field(default_factory=list, repr=False)


def _segment_norms(values, gs):
    if gs.g == 0:
        return np.zeros(0)
    return np.sqrt(np.add.reduceat(values * values, gs.ptr[:-1]))


def _segment_dots(a, b, gs):
    if gs.g == 0:
        return np.zeros(0)
    return np.add.reduceat(a * b, gs.ptr[:-1])


def _row_sums(values, gs):
    return np.bincount(gs.flat_idx, weights=values, minlength=gs.p)


def _bounds(gs, lambda2):
    return lambda2 * gs.weights


def _project(values, gs, bounds):
    norms = _segment_norms(values, gs)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > bounds, bounds / norms, 1.0)
    if np.all(scale == 1.0):
        return values.copy()
    return values * np.repeat(scale, gs.sizes)


def _check_u(u, gs):
    u = np.asarray(u, dtype=float)
    if u.shape != (gs.p,):
        raise DimensionMismatch(f"u has shape {u.shape}, expected ({gs.p},)")
    return u


def project_omega(Y: DualVariable, gs_reduced: GroupStructure, lambda2: float) -> DualVariable:
    """Euclidean projection onto the product of per-group balls.

    Each column is rescaled by ``min(1, lambda2 * w_i / ||Y^i||)``; zero
    columns are left alone.
    """
    if Y.gs is not gs_reduced and Y.gs.nnz != gs_reduced.nnz:
        raise DimensionMismatch("dual variable does not match the group structure")
    return DualVariable(gs_reduced, _project(Y.values, gs_reduced, _bounds(gs_reduced, lambda2)))


def primal_from_dual(Y: DualVariable, u) -> np.ndarray:
    """``x = max(u - Y e, 0)``."""
    u = _check_u(u, Y.gs)
    return np.maximum(u - Y.row_sums(), 0.0)


def _omega(x, ye, u):
    d = x - u
    return -(0.5 * float(d @ d) + float(x @ ye))


def omega_value(Y: DualVariable, u) -> float:
    """Dual objective ``-(1/2 ||x - u||^2 + <x, Y e>)`` at ``x = max(u - Y e, 0)``."""
    u = _check_u(u, Y.gs)
    ye = Y.row_sums()
    x = np.maximum(u - ye, 0.0)
    return _omega(x, ye, u)


def omega_gradient(Y: DualVariable, u) -> DualVariable:
    """Gradient of :func:`omega_value`: column ``i`` is ``-x`` on ``G_i``."""
    x = primal_from_dual(Y, u)
    return DualVariable(Y.gs, -x[Y.gs.flat_idx])


def _gap_terms(x, values, gs, lambda2):
    """Per-group ``lambda2 w_i ||x_{G_i}|| - <x_{G_i}, Y^i>``."""
    xg = x[gs.flat_idx]
    return lambda2 * gs.weights * _segment_norms(xg, gs) - _segment_dots(xg, values, gs)


def _finish_gap(terms, x, gs, lambda2):
    gap = float(terms.sum())
    if gap < 0.0:
        scale = max(1.0, float(lambda2 * (gs.weights @ _segment_norms(x[gs.flat_idx], gs))))
        if gap < -GAP_CLAMP * scale:
            raise InfeasibleDual(f"negative duality gap {gap:.3e}")
        gap = 0.0
    return gap


def duality_gap(x_tilde, Y_tilde: DualVariable, gs_reduced: GroupStructure, lambda2: float) -> float:
    """Duality gap of the pair ``(x_tilde, Y_tilde)``.

    Equals ``sum_i (lambda2 w_i ||x_{G_i}|| - <x_{G_i}, Y^i>)``, which is
    nonnegative for any feasible ``Y`` by Cauchy-Schwarz. It bounds both the
    primal and the dual suboptimality.

    Raises
    ------
    InfeasibleDual
        If a column exceeds its ball radius by more than rounding slack.
    """
    gs = gs_reduced
    x = np.asarray(x_tilde, dtype=float)
    if x.shape != (gs.p,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({gs.p},)")
    bounds = _bounds(gs, lambda2)
    norms = Y_tilde.column_norms()
    over = norms - bounds > FEASIBILITY_SLACK * np.maximum(1.0, bounds)
    if np.any(over):
        i = int(np.flatnonzero(over)[0])
        raise InfeasibleDual(f"column {i} has norm {norms[i]!r} > {bounds[i]!r}")
    return _finish_gap(_gap_terms(x, Y_tilde.values, gs, lambda2), x, gs, lambda2)


def lipschitz_bound(gs: GroupStructure) -> float:
    """A Lipschitz constant of the dual gradient in Frobenius norm.

    The generic bound is ``g**2``; the tighter value used here is the largest
    number of groups sharing one feature.
    """
    if gs.g == 0:
        return 1.0
    return float(gs.membership_counts().max())


def solve_dual(
    u,
    gs_reduced: GroupStructure,
    lambda2: float,
    gap_tol: float = 1e-10,
    max_iter: int = 100_000,
    warm_Y: DualVariable | None = None,
):
    """Minimize the dual objective over the ball product by accelerated projected gradient.

    The step size comes from backtracking: a local constant ``L`` starts at 1
    and doubles until the quadratic upper model holds at the projected point.
    The duality gap is evaluated at every iterate and the loop ends once it
    drops to ``gap_tol``.

    Parameters
    ----------
    u : ndarray
        Strictly positive vector of length ``gs_reduced.p``.
    gs_reduced : GroupStructure
    lambda2 : float
    gap_tol : float
    max_iter : int
    warm_Y : DualVariable, optional
        Starting point; it is projected first since the radii may have changed.

    Returns
    -------
    Y : DualVariable
        Best iterate seen (smallest gap).
    x : ndarray
        ``max(u - Y e, 0)`` for that iterate.
    report : DualSolveReport
    """
    gs = gs_reduced
    u = _check_u(u, gs)
    if not gap_tol > 0:
        raise ValueError("gap_tol must be positive")
    bounds = _bounds(gs, lambda2)
    idx = gs.flat_idx
    lip = lipschitz_bound(gs)

    if warm_Y is not None:
        if warm_Y.values.shape != (gs.nnz,):
            raise DimensionMismatch("warm start does not match the group structure")
        y = _project(warm_Y.values, gs, bounds)
    else:
        y = np.zeros(gs.nnz)

    ye = _row_sums(y, gs)
    x = np.maximum(u - ye, 0.0)
    gap = _finish_gap(_gap_terms(x, y, gs, lambda2), x, gs, lambda2)
    history = [gap]
    best = (gap, y, x)
    L = 1.0
    if gap <= gap_tol:
        return DualVariable(gs, y), x, DualSolveReport(gap, 0, L, True, history)

    y_prev = y
    a_older, a_old = 0.0, 1.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        beta = (a_older - 1.0) / a_old
        s = y + beta * (y - y_prev)
        se = _row_sums(s, gs)
        xs = np.maximum(u - se, 0.0)
        omega_s = _omega(xs, se, u)
        grad = -xs[idx]
        while True:
            z = _project(s - grad / L, gs, bounds)
            ze = _row_sums(z, gs)
            xz = np.maximum(u - ze, 0.0)
            omega_z = _omega(xz, ze, u)
            d = z - s
            dd = float(d @ d)
            if L >= lip or dd == 0.0:
                break
            if omega_z <= omega_s + float(grad @ d) + 0.5 * L * dd:
                break
            L *= 2.0
        y_prev, y = y, z
        x = xz
        gap = _finish_gap(_gap_terms(x, y, gs, lambda2), x, gs, lambda2)
        history.append(gap)
        if gap < best[0]:
            best = (gap, y, x)
        if gap <= gap_tol:
            break
        a_older, a_old = a_old, (1.0 + math.sqrt(1.0 + 4.0 * a_old * a_old)) / 2.0

    gap, y, x = best
    report = DualSolveReport(gap, iterations, L, gap <= gap_tol, history)
    return DualVariable(gs, y), x, report
