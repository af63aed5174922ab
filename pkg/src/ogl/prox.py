"""Proximal operator of the overlapping group penalty.

``prox(v)`` minimizes ``1/2 ||x - v||^2 + lambda1 ||x||_1 + lambda2 sum_i w_i ||x_{G_i}||``.
The pipeline is:

1. work on ``|v|`` and restore signs at the end;
2. soft-threshold by ``lambda1`` (the l1 part separates exactly);
3. zero every group whose remaining mass is within its ``lambda2 * w_i``
   budget, cycling until nothing changes;
4. drop the zeroed coordinates and groups and solve the smaller problem
   through its dual (:mod:`ogl.dual`).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dual import DualSolveReport, DualVariable, solve_dual
from .errors import DimensionMismatch, MaxInnerIterationsExceeded
from .groups import GroupStructure, PenaltyParams


@dataclass
class IdentificationTrace:
    passes: int = 0
    zeroed_groups: list = field(default_factory=list)
    overlap_subsets: list = field(default_factory=list)


@dataclass
class ReducedProblem:
    """The strictly positive sub-problem left after identification.

    ``index_map[k]`` is the original feature of reduced feature ``k`` and
    ``group_map[j]`` the original group of reduced group ``j``.
    """

    u_reduced: np.ndarray
    gs_reduced: GroupStructure
    index_map: np.ndarray
    group_map: np.ndarray
    sign: np.ndarray
    zero_group_mask: np.ndarray
    trace: IdentificationTrace
    # position of each reduced membership inside the original flat layout
    flat_map: np.ndarray = field(repr=False, default=None)

    @property
    def p_reduced(self) -> int:
        return int(self.index_map.size)

    @property
    def g_reduced(self) -> int:
        return int(self.group_map.size)


@dataclass
class ProxOptions:
    gap_tol: float = 1e-10
    max_inner: int = 100_000
    strict: bool = False


@dataclass
class ProxSolution:
    x: np.ndarray
    gap: float
    inner_iterations: int
    zero_group_mask: np.ndarray
    warm_Y: DualVariable
    converged: bool = True
    p_reduced: int = 0
    g_reduced: int = 0
    report: DualSolveReport | None = field(default=None, repr=False)

    @property
    def zero_fraction(self) -> float:
        mask = self.zero_group_mask
        return float(mask.mean()) if mask.size else 0.0


def soft_threshold(v, lambda1: float) -> np.ndarray:
    """``sgn(v) * max(|v| - lambda1, 0)``."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - lambda1, 0.0)


def identify_zero_groups(u, gs: GroupStructure, lambda2: float):
    """Zero out groups that are provably zero in the prox solution.

    Groups are scanned in ascending order; a group whose current norm is at
    most ``lambda2 * w_i`` is set to zero, which can only lower the norms of
    the groups overlapping it. Scans repeat until one changes nothing.

    Returns
    -------
    u : ndarray
        Copy of the input with the zeroed groups cleared.
    trace : IdentificationTrace
    """
    u = np.array(u, dtype=float)
    if u.shape != (gs.p,):
        raise DimensionMismatch(f"u has shape {u.shape}, expected ({gs.p},)")
    trace = IdentificationTrace()
    if gs.g == 0:
        return u, trace
    budgets = lambda2 * gs.weights
    zeroed = np.zeros(gs.g, dtype=bool)
    in_zeroed = np.zeros(gs.p, dtype=bool)
    groups = gs.groups
    while True:
        trace.passes += 1
        changed = False
        for i in range(gs.g):
            if zeroed[i]:
                continue
            idx = groups[i]
            block = u[idx]
            if float(np.sqrt(block @ block)) <= budgets[i]:
                zeroed[i] = True
                trace.zeroed_groups.append(i)
                trace.overlap_subsets.append(idx[in_zeroed[idx]])
                u[idx] = 0.0
                in_zeroed[idx] = True
                changed = True
        if not changed:
            break
    return u, trace


def reduce_problem(v, gs: GroupStructure, params: PenaltyParams) -> ReducedProblem:
    """Shrink the prox problem to its strictly positive core."""
    v = np.asarray(v, dtype=float)
    if v.shape != (gs.p,):
        raise DimensionMismatch(f"v has shape {v.shape}, expected ({gs.p},)")
    sign = np.sign(v)
    u = np.maximum(np.abs(v) - params.lambda1, 0.0)
    u, trace = identify_zero_groups(u, gs, params.lambda2)

    zero_mask = np.zeros(gs.g, dtype=bool)
    zero_mask[trace.zeroed_groups] = True
    keep = u > 0
    index_map = np.flatnonzero(keep)
    new_index = np.full(gs.p, -1, dtype=np.int64)
    new_index[index_map] = np.arange(index_map.size)

    groups, weights, names, group_map, flat_pos = [], [], [], [], []
    for i in np.flatnonzero(~zero_mask):
        idx = gs.groups[i]
        sel = keep[idx]
        if not sel.any():
            continue
        groups.append(new_index[idx[sel]])
        weights.append(gs.weights[i])
        if gs.names is not None:
            names.append(gs.names[i])
        group_map.append(i)
        flat_pos.append(gs.ptr[i] + np.flatnonzero(sel))

    gs_reduced = GroupStructure(
        p=int(index_map.size),
        groups=tuple(groups),
        weights=np.asarray(weights, dtype=float),
        names=tuple(names) if gs.names is not None else None,
    )
    flat_map = np.concatenate(flat_pos) if flat_pos else np.zeros(0, dtype=np.int64)
    return ReducedProblem(
        u_reduced=u[index_map],
        gs_reduced=gs_reduced,
        index_map=index_map,
        group_map=np.asarray(group_map, dtype=np.int64),
        sign=sign,
        zero_group_mask=zero_mask,
        trace=trace,
        flat_map=flat_map,
    )


def prox(
    v,
    gs: GroupStructure,
    params: PenaltyParams,
    options: ProxOptions | None = None,
    warm_Y: DualVariable | None = None,
) -> ProxSolution:
    """Evaluate the proximal operator of the overlapping group penalty at ``v``.

    ``warm_Y`` is a dual variable over the *full* group structure ``gs``
    (as returned in :attr:`ProxSolution.warm_Y`); the entries belonging to
    the surviving reduced problem are used to start the dual solver.

    If the inner solver hits ``max_inner`` the best iterate is returned with
    ``converged=False``, or :class:`MaxInnerIterationsExceeded` is raised
    when ``options.strict`` is set.
    """
    options = options or ProxOptions()
    red = reduce_problem(v, gs, params)
    x = np.zeros(gs.p)
    full_Y = np.zeros(gs.nnz)

    if red.p_reduced == 0:
        return ProxSolution(
            x=x,
            gap=0.0,
            inner_iterations=0,
            zero_group_mask=red.zero_group_mask,
            warm_Y=DualVariable(gs, full_Y),
        )

    warm = None
    if warm_Y is not None:
        if warm_Y.values.shape != (gs.nnz,):
            raise DimensionMismatch("warm_Y does not match the group structure")
        warm = DualVariable(red.gs_reduced, warm_Y.values[red.flat_map])
    Y, xr, report = solve_dual(
        red.u_reduced,
        red.gs_reduced,
        params.lambda2,
        gap_tol=options.gap_tol,
        max_iter=options.max_inner,
        warm_Y=warm,
    )
    if not report.converged and options.strict:
        raise MaxInnerIterationsExceeded(
            f"duality gap {report.gap:.3e} > {options.gap_tol:.3e} after {report.iterations} iterations"
        )
    x[red.index_map] = xr
    x *= red.sign
    full_Y[red.flat_map] = Y.values
    return ProxSolution(
        x=x,
        gap=report.gap,
        inner_iterations=report.iterations,
        zero_group_mask=red.zero_group_mask,
        warm_Y=DualVariable(gs, full_Y),
        converged=report.converged,
        p_reduced=red.p_reduced,
        g_reduced=red.g_reduced,
        report=report,
    )
