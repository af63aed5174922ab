"""Slow reference implementations for tests and golden files.

Not part of the public API. ``oracle_prox`` shares no code with
:mod:`ogl.prox` / :mod:`ogl.dual`: it keeps the dual as a dense ``p x g``
matrix, never thresholds or drops groups, and takes fixed steps ``1/g**2``.
The l1 term is folded into a shift: on the nonnegative orthant
``lambda1 * ||x||_1`` is linear, so the problem becomes a projection of
``|v| - lambda1`` (which may be negative) onto the same dual set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OracleNotConverged
from .groups import GroupStructure, PenaltyParams


@dataclass(frozen=True)
class OracleConfig:
    gap_tol: float = 1e-12
    max_iter: int = 10_000_000
    check_every: int = 10


def oracle_prox(v, gs: GroupStructure, params: PenaltyParams, config: OracleConfig | None = None):
    """Return ``(x, gap)`` with a certified duality gap ``<= config.gap_tol``.

    Iterates in extended precision: with large ball radii, double rounding
    can leave tiny positive entries of ``x`` that pin the gap near 1e-11.
    """
    config = config or OracleConfig()
    v = np.asarray(v, dtype=float)
    p, g = gs.p, gs.g
    if g == 0 or params.lambda2 == 0.0:
        return np.sign(v) * np.maximum(np.abs(v) - params.lambda1, 0.0), 0.0

    ld = np.longdouble
    shifted = np.abs(v).astype(ld) - ld(params.lambda1)
    mask = np.zeros((p, g), dtype=ld)
    for i, grp in enumerate(gs.groups):
        mask[grp, i] = 1
    radius = ld(params.lambda2) * np.asarray(gs.weights, dtype=ld)
    step = ld(1) / ld(g * g)
    Y = np.zeros((p, g), dtype=ld)
    gap = np.inf
    for k in range(config.max_iter + 1):
        x = np.maximum(shifted - Y.sum(axis=1), 0)
        if k % config.check_every == 0:
            xm = x[:, None] * mask
            gap = float(radius @ np.sqrt((xm**2).sum(axis=0)) - (xm * Y).sum())
            if gap <= config.gap_tol:
                return np.sign(v) * x.astype(float), max(gap, 0.0)
        Y += step * x[:, None] * mask
        norms = np.sqrt((Y**2).sum(axis=0))
        over = norms > radius
        if over.any():
            Y[:, over] *= radius[over] / norms[over]
    raise OracleNotConverged(f"gap {gap:.3e} after {config.max_iter} iterations")


def prox_objective(x, v, gs: GroupStructure, params: PenaltyParams) -> float:
    """``1/2 ||x - v||^2 + penalty(x)``, computed by explicit loops."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    value = 0.5 * float(np.sum((x - v) ** 2)) + params.lambda1 * float(np.sum(np.abs(x)))
    for w, grp in zip(gs.weights, gs.groups):
        value += params.lambda2 * w * float(np.sqrt(np.sum(x[grp] ** 2)))
    return value


def oracle_objective_min(loss, gs: GroupStructure, params: PenaltyParams, config=None, x0=None,
                         max_restarts: int = 1000, tol: float = 1e-9):
    """Reference optimum ``(f_star, x_star)`` from very tight FISTA runs.

    The objective-change test is unreliable this close to the optimum (the
    accelerated sequence oscillates), so the solver runs in chunks of
    ``config.max_outer`` iterations with the momentum restarted between
    chunks, until one more prox-gradient step at the final ``L`` moves ``x``
    by at most ``tol`` in the sup norm.
    """
    from .prox import ProxOptions, prox
    from .solver import SolverOptions, foglasso_solve

    config = config or SolverOptions(outer_tol=1e-300, gap_tol=1e-14, max_outer=500, max_inner=1_000_000)
    prox_options = ProxOptions(gap_tol=config.gap_tol, max_inner=config.max_inner)
    x = None if x0 is None else np.asarray(x0, dtype=float)
    warm_Y = None
    L = config.L0
    moved = np.inf
    for _ in range(max_restarts):
        opts = SolverOptions(L0=L, outer_tol=config.outer_tol, max_outer=config.max_outer,
                             gap_tol=config.gap_tol, max_inner=config.max_inner)
        res = foglasso_solve(loss, gs, params, opts, x0=x, warm_Y=warm_Y)
        x, warm_Y = res.x, res.warm_Y
        L = res.telemetry[-1].L if res.telemetry else L
        step = prox(x - loss.gradient(x) / L, gs, params.scaled(1.0 / L), prox_options, warm_Y)
        moved = float(np.max(np.abs(step.x - x))) if x.size else 0.0
        if moved <= tol:
            return res.objective, x
    raise OracleNotConverged(f"fixed-point residual {moved:.3e} > {tol:g}")


INSTANCE_KINDS = ("overlap", "chain", "disjoint", "nested")


def random_instance(seed: int):
    """Seeded small prox instance ``(kind, v, gs, params)`` for golden files.

    Cycles through group layouts by seed and draws ``lambda1``/``lambda2``
    from regimes ranging from zero to above the level that zeroes everything.
    """
    from .groups import validate_groups

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    kind = INSTANCE_KINDS[seed % len(INSTANCE_KINDS)]
    p = int(rng.integers(2, 31))
    g = int(rng.integers(1, 11))
    if kind == "overlap":
        groups = [rng.choice(p, size=int(rng.integers(1, min(p, 8) + 1)), replace=False) for _ in range(g)]
    elif kind == "chain":
        size = int(rng.integers(2, 7))
        overlap = int(rng.integers(1, size))
        stride = size - overlap
        g = max(1, min(g, (p - overlap) // stride))
        groups = [np.arange(i * stride, i * stride + size) for i in range(g)]
        groups = [grp[grp < p] for grp in groups if grp[0] < p]
    elif kind == "disjoint":
        perm = rng.permutation(p)
        cuts = np.sort(rng.choice(np.arange(1, p), size=min(g, p) - 1, replace=False)) if min(g, p) > 1 else []
        groups = [part for part in np.split(perm, cuts) if part.size]
        groups = groups[: int(rng.integers(1, len(groups) + 1))]
    else:
        perm = rng.permutation(p)
        sizes = np.sort(rng.choice(np.arange(1, p + 1), size=min(g, p), replace=False))
        groups = [perm[:s] for s in sizes]
        # a few loose groups alongside the nested chain
        groups += [rng.choice(p, size=int(rng.integers(1, min(p, 5) + 1)), replace=False)
                   for _ in range(int(rng.integers(0, 3)))]
    if rng.random() < 0.5:
        weights = [float(np.sqrt(len(grp))) for grp in groups]
    else:
        weights = rng.uniform(0.2, 3.0, size=len(groups)).tolist()
    gs = validate_groups(groups, weights, p)

    scale = float(rng.choice([0.1, 1.0, 5.0]))
    v = scale * rng.standard_normal(p)
    vmax = float(np.abs(v).max())
    top = float(np.max(gs.group_norms(np.abs(v)) / gs.weights))
    l1 = float(rng.choice([0.0, 0.05, 0.3, 1.2]) * vmax)
    l2 = float(rng.choice([0.0, 0.05, 0.2, 0.5, 1.2]) * top)
    return kind, v, gs, PenaltyParams(l1, l2)
