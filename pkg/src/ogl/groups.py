"""Overlapping group structures and the sparse group penalty.

Groups are stored as sorted 0-based index arrays together with a flattened
CSR-like layout (``flat_idx``/``ptr``) that the proximal machinery uses for
vectorized per-group reductions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateIndex,
    EmptyGroup,
    IndexOutOfRange,
    InputError,
    LengthMismatch,
    NonpositiveWeight,
)


@dataclass(frozen=True)
class PenaltyParams:
    """Regularization strengths: ``lambda1`` on the l1 term, ``lambda2`` on the groups."""

    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise InputError(f"{name} must be finite and >= 0, got {value!r}")
            object.__setattr__(self, name, value)

    def scaled(self, factor: float) -> "PenaltyParams":
        return PenaltyParams(self.lambda1 * factor, self.lambda2 * factor)


@dataclass(frozen=True, eq=False)
class GroupStructure:
    """Validated collection of (possibly overlapping) feature groups.

    Use :func:`validate_groups` to build one from raw input; the constructor
    assumes its arguments are already clean.

    Attributes
    ----------
    p : int
        Number of features.
    groups : tuple of ndarray
        Sorted int64 index arrays, one per group.
    weights : ndarray
        Positive group weights, shape (g,).
    names : tuple of str or None
    """

    p: int
    groups: tuple
    weights: np.ndarray
    names: tuple | None = None
    flat_idx: np.ndarray = field(init=False, repr=False)
    ptr: np.ndarray = field(init=False, repr=False)
    sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        sizes = np.array([len(grp) for grp in self.groups], dtype=np.int64)
        ptr = np.zeros(len(self.groups) + 1, dtype=np.int64)
        np.cumsum(sizes, out=ptr[1:])
        if self.groups:
            flat = np.concatenate(self.groups).astype(np.int64)
        else:
            flat = np.zeros(0, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=float)
        for arr in (sizes, ptr, flat, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "flat_idx", flat)
        object.__setattr__(self, "ptr", ptr)
        object.__setattr__(self, "sizes", sizes)

    @property
    def g(self) -> int:
        return len(self.groups)

    @property
    def nnz(self) -> int:
        """Total number of (feature, group) memberships."""
        return int(self.ptr[-1])

    def group_norms(self, x: np.ndarray) -> np.ndarray:
        """Euclidean norm of ``x`` restricted to every group."""
        if self.g == 0:
            return np.zeros(0)
        return np.sqrt(np.add.reduceat(x[self.flat_idx] ** 2, self.ptr[:-1]))

    def membership_counts(self) -> np.ndarray:
        """How many groups each feature belongs to."""
        return np.bincount(self.flat_idx, minlength=self.p)

    def __len__(self):
        return self.g


def validate_groups(
    raw_groups: Sequence[Sequence[int]],
    weights: Sequence[float],
    p: int,
    names: Sequence[str] | None = None,
) -> GroupStructure:
    """Check raw group definitions and return a :class:`GroupStructure`.

    Indices are sorted; they must lie in ``[0, p)`` and be unique within a
    group. Groups may overlap and need not cover every feature.
    """
    p = int(p)
    if p <= 0:
        raise InputError(f"p must be a positive integer, got {p}")
    raw_groups = list(raw_groups)
    weights = list(weights)
    if len(weights) != len(raw_groups):
        raise LengthMismatch(
            f"{len(weights)} weights given for {len(raw_groups)} groups"
        )
    if names is not None:
        names = tuple(str(n) for n in names)
        if len(names) != len(raw_groups):
            raise LengthMismatch(f"{len(names)} names given for {len(raw_groups)} groups")

    groups = []
    for i, raw in enumerate(raw_groups):
        idx = np.asarray(list(raw))
        if idx.size == 0:
            raise EmptyGroup(f"group {i} is empty")
        if not np.issubdtype(idx.dtype, np.integer):
            if not np.all(np.equal(np.mod(idx, 1), 0)):
                raise InputError(f"group {i} has non-integer indices")
        idx = idx.astype(np.int64)
        if idx.min() < 0 or idx.max() >= p:
            bad = idx[(idx < 0) | (idx >= p)][0]
            raise IndexOutOfRange(f"group {i}: index {bad} outside [0, {p})")
        idx = np.sort(idx)
        if np.any(idx[1:] == idx[:-1]):
            dup = idx[1:][idx[1:] == idx[:-1]][0]
            raise DuplicateIndex(f"group {i}: index {dup} repeated")
        groups.append(idx)

    w = np.asarray(weights, dtype=float)
    if w.size and (not np.all(np.isfinite(w)) or np.any(w <= 0)):
        bad = int(np.flatnonzero(~np.isfinite(w) | (w <= 0))[0])
        raise NonpositiveWeight(f"group {bad}: weight {w[bad]!r} is not a positive finite number")
    return GroupStructure(p=p, groups=tuple(groups), weights=w, names=names)


def sqrt_size_weights(raw_groups) -> list[float]:
    """The usual ``w_i = sqrt(|G_i|)`` weighting."""
    return [math.sqrt(len(grp)) for grp in raw_groups]


def penalty_value(x, gs: GroupStructure, params: PenaltyParams) -> float:
    """``lambda1 * ||x||_1 + lambda2 * sum_i w_i ||x_{G_i}||``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (gs.p,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({gs.p},)")
    value = 0.0
    if params.lambda1:
        value += params.lambda1 * float(np.abs(x).sum())
    if params.lambda2 and gs.g:
        value += params.lambda2 * float(gs.weights @ gs.group_norms(x))
    return value


@dataclass(frozen=True)
class GroupStats:
    g: int
    p: int
    mean_size: float
    max_size: int
    covered: int
    mean_frequency: float

    def as_dict(self):
        return {
            "g": self.g,
            "p": self.p,
            "mean_size": self.mean_size,
            "max_size": self.max_size,
            "covered": self.covered,
            "mean_frequency": self.mean_frequency,
        }


def group_stats(gs: GroupStructure) -> GroupStats:
    counts = gs.membership_counts()
    covered = int(np.count_nonzero(counts))
    return GroupStats(
        g=gs.g,
        p=gs.p,
        mean_size=float(gs.sizes.mean()) if gs.g else 0.0,
        max_size=int(gs.sizes.max()) if gs.g else 0,
        covered=covered,
        mean_frequency=float(counts[counts > 0].mean()) if covered else 0.0,
    )
