"""File formats, synthetic data and evaluation metrics.

Text formats (UTF-8, ``\\n`` or ``\\r\\n``):

* matrices: comma-separated decimal rows, optional single header row;
* vectors (labels, responses): one decimal per line;
* groups: ``name weight idx idx ...`` per line, ``#`` comments; ``auto``
  as the weight means ``sqrt(group size)``.

Floats are written with 17 significant digits so they round-trip exactly.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    EmptyFile,
    InputError,
    LengthMismatch,
    ParseError,
    RaggedRows,
    SingleClassLabels,
    SpecInfeasible,
)
from .groups import GroupStructure, validate_groups

FLOAT_FMT = "%.17g"


def _fmt(value) -> str:
    return FLOAT_FMT % value


def _read_text(path) -> str:
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


@dataclass
class Dataset:
    A: np.ndarray
    b: np.ndarray
    feature_names: list | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] < 1 or self.A.shape[1] < 1:
            raise InputError(f"design matrix must be n x p with n, p >= 1, got {self.A.shape}")
        if self.b.shape != (self.A.shape[0],):
            raise LengthMismatch(f"{self.b.size} responses for {self.A.shape[0]} rows")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise InputError("dataset contains non-finite values")

    @property
    def is_classification(self) -> bool:
        return bool(np.all(np.isin(self.b, (-1.0, 1.0))))


def load_matrix_csv(path, return_header: bool = False):
    """Read a dense matrix from a comma-separated file.

    A first row containing any non-numeric cell is treated as a header.
    """
    text = _read_text(path)
    rows = [(i + 1, row) for i, row in enumerate(csv.reader(io.StringIO(text))) if row and any(c.strip() for c in row)]
    if not rows:
        raise EmptyFile(f"{path}: no data")
    header = None
    first_line, first = rows[0]
    if not all(_is_number(cell.strip()) for cell in first):
        header = [cell.strip() for cell in first]
        rows = rows[1:]
        if not rows:
            raise EmptyFile(f"{path}: header but no data rows")
    width = len(rows[0][1])
    if header is not None and len(header) != width:
        raise RaggedRows(f"header has {len(header)} columns, data has {width}", line=first_line)
    data = np.empty((len(rows), width))
    for r, (line, row) in enumerate(rows):
        if len(row) != width:
            raise RaggedRows(f"expected {width} columns, found {len(row)}", line=line)
        for c, cell in enumerate(row):
            try:
                data[r, c] = float(cell)
            except ValueError:
                raise ParseError(f"cannot parse {cell!r} as a number", line=line, column=c + 1) from None
    if return_header:
        return data, header
    return data


def save_matrix_csv(path, M, header=None) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header is not None:
            fh.write(",".join(header) + "\n")
        for row in M:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def load_vector(path) -> np.ndarray:
    """One decimal per non-empty line."""
    values = []
    for line_no, line in enumerate(_read_text(path).splitlines(), start=1):
        token = line.strip()
        if not token:
            continue
        try:
            values.append(float(token))
        except ValueError:
            raise ParseError(f"cannot parse {token!r} as a number", line=line_no) from None
    if not values:
        raise EmptyFile(f"{path}: no values")
    return np.asarray(values)


def save_vector(path, v) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for value in np.asarray(v, dtype=float).ravel():
            fh.write(_fmt(value) + "\n")


def load_groups(path, p: int) -> GroupStructure:
    """Parse a group file (``name weight idx idx ...`` per line)."""
    names, weights, groups = [], [], []
    for line_no, line in enumerate(_read_text(path).splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) < 3:
            raise ParseError("expected 'name weight idx [idx ...]'", line=line_no)
        name, weight_tok, idx_toks = tokens[0], tokens[1], tokens[2:]
        try:
            idx = [int(t) for t in idx_toks]
        except ValueError:
            bad = next(t for t in idx_toks if not t.lstrip("-").isdigit())
            raise ParseError(f"bad index {bad!r}", line=line_no) from None
        if weight_tok.lower() == "auto":
            weight = math.sqrt(len(idx))
        else:
            try:
                weight = float(weight_tok)
            except ValueError:
                raise ParseError(f"bad weight {weight_tok!r}", line=line_no) from None
        try:
            validate_groups([idx], [weight], p)
        except InputError as exc:
            raise type(exc)(f"line {line_no}: {exc}") from None
        names.append(name)
        weights.append(weight)
        groups.append(idx)
    if not groups:
        raise EmptyFile(f"{path}: no groups")
    return validate_groups(groups, weights, p, names=names)


def save_groups(path, gs: GroupStructure, auto_weights: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for i, grp in enumerate(gs.groups):
            name = gs.names[i] if gs.names is not None else f"g{i}"
            weight = "auto" if auto_weights else _fmt(gs.weights[i])
            fh.write(" ".join([name, weight, *map(str, grp.tolist())]) + "\n")


@dataclass(frozen=True)
class SynthSpec:
    """Chain-of-overlapping-groups regression problem.

    Group ``i`` covers ``[i * (group_size - overlap), ... + group_size)``.
    """

    p: int
    n: int
    g: int
    group_size: int
    overlap: int
    active_groups: int = 1
    noise_sigma: float = 0.0
    seed: int = 0

    @property
    def span(self) -> int:
        return self.g * (self.group_size - self.overlap) + self.overlap

    def validate(self):
        if min(self.p, self.n, self.g, self.group_size) < 1:
            raise SpecInfeasible("p, n, g and group_size must be positive")
        if not 0 <= self.overlap < self.group_size:
            raise SpecInfeasible("need 0 <= overlap < group_size")
        if not 0 <= self.active_groups <= self.g:
            raise SpecInfeasible("need 0 <= active_groups <= g")
        if not self.noise_sigma >= 0:
            raise SpecInfeasible("noise_sigma must be >= 0")
        if self.span > self.p:
            raise SpecInfeasible(f"chain of {self.g} groups spans {self.span} features > p={self.p}")


def chain_groups(g: int, group_size: int, overlap: int) -> list:
    stride = group_size - overlap
    return [list(range(i * stride, i * stride + group_size)) for i in range(g)]


def synth_overlap_dataset(spec: SynthSpec):
    """Seeded synthetic data ``(Dataset, GroupStructure, x_true)``.

    Three independent PCG64 streams are spawned from ``spec.seed``: one for
    the design matrix, one for the true coefficients and one for the noise.
    ``x_true`` is standard normal on the union of ``active_groups`` randomly
    chosen groups and zero elsewhere.
    """
    spec.validate()
    seq_A, seq_x, seq_noise = np.random.SeedSequence(spec.seed).spawn(3)
    raw = chain_groups(spec.g, spec.group_size, spec.overlap)
    gs = validate_groups(raw, [math.sqrt(spec.group_size)] * spec.g, spec.p,
                         names=[f"g{i}" for i in range(spec.g)])

    A = np.random.Generator(np.random.PCG64(seq_A)).standard_normal((spec.n, spec.p))
    rng_x = np.random.Generator(np.random.PCG64(seq_x))
    active = np.sort(rng_x.choice(spec.g, size=spec.active_groups, replace=False))
    support = np.zeros(spec.p, dtype=bool)
    for i in active:
        support[gs.groups[i]] = True
    x_true = np.zeros(spec.p)
    x_true[support] = rng_x.standard_normal(int(support.sum()))

    b = A @ x_true
    if spec.noise_sigma > 0:
        noise = np.random.Generator(np.random.PCG64(seq_noise)).standard_normal(spec.n)
        b = b + spec.noise_sigma * noise
    return Dataset(A, b), gs, x_true


def balanced_error_rate(predictions, labels) -> float:
    """Mean of the per-class misclassification rates for +/-1 labels."""
    pred = np.asarray(predictions, dtype=float).ravel()
    lab = np.asarray(labels, dtype=float).ravel()
    if pred.shape != lab.shape:
        raise LengthMismatch(f"{pred.size} predictions for {lab.size} labels")
    if not np.all(np.isin(lab, (-1.0, 1.0))) or not np.all(np.isin(pred, (-1.0, 1.0))):
        raise InputError("labels and predictions must be +1 or -1")
    pos, neg = lab == 1, lab == -1
    if not pos.any() or not neg.any():
        raise SingleClassLabels("both classes must be present in the labels")
    err_pos = np.mean(pred[pos] != 1)
    err_neg = np.mean(pred[neg] != -1)
    return float(0.5 * (err_pos + err_neg))


def predict_labels(A, x) -> np.ndarray:
    """Classify with the sign of ``A x`` (ties go to +1)."""
    return np.where(np.asarray(A) @ x >= 0, 1.0, -1.0)


def support_f1(x, x_true, tol: float = 0.0) -> float:
    est = np.abs(np.asarray(x)) > tol
    true = np.asarray(x_true) != 0
    tp = np.count_nonzero(est & true)
    if tp == 0:
        return 0.0
    precision = tp / np.count_nonzero(est)
    recall = tp / np.count_nonzero(true)
    return float(2 * precision * recall / (precision + recall))


def write_synth(out_dir, dataset: Dataset, gs: GroupStructure, x_true) -> dict:
    """Write ``A.csv``, ``b.txt``, ``groups.txt`` and ``xtrue.csv`` into ``out_dir``."""
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    paths = {
        "matrix": out / "A.csv",
        "labels": out / "b.txt",
        "groups": out / "groups.txt",
        "xtrue": out / "xtrue.csv",
    }
    save_matrix_csv(paths["matrix"], dataset.A)
    save_vector(paths["labels"], dataset.b)
    save_groups(paths["groups"], gs)
    save_matrix_csv(paths["xtrue"], np.asarray(x_true).reshape(-1, 1))
    return {k: str(v) for k, v in paths.items()}


def save_solution_csv(path_or_file, x) -> None:
    """Write the nonzero entries of ``x`` as ``index,value`` rows."""
    x = np.asarray(x, dtype=float)
    lines = ["index,value"] + [f"{i},{_fmt(x[i])}" for i in np.flatnonzero(x)]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
        return
    with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def load_solution_csv(path, p: int) -> np.ndarray:
    x = np.zeros(p)
    for line_no, line in enumerate(_read_text(path).splitlines(), start=1):
        line = line.strip()
        if not line or line == "index,value":
            continue
        try:
            idx, value = line.split(",")
            x[int(idx)] = float(value)
        except (ValueError, IndexError):
            raise ParseError(f"bad solution row {line!r}", line=line_no) from None
    return x
