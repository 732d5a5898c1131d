"""Sampling distributions over index pairs and 1-bit observation sets.

Indices are zero-based throughout.  Every sampler takes an explicit
``numpy.random.Generator``; nothing here touches global RNG state.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, SamplingError
from .linkmodel import LinkModel


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    """A probability matrix ``probs[k, l]`` over the cells of a d1 x d2 grid."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or p.size == 0:
            raise DomainError("sampling distribution needs a nonempty 2-d probability grid")
        if not np.all(np.isfinite(p)) or (p < 0).any():
            raise DomainError("sampling probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-10:
            raise DomainError(f"sampling probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def d1(self) -> int:
        return self.probs.shape[0]

    @property
    def d2(self) -> int:
        return self.probs.shape[1]

    @property
    def shape(self):
        return self.probs.shape

    def row_marginals(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def col_marginals(self) -> np.ndarray:
        return self.probs.sum(axis=0)

    def support_size(self) -> int:
        return int(np.count_nonzero(self.probs))

    def to_csv(self, path) -> None:
        np.savetxt(path, self.probs, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "SamplingDistribution":
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))


def uniform(d1: int, d2: int) -> SamplingDistribution:
    if d1 < 1 or d2 < 1:
        raise DomainError(f"dimensions must be positive, got ({d1}, {d2})")
    return SamplingDistribution(np.full((d1, d2), 1.0 / (d1 * d2)))


def product_marginals(row_weights, col_weights) -> SamplingDistribution:
    """Product distribution with the given (unnormalised) row and column weights."""
    r = np.asarray(row_weights, dtype=float)
    c = np.asarray(col_weights, dtype=float)
    for name, w in (("row", r), ("column", c)):
        if w.ndim != 1 or w.size == 0 or (w < 0).any() or not np.isfinite(w).all():
            raise DomainError(f"{name} weights must be a nonempty nonnegative vector")
        if w.sum() <= 0:
            raise DomainError(f"{name} weights are all zero")
    return SamplingDistribution(np.outer(r / r.sum(), c / c.sum()))


def mu_condition(dist: SamplingDistribution) -> float:
    """Smallest mu with every cell probability at least 1 / (mu d1 d2); inf if a cell is zero."""
    pmin = float(dist.probs.min())
    if pmin <= 0.0:
        return math.inf
    return 1.0 / (dist.d1 * dist.d2 * pmin)


def _as_pairs(flat: np.ndarray, d2: int) -> np.ndarray:
    return np.stack(np.divmod(flat, d2), axis=1).astype(np.int64)


def draw_with_replacement(dist: SamplingDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. draws from ``dist`` as an ``(n, 2)`` integer array of (row, col)."""
    if n < 1:
        raise SamplingError(f"need at least one draw, got n={n}")
    flat = rng.choice(dist.probs.size, size=n, p=dist.probs.ravel())
    return _as_pairs(flat, dist.d2)


def draw_without_replacement(dist: SamplingDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` distinct cells drawn sequentially from ``dist``, rejecting repeats.

    Draws are taken in batches from ``dist`` restricted to the cells not yet
    selected; within a batch only first occurrences of new cells are kept, in
    draw order.  Restricting to unselected cells is the same law as plain
    rejection of repeats, it just never stalls once most of the mass is used.
    Under uniform ``dist`` the result is a uniformly random ordered n-subset.
    """
    if n < 1:
        raise SamplingError(f"need at least one draw, got n={n}")
    if n > dist.support_size():
        raise SamplingError(f"cannot draw {n} distinct cells from a support of {dist.support_size()}")
    p = dist.probs.ravel().copy()
    taken = np.zeros(p.size, dtype=bool)
    out = []
    have = 0
    while have < n:
        need = n - have
        q = np.where(taken, 0.0, p)
        q /= q.sum()
        batch = rng.choice(p.size, size=max(2 * need, 16), p=q)
        _, first = np.unique(batch, return_index=True)
        fresh = batch[np.sort(first)][:need]
        taken[fresh] = True
        out.append(fresh)
        have += fresh.size
    return _as_pairs(np.concatenate(out), dist.d2)


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Multiset of sign observations ``(rows[t], cols[t], signs[t])`` on a d1 x d2 grid."""

    d1: int
    d2: int
    rows: np.ndarray
    cols: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        signs = np.asarray(self.signs, dtype=np.int64).ravel()
        if not (rows.size == cols.size == signs.size):
            raise DomainError("rows, cols and signs must have equal length")
        if self.d1 < 1 or self.d2 < 1:
            raise DomainError("dimensions must be positive")
        if rows.size and (rows.min() < 0 or rows.max() >= self.d1 or cols.min() < 0 or cols.max() >= self.d2):
            raise DomainError("observation index outside the matrix")
        if not np.isin(signs, (-1, 1)).all():
            raise DomainError("signs must be +1 or -1")
        for name, arr in (("rows", rows), ("cols", cols), ("signs", signs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.rows.size)

    @property
    def shape(self):
        return (self.d1, self.d2)

    def head(self, n: int) -> "ObservationSet":
        """The first ``n`` observations; prefixes of a sequential draw are valid draws."""
        return ObservationSet(self.d1, self.d2, self.rows[:n], self.cols[:n], self.signs[:n])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "sign"])
            w.writerows(zip(self.rows.tolist(), self.cols.tolist(), self.signs.tolist()))

    @classmethod
    def from_csv(cls, path, d1: int, d2: int) -> "ObservationSet":
        with open(Path(path), newline="") as fh:
            reader = csv.DictReader(fh)
            data = [(int(r["row"]), int(r["col"]), int(r["sign"])) for r in reader]
        arr = np.array(data, dtype=np.int64).reshape(-1, 3)
        return cls(d1, d2, arr[:, 0], arr[:, 1], arr[:, 2])


def generate_observations(truth, model: LinkModel, indices, rng: np.random.Generator) -> ObservationSet:
    """Emit ``+1`` at each listed cell with probability ``F(truth[i, j])``.

    Repeated cells receive independent signs.  One uniform variate is consumed
    per index, so the same stream yields coupled signs across link models.
    """
    M = np.asarray(truth, dtype=float)
    if M.ndim != 2 or not np.isfinite(M).all():
        raise DomainError("truth must be a finite 2-d matrix")
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, 2)
    rows, cols = idx[:, 0], idx[:, 1]
    u = rng.random(rows.size)
    signs = np.where(u < model.cdf(M[rows, cols]), 1, -1)
    return ObservationSet(M.shape[0], M.shape[1], rows, cols, signs)


def empirical_marginals(obs: ObservationSet):
    """Row and column sampling frequencies of the observed indices."""
    n = len(obs)
    if n == 0:
        raise SamplingError("empirical marginals of an empty observation set")
    pr = np.bincount(obs.rows, minlength=obs.d1) / n
    pc = np.bincount(obs.cols, minlength=obs.d2) / n
    return pr, pc


def smoothed_empirical_marginals(obs: ObservationSet):
    """Empirical marginals averaged with the uniform ones; strictly positive."""
    pr, pc = empirical_marginals(obs)
    return 0.5 * (pr + 1.0 / obs.d1), 0.5 * (pc + 1.0 / obs.d2)
