"""Negative log-likelihood of 1-bit observations and its gradients.

The per-entry loss is ``g(x; +1) = -log F(x)`` and ``g(x; -1) = -log(1 - F(x))``.
Observations are compressed to distinct cells with counts of each sign, so
the average loss and its sparse gradient touch each observed cell once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DomainError
from .factors import FactoredPoint
from .linkmodel import LinkModel
from .sampling import ObservationSet


def pointwise_loss(model: LinkModel, x: float, y: int) -> float:
    if y not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {y}")
    with np.errstate(divide="ignore"):
        v = -float(model.log_cdf(x) if y == 1 else model.log_sf(x))
    if not math.isfinite(v):
        raise OverflowError(f"F({x}) is numerically {'0' if y == 1 else '1'}; loss is infinite")
    return v


def pointwise_grad(model: LinkModel, x: float, y: int) -> float:
    """Derivative of ``pointwise_loss`` in ``x``."""
    if y not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {y}")
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        v = -float(model.pdf_over_cdf(x)) if y == 1 else float(model.pdf_over_sf(x))
    if not math.isfinite(v):
        raise OverflowError(f"loss gradient at x={x} is not finite")
    return v


class ObservedCells:
    """Distinct observed cells with per-sign counts, plus a reusable sparse pattern."""

    def __init__(self, obs: ObservationSet):
        if len(obs) == 0:
            raise DomainError("empty observation set")
        self.d1, self.d2 = obs.d1, obs.d2
        self.n = len(obs)
        flat = obs.rows * obs.d2 + obs.cols
        cells, inverse = np.unique(flat, return_inverse=True)
        pos = obs.signs > 0
        self.n_pos = np.bincount(inverse[pos], minlength=cells.size).astype(float)
        self.n_neg = np.bincount(inverse[~pos], minlength=cells.size).astype(float)
        self.rows, self.cols = np.divmod(cells, obs.d2)
        # cells are sorted row-major, which is already CSR order
        self._G = sparse.csr_matrix(
            (np.zeros(cells.size), (self.rows, self.cols)), shape=(self.d1, self.d2)
        )
        self._G.sum_duplicates()

    def __len__(self):
        return int(self.rows.size)

    def entries(self, point: FactoredPoint) -> np.ndarray:
        return np.einsum("ij,ij->i", point.U[self.rows], point.V[self.cols])

    def loss_and_grad(self, model: LinkModel, x: np.ndarray):
        """Average loss and per-cell derivatives ``d loss / d M_ij`` at entries ``x``."""
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            lp = np.where(self.n_pos > 0, -model.log_cdf(x) * self.n_pos, 0.0)
            ln = np.where(self.n_neg > 0, -model.log_sf(x) * self.n_neg, 0.0)
            gp = np.where(self.n_pos > 0, model.pdf_over_cdf(x) * self.n_pos, 0.0)
            gn = np.where(self.n_neg > 0, model.pdf_over_sf(x) * self.n_neg, 0.0)
        value = float((lp.sum() + ln.sum()) / self.n)
        return value, (gn - gp) / self.n

    def loss(self, model: LinkModel, x: np.ndarray) -> float:
        with np.errstate(divide="ignore"):
            lp = np.where(self.n_pos > 0, -model.log_cdf(x) * self.n_pos, 0.0)
            ln = np.where(self.n_neg > 0, -model.log_sf(x) * self.n_neg, 0.0)
        return float((lp.sum() + ln.sum()) / self.n)

    def gradient_matrix(self, grad: np.ndarray) -> sparse.csr_matrix:
        G = self._G.copy()
        G.data = np.asarray(grad, dtype=float).copy()
        return G


def as_cells(obs) -> ObservedCells:
    return obs if isinstance(obs, ObservedCells) else ObservedCells(obs)


@dataclass(frozen=True, eq=False)
class LossEvaluation:
    """Average loss with its gradient in ``M`` restricted to observed cells."""

    value: float
    rows: np.ndarray
    cols: np.ndarray
    grad: np.ndarray
    cells: ObservedCells

    @property
    def grad_sparse(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.grad.tolist()))

    def gradient_matrix(self) -> sparse.csr_matrix:
        return self.cells.gradient_matrix(self.grad)


def average_loss(obs, point: FactoredPoint, model: LinkModel) -> LossEvaluation:
    """``(1/n) sum_t g((U V^T)_{i_t j_t}; y_t)`` and its sparse gradient."""
    cells = as_cells(obs)
    if point.shape != (cells.d1, cells.d2):
        raise DomainError(f"factor shapes {point.shape} do not match observations {(cells.d1, cells.d2)}")
    value, grad = cells.loss_and_grad(model, cells.entries(point))
    if not math.isfinite(value) or not np.isfinite(grad).all():
        raise OverflowError("likelihood overflowed at the current point")
    return LossEvaluation(value, cells.rows, cells.cols, grad, cells)


def factor_gradient(loss_eval: LossEvaluation, point: FactoredPoint):
    """Gradients ``(G V, G^T U)`` of the loss in the factors."""
    G = loss_eval.gradient_matrix()
    return G @ point.V, G.T @ point.U
