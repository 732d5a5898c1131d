"""Max-norm and weighted trace-norm constrained maximum likelihood estimators."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DomainError
from .factors import FactoredPoint
from .linkmodel import LinkModel
from .norms import inf_norm, maxnorm_certificate, trace_norm
from .objective import as_cells
from .sampling import SamplingDistribution, empirical_marginals, smoothed_empirical_marginals
from .solver import (
    SolverConfig,
    SolverMode,
    SolverTrace,
    escalate,
    initial_point,
    projected_descent,
    solve_fixed_k,
)


class EstimatorKind(str, Enum):
    MAX_NORM = "max_norm"
    WEIGHTED_TRACE = "weighted_trace"


class MarginalsSource(str, Enum):
    TRUE = "true"
    EMPIRICAL = "empirical"
    SMOOTHED = "smoothed_empirical"


@dataclass(frozen=True)
class EstimatorSpec:
    """What to estimate and how.

    ``radius`` is the max-norm bound R for ``MAX_NORM`` and the weighted
    trace-norm budget (``alpha * sqrt(r)`` in the usual parametrisation) for
    ``WEIGHTED_TRACE``.  Setting both ``k0`` and ``k_max`` switches the
    max-norm estimator from a fixed-width solve to rank escalation.
    """

    kind: EstimatorKind
    alpha: float
    radius: float
    solver: SolverConfig = field(default_factory=SolverConfig)
    marginals_source: MarginalsSource = MarginalsSource.TRUE
    k0: Optional[int] = None
    k_max: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EstimatorKind(self.kind))
        object.__setattr__(self, "marginals_source", MarginalsSource(self.marginals_source))
        if not (self.alpha > 0 and self.radius > 0):
            raise DomainError("estimator alpha and radius must be positive")
        if (self.k0 is None) != (self.k_max is None):
            raise DomainError("give both k0 and k_max for rank escalation, or neither")


@dataclass
class Diagnostics:
    objective: float
    k_used: int
    iterations: int
    inf_norm: float
    maxnorm_certificate: float
    weighted_trace_bound: Optional[float] = None
    budget: Optional[float] = None
    trace: Optional[SolverTrace] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("trace")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def max_norm_mle(obs, model: LinkModel, spec: EstimatorSpec):
    """Minimise the average 1-bit loss over ``||M||_inf <= alpha``, ``||M||_max <= R``.

    Returns ``(M_hat, point, diagnostics)``.
    """
    if spec.kind is not EstimatorKind.MAX_NORM:
        raise DomainError("max_norm_mle needs a MAX_NORM spec")
    cells = as_cells(obs)
    config = replace(spec.solver, R=spec.radius, alpha=spec.alpha)
    if spec.k0 is not None:
        res = escalate(cells, model, config, spec.k0, spec.k_max)
        point, k_used, iterations, trace = res.point, res.k_used, res.iterations, res.trace
    else:
        point, trace = solve_fixed_k(obs if config.mode is SolverMode.STOCHASTIC else cells, model, config)
        k_used, iterations = config.k, trace.iterations
    M = point.matrix()
    diag = Diagnostics(
        objective=cells.loss(model, cells.entries(point)),
        k_used=k_used,
        iterations=iterations,
        inf_norm=inf_norm(M),
        maxnorm_certificate=maxnorm_certificate(point),
        trace=trace,
    )
    return M, point, diag


def resolve_marginals(obs, source: MarginalsSource, dist: Optional[SamplingDistribution]):
    source = MarginalsSource(source)
    if source is MarginalsSource.TRUE:
        if dist is None:
            raise DomainError("true marginals requested but no sampling distribution given")
        pr, pc = dist.row_marginals(), dist.col_marginals()
        if (pr <= 0).any() or (pc <= 0).any():
            raise DomainError("sampling distribution has a zero row or column marginal")
        return pr, pc
    if source is MarginalsSource.EMPIRICAL:
        return empirical_marginals(obs)
    return smoothed_empirical_marginals(obs)


def _balanced(Uw: np.ndarray, Vw: np.ndarray):
    """Refactor ``Uw Vw^T`` so that half the squared Frobenius mass equals its trace norm."""
    Qu, Ru = np.linalg.qr(Uw)
    Qv, Rv = np.linalg.qr(Vw)
    A, s, Bt = np.linalg.svd(Ru @ Rv.T)
    root = np.sqrt(s)
    return Qu @ (A * root), Qv @ (Bt.T * root), float(s.sum())


def weighted_trace_projector(row_w: np.ndarray, col_w: np.ndarray, budget: float, alpha: float):
    """Feasibility map for ``||diag(row_w) M diag(col_w)||_* <= budget``, ``||M||_inf <= alpha``.

    The trace-norm term is bounded by ``0.5 (||U_w||_F^2 + ||V_w||_F^2)`` with
    reweighted factors.  When that bound exceeds the budget the factors are
    first rebalanced (product unchanged, bound becomes exact) and then, if
    still over budget, scaled by ``sqrt(budget / bound)``.
    """
    positive = bool((row_w > 0).all() and (col_w > 0).all())

    def project(p: FactoredPoint):
        U, V = p.U, p.V
        Uw, Vw = row_w[:, None] * U, col_w[:, None] * V
        bound = 0.5 * (float(np.sum(Uw * Uw)) + float(np.sum(Vw * Vw)))
        if bound > budget and positive:
            Uw, Vw, bound = _balanced(Uw, Vw)
            U, V = Uw / row_w[:, None], Vw / col_w[:, None]
            bound = 0.5 * (float(np.sum(Uw * Uw)) + float(np.sum(Vw * Vw)))
        if bound > budget:
            c = math.sqrt(budget / bound)
            U, V, bound = U * c, V * c, budget
        m = float(np.abs(U @ V.T).max(initial=0.0))
        if m > alpha:
            c = math.sqrt(alpha / m)
            U, V = U * c, V * c
            bound, m = bound * c * c, alpha
        return FactoredPoint(U, V), max(bound - budget, m - alpha)

    return project


def weighted_trace_mle(obs, model: LinkModel, spec: EstimatorSpec, dist: Optional[SamplingDistribution] = None):
    """Minimise the average 1-bit loss over ``||M||_inf <= alpha`` and a weighted trace-norm budget.

    Marginals come from ``dist`` (source ``TRUE``) or from the observed
    indices.  Returns ``(M_hat, point, diagnostics)``.
    """
    if spec.kind is not EstimatorKind.WEIGHTED_TRACE:
        raise DomainError("weighted_trace_mle needs a WEIGHTED_TRACE spec")
    cells = as_cells(obs)
    pr, pc = resolve_marginals(obs, spec.marginals_source, dist)
    row_w, col_w = np.sqrt(pr), np.sqrt(pc)
    config = replace(spec.solver, alpha=spec.alpha, R=spec.radius)
    project = weighted_trace_projector(row_w, col_w, spec.radius, spec.alpha)
    rng = np.random.default_rng(config.seed)
    start = initial_point(cells.d1, cells.d2, config, rng)
    point, trace = projected_descent(cells, model, start, config, project)
    M = point.matrix()
    diag = Diagnostics(
        objective=cells.loss(model, cells.entries(point)),
        k_used=config.k,
        iterations=trace.iterations,
        inf_norm=inf_norm(M),
        maxnorm_certificate=maxnorm_certificate(point),
        weighted_trace_bound=trace_norm(row_w[:, None] * M * col_w[None, :]),
        budget=spec.radius,
        trace=trace,
    )
    return M, point, diag


def estimate(obs, model: LinkModel, spec: EstimatorSpec, dist: Optional[SamplingDistribution] = None):
    """Run whichever estimator ``spec`` names."""
    if spec.kind is EstimatorKind.MAX_NORM:
        return max_norm_mle(obs, model, spec)
    return weighted_trace_mle(obs, model, spec, dist)
