"""Factored projected gradient descent for max-norm constrained 1-bit likelihoods.

The matrix is kept as ``U @ V.T`` with ``U`` of shape (d1, k) and ``V`` of
shape (d2, k).  Each step moves both factors along the likelihood gradient
with step ``tau / sqrt(t + 1)``, rescales any row whose squared l2 norm
exceeds ``R`` back onto that sphere, and finally shrinks both factors
together if an entry of the product exceeds ``alpha`` in magnitude.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, SolverError
from .factors import FactoredPoint
from .linkmodel import LinkModel
from .objective import ObservedCells, as_cells

WINDOW = 10

# local-minimum test used by rank escalation
ESCAPE_DIRECTIONS = 20
ESCAPE_STEP = 1e-3
STATIONARITY_TOL = 1e-4
DESCENT_TOL = 1e-13


class SolverMode(str, Enum):
    FULL = "full"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class SolverConfig:
    tau: float = 1.0
    max_iters: int = 2000
    tol: float = 1e-6
    k: int = 2
    R: float = 1.0
    alpha: float = 1.0
    mode: SolverMode = SolverMode.FULL
    seed: int = 0
    window: int = WINDOW

    def __post_init__(self):
        object.__setattr__(self, "mode", SolverMode(self.mode))
        for name in ("tau", "tol", "R", "alpha"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"solver {name} must be positive, got {v}")
        if self.k < 1:
            raise DomainError(f"factor width k must be at least 1, got {self.k}")
        if self.max_iters < 0 or self.window < 1:
            raise DomainError("max_iters must be nonnegative and window positive")

    @classmethod
    def from_config(cls, cfg: dict) -> "SolverConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in cfg.items() if k in known})

    def to_config(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d["mode"] = self.mode.value
        return d


@dataclass
class SolverTrace:
    """Per-iteration objective and feasibility slack (nonpositive when feasible)."""

    objective: list = field(default_factory=list)
    slack: list = field(default_factory=list)
    iterations: int = 0

    def __len__(self):
        return len(self.objective)

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(np.asarray(self.objective))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "feasibility_slack"])
            for i, (f, s) in enumerate(zip(self.objective, self.slack)):
                w.writerow([i, repr(float(f)), repr(float(s))])


# -- projections -------------------------------------------------------------


def _row_ball(A: np.ndarray, R: float):
    sq = np.einsum("ij,ij->i", A, A)
    over = sq > R
    if not over.any():
        return A, float(sq.max(initial=0.0))
    scale = np.ones_like(sq)
    scale[over] = math.sqrt(R) / np.sqrt(sq[over])
    A = A * scale[:, None]
    return A, float(np.einsum("ij,ij->i", A, A).max())


def project_factor_ball(point: FactoredPoint, R: float) -> FactoredPoint:
    """Rescale every factor row with squared norm above ``R`` onto the sphere of radius sqrt(R)."""
    if not R > 0:
        raise DomainError(f"R must be positive, got {R}")
    U, _ = _row_ball(point.U, R)
    V, _ = _row_ball(point.V, R)
    return FactoredPoint(U, V)


def project_inf(point: FactoredPoint, alpha: float) -> FactoredPoint:
    """Shrink both factors by ``sqrt(alpha / m)`` when ``m = ||U V^T||_inf`` exceeds ``alpha``."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    m = float(np.abs(point.matrix()).max(initial=0.0))
    if m <= alpha:
        return point
    c = math.sqrt(alpha / m)
    return FactoredPoint(point.U * c, point.V * c)


def project_maxnorm(point: FactoredPoint, R: float, alpha: float):
    """Both projections in solver order; returns the point and its feasibility slack."""
    U, su = _row_ball(point.U, R)
    V, sv = _row_ball(point.V, R)
    m = float(np.abs(U @ V.T).max(initial=0.0))
    if m > alpha:
        c = math.sqrt(alpha / m)
        U, V = U * c, V * c
        su, sv, m = su * c * c, sv * c * c, alpha
    return FactoredPoint(U, V), max(su - R, sv - R, m - alpha)


def feasibility_slack(point: FactoredPoint, R: float, alpha: float) -> float:
    su = float(np.einsum("ij,ij->i", point.U, point.U).max(initial=0.0))
    sv = float(np.einsum("ij,ij->i", point.V, point.V).max(initial=0.0))
    m = float(np.abs(point.matrix()).max(initial=0.0))
    return max(su - R, sv - R, m - alpha)


def initial_point(d1: int, d2: int, config: SolverConfig, rng: np.random.Generator) -> FactoredPoint:
    """Small uniform factors, projected onto the feasible set."""
    w = 0.1 * math.sqrt(config.R / config.k)
    U = rng.uniform(-w, w, size=(d1, config.k))
    V = rng.uniform(-w, w, size=(d2, config.k))
    return project_maxnorm(FactoredPoint(U, V), config.R, config.alpha)[0]


# -- full-gradient descent ---------------------------------------------------

Projector = Callable[[FactoredPoint], "tuple[FactoredPoint, float]"]


def projected_descent(
    cells: ObservedCells,
    model: LinkModel,
    start: FactoredPoint,
    config: SolverConfig,
    project: Projector,
):
    """Diminishing-step projected gradient loop shared by the estimators.

    Returns the best feasible iterate seen and the trace.  Stops after
    ``max_iters`` steps or once the best objective has improved by a relative
    amount below ``tol`` over the last ``window`` iterations.
    """
    x, slack = project(start)
    trace = SolverTrace()
    best, best_f = x, math.inf
    best_hist = []
    for t in range(config.max_iters + 1):
        f, g = cells.loss_and_grad(model, cells.entries(x))
        if not math.isfinite(f) or not np.isfinite(g).all():
            raise SolverError(f"objective is not finite at iteration {t}", iteration=t)
        trace.objective.append(f)
        trace.slack.append(slack)
        if f < best_f:
            best, best_f = x, f
        best_hist.append(best_f)
        trace.iterations = t
        if t == config.max_iters:
            break
        if t >= config.window:
            ref = best_hist[t - config.window]
            if ref - best_f < config.tol * max(abs(ref), 1e-300):
                break
        G = cells.gradient_matrix(g)
        step = config.tau / math.sqrt(t + 1)
        x, slack = project(FactoredPoint(x.U - step * (G @ x.V), x.V - step * (G.T @ x.U)))
    return best, trace


def _maxnorm_projector(config: SolverConfig) -> Projector:
    return lambda p: project_maxnorm(p, config.R, config.alpha)


def pgd_solve(obs, model: LinkModel, config: SolverConfig, init: Optional[FactoredPoint] = None):
    """Minimise the average 1-bit loss over ``||U||_{2,inf}^2, ||V||_{2,inf}^2 <= R``, ``||UV^T||_inf <= alpha``.

    Returns ``(point, trace)`` where ``point`` is the best feasible iterate.
    """
    cells = as_cells(obs)
    if init is None:
        init = initial_point(cells.d1, cells.d2, config, np.random.default_rng(config.seed))
    elif init.shape != (cells.d1, cells.d2):
        raise DomainError("initial point does not match the observation grid")
    return projected_descent(cells, model, init, config, _maxnorm_projector(config))


# -- stochastic variant --------------------------------------------------------


def sgd_solve(obs, model: LinkModel, config: SolverConfig, init: Optional[FactoredPoint] = None) -> FactoredPoint:
    """Stochastic gradient variant: one observation, two factor rows per iteration.

    At step ``t`` (from 1) a uniformly chosen observation ``(i, j, y)`` moves
    ``u_i`` and ``v_j`` by ``tau / sqrt(t)`` times the pointwise gradient; each
    row is pulled back to squared norm ``R`` if needed, and the pair is shrunk
    by ``sqrt(alpha / |u_i . v_j|)`` if that product exceeds ``alpha``.  The
    pairwise check does not bound entries at other cells, so the returned
    point gets one global entrywise projection.
    """
    if config.mode is not SolverMode.STOCHASTIC:
        raise DomainError("sgd_solve needs a config with mode='stochastic'")
    if len(obs) == 0:
        raise DomainError("empty observation set")
    rng = np.random.default_rng(config.seed)
    if init is None:
        init = initial_point(obs.d1, obs.d2, config, rng)
    U, V = init.U.copy(), init.V.copy()
    rows, cols, signs = obs.rows, obs.cols, obs.signs
    picks = rng.integers(len(obs), size=config.max_iters)
    R, alpha, tau = config.R, config.alpha, config.tau
    for t in range(1, config.max_iters + 1):
        s = picks[t - 1]
        i, j = rows[s], cols[s]
        u, v = U[i], V[j]
        x = float(u @ v)
        if signs[s] > 0:
            g = -float(model.pdf_over_cdf(x))
        else:
            g = float(model.pdf_over_sf(x))
        if not math.isfinite(g):
            raise SolverError(f"pointwise gradient is not finite at iteration {t}", iteration=t)
        step = tau / math.sqrt(t)
        un = u - (step * g) * v
        vn = v - (step * g) * u
        nu = float(un @ un)
        if nu > R:
            un *= math.sqrt(R / nu)
        nv = float(vn @ vn)
        if nv > R:
            vn *= math.sqrt(R / nv)
        z = abs(float(un @ vn))
        if z > alpha:
            c = math.sqrt(alpha / z)
            un *= c
            vn *= c
        U[i] = un
        V[j] = vn
    return project_inf(FactoredPoint(U, V), alpha)


def solve_fixed_k(obs, model: LinkModel, config: SolverConfig, init: Optional[FactoredPoint] = None):
    """Dispatch on ``config.mode``; always returns ``(point, trace)``."""
    if config.mode is SolverMode.STOCHASTIC:
        point = sgd_solve(obs, model, config, init)
        cells = as_cells(obs)
        trace = SolverTrace([cells.loss(model, cells.entries(point))], [0.0], config.max_iters)
        return point, trace
    return pgd_solve(obs, model, config, init)


# -- rank escalation -----------------------------------------------------------


def _with_column_direction(point: FactoredPoint, a: np.ndarray, b: np.ndarray, eps: float) -> FactoredPoint:
    U, V = point.U.copy(), point.V.copy()
    U[:, -1] += eps * a
    V[:, -1] += eps * b
    return FactoredPoint(U, V)


def local_minimum_test(
    cells: ObservedCells,
    model: LinkModel,
    injected: FactoredPoint,
    config: SolverConfig,
    project: Projector,
    rng: np.random.Generator,
):
    """Decide whether ``injected`` (last column zero) looks like a local minimum.

    Two checks, both required:

    * stationarity: one projected gradient step of size ``tau`` moves the
      product ``U V^T`` by at most ``1e-4 (1 + |f|)`` per unit step (gradient
      mapping measured on the product, so the factorization gauge is ignored);
    * no escape through the new column: perturbing only the zero column by
      ``1e-3`` along 20 random unit directions, plus the leading singular pair
      of the negative gradient matrix, never lowers the objective.

    Returns ``(is_minimum, escape_point)``; ``escape_point`` is the best
    perturbed point found when the test fails, else ``None``.
    """
    f0, g = cells.loss_and_grad(model, cells.entries(injected))
    G = cells.gradient_matrix(g)
    tau = config.tau
    moved, _ = project(FactoredPoint(injected.U - tau * (G @ injected.V), injected.V - tau * (G.T @ injected.U)))
    mapping = float(np.linalg.norm(moved.matrix() - injected.matrix())) / tau
    d1, d2 = injected.shape

    directions = []
    if G.nnz:
        dense = G.toarray()
        A, s, Bt = np.linalg.svd(dense)
        if s[0] > 0:
            a, b = -A[:, 0], Bt[0]
            nrm = math.sqrt(a @ a + b @ b)
            directions.append((a / nrm, b / nrm))
    for _ in range(ESCAPE_DIRECTIONS):
        w = rng.standard_normal(d1 + d2)
        w /= np.linalg.norm(w)
        directions.append((w[:d1], w[d1:]))

    best_f, best_p = f0, None
    thresh = DESCENT_TOL * (1.0 + abs(f0))
    for a, b in directions:
        p, _ = project(_with_column_direction(injected, a, b, ESCAPE_STEP))
        f = cells.loss(model, cells.entries(p))
        if f < f0 - thresh and f < best_f:
            best_f, best_p = f, p
    stationary = mapping <= STATIONARITY_TOL * (1.0 + abs(f0))
    if stationary and best_p is None:
        return True, None
    if best_p is None:
        # not stationary: warm-start from the gradient step
        best_p = moved
    return False, best_p


@dataclass
class EscalationResult:
    point: FactoredPoint
    k_used: int
    objective: float
    iterations: int
    trace: SolverTrace
    minimal: bool


def escalate(
    obs,
    model: LinkModel,
    base_config: SolverConfig,
    k0: int,
    k_max: int,
    project_factory: Optional[Callable[[SolverConfig], Projector]] = None,
    init: Optional[FactoredPoint] = None,
) -> EscalationResult:
    """Rank escalation with full diagnostics; see :func:`rank_escalation_solve`."""
    if not 1 <= k0 <= k_max:
        raise DomainError(f"need 1 <= k0 <= k_max, got k0={k0}, k_max={k_max}")
    cells = as_cells(obs)
    factory = project_factory or _maxnorm_projector
    rng = np.random.default_rng([base_config.seed, 1])
    config = replace(base_config, k=k0)
    point, trace = _solve_with(cells, model, config, factory(config), init)
    iterations = trace.iterations
    k, minimal = k0, False
    while k < k_max:
        wider = replace(base_config, k=k + 1)
        ok, escape = local_minimum_test(cells, model, point.inject(), wider, factory(wider), rng)
        if ok:
            minimal = True
            break
        point, trace = _solve_with(cells, model, wider, factory(wider), escape)
        iterations += trace.iterations
        k += 1
    objective = cells.loss(model, cells.entries(point))
    return EscalationResult(point, k, objective, iterations, trace, minimal)


def _solve_with(cells, model, config, project, init):
    if init is None:
        init = initial_point(cells.d1, cells.d2, config, np.random.default_rng(config.seed))
    if config.mode is SolverMode.STOCHASTIC:
        raise DomainError("rank escalation runs the full-gradient solver only")
    return projected_descent(cells, model, init, config, project)


def rank_escalation_solve(obs, model: LinkModel, base_config: SolverConfig, k0: int, k_max: int):
    """Grow the factor width from ``k0`` until the zero-column injection is a local minimum.

    Returns ``(point, k_used)``.
    """
    res = escalate(obs, model, base_config, k0, k_max)
    return res.point, res.k_used
