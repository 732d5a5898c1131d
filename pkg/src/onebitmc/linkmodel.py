"""Link functions for the 1-bit observation model and their regularity constants.

A link ``F`` is the cdf of the negated noise: an entry ``x`` of the hidden
matrix produces the sign ``+1`` with probability ``F(x)``.  Every model
exposes log-domain evaluations so that the likelihood stays accurate for
iterates far in the tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import special

from .errors import DomainError, ModelError

GRID_POINTS = 100_001

_LOG_HALF = math.log(0.5)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class LinkKind(str, Enum):
    LOGISTIC = "logistic"
    PROBIT = "probit"
    LAPLACE = "laplace"
    CUSTOM = "custom"


@dataclass(frozen=True)
class LinkModel:
    """Noise model ``F`` with density ``F'``.

    ``scale`` is sigma for probit and b for Laplace; it is ignored for the
    logistic link.  Custom links carry vectorised ``cdf_fn`` and ``pdf_fn``
    callables; both are required because the solver never differentiates
    ``F`` numerically.
    """

    kind: LinkKind
    scale: float = 1.0
    cdf_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    pdf_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", LinkKind(self.kind))
        if self.kind in (LinkKind.PROBIT, LinkKind.LAPLACE):
            if not (math.isfinite(self.scale) and self.scale > 0):
                raise DomainError(f"{self.kind.value} link needs a positive scale, got {self.scale}")
        if self.kind is LinkKind.CUSTOM and (self.cdf_fn is None or self.pdf_fn is None):
            raise DomainError("custom link needs both cdf_fn and pdf_fn")

    # -- constructors -------------------------------------------------------

    @classmethod
    def logistic(cls) -> "LinkModel":
        return cls(LinkKind.LOGISTIC)

    @classmethod
    def probit(cls, sigma: float = 1.0) -> "LinkModel":
        return cls(LinkKind.PROBIT, float(sigma))

    @classmethod
    def laplace(cls, b: float = 1.0) -> "LinkModel":
        return cls(LinkKind.LAPLACE, float(b))

    @classmethod
    def custom(cls, cdf_fn, pdf_fn) -> "LinkModel":
        return cls(LinkKind.CUSTOM, 1.0, cdf_fn, pdf_fn)

    @classmethod
    def from_config(cls, cfg: dict) -> "LinkModel":
        kind = LinkKind(cfg["kind"])
        if kind is LinkKind.CUSTOM:
            raise DomainError("custom links cannot be built from a config mapping")
        return cls(kind, float(cfg.get("scale", 1.0)))

    def to_config(self) -> dict:
        return {"kind": self.kind.value, "scale": self.scale}

    def with_scale(self, scale: float) -> "LinkModel":
        return LinkModel(self.kind, float(scale), self.cdf_fn, self.pdf_fn)

    # -- vectorised evaluations ---------------------------------------------

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is LinkKind.LOGISTIC:
            return special.expit(x)
        if self.kind is LinkKind.PROBIT:
            return special.ndtr(x / self.scale)
        if self.kind is LinkKind.LAPLACE:
            e = np.exp(-np.abs(x) / self.scale)
            return np.where(x < 0, 0.5 * e, 1.0 - 0.5 * e)
        return np.asarray(self.cdf_fn(x), dtype=float)

    def sf(self, x):
        """``1 - F(x)``, computed without cancellation for the built-in links."""
        x = np.asarray(x, dtype=float)
        if self.kind is LinkKind.LOGISTIC:
            return special.expit(-x)
        if self.kind is LinkKind.PROBIT:
            return special.ndtr(-x / self.scale)
        if self.kind is LinkKind.LAPLACE:
            e = np.exp(-np.abs(x) / self.scale)
            return np.where(x < 0, 1.0 - 0.5 * e, 0.5 * e)
        return 1.0 - np.asarray(self.cdf_fn(x), dtype=float)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is LinkKind.LOGISTIC:
            return special.expit(x) * special.expit(-x)
        if self.kind is LinkKind.PROBIT:
            z = x / self.scale
            return np.exp(-0.5 * z * z - _LOG_SQRT_2PI) / self.scale
        if self.kind is LinkKind.LAPLACE:
            return np.exp(-np.abs(x) / self.scale) / (2.0 * self.scale)
        return np.asarray(self.pdf_fn(x), dtype=float)

    def log_cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is LinkKind.LOGISTIC:
            return special.log_expit(x)
        if self.kind is LinkKind.PROBIT:
            return special.log_ndtr(x / self.scale)
        if self.kind is LinkKind.LAPLACE:
            a = np.abs(x) / self.scale
            return np.where(x < 0, _LOG_HALF - a, np.log1p(-0.5 * np.exp(-a)))
        with np.errstate(divide="ignore"):
            return np.log(self.cdf(x))

    def log_sf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is LinkKind.LOGISTIC:
            return special.log_expit(-x)
        if self.kind is LinkKind.PROBIT:
            return special.log_ndtr(-x / self.scale)
        if self.kind is LinkKind.LAPLACE:
            a = np.abs(x) / self.scale
            return np.where(x < 0, np.log1p(-0.5 * np.exp(-a)), _LOG_HALF - a)
        with np.errstate(divide="ignore"):
            return np.log(self.sf(x))

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is LinkKind.LOGISTIC:
            return special.log_expit(x) + special.log_expit(-x)
        if self.kind is LinkKind.PROBIT:
            z = x / self.scale
            return -0.5 * z * z - _LOG_SQRT_2PI - math.log(self.scale)
        if self.kind is LinkKind.LAPLACE:
            return -np.abs(x) / self.scale - math.log(2.0 * self.scale)
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def pdf_over_cdf(self, x):
        """``F'(x) / F(x)``."""
        x = np.asarray(x, dtype=float)
        if self.kind is LinkKind.LOGISTIC:
            return special.expit(-x)
        if self.kind is LinkKind.LAPLACE:
            e = np.exp(-np.abs(x) / self.scale)
            return np.where(x < 0, 1.0, 0.5 * e / (1.0 - 0.5 * e)) / self.scale
        if self.kind is LinkKind.PROBIT:
            return np.exp(self.log_pdf(x) - self.log_cdf(x))
        return self.pdf(x) / self.cdf(x)

    def pdf_over_sf(self, x):
        """``F'(x) / (1 - F(x))``."""
        x = np.asarray(x, dtype=float)
        if self.kind is LinkKind.LOGISTIC:
            return special.expit(x)
        if self.kind is LinkKind.LAPLACE:
            e = np.exp(-np.abs(x) / self.scale)
            return np.where(x < 0, 0.5 * e / (1.0 - 0.5 * e), 1.0) / self.scale
        if self.kind is LinkKind.PROBIT:
            return np.exp(self.log_pdf(x) - self.log_sf(x))
        return self.pdf(x) / self.sf(x)


def _check_point(x) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"link evaluated at non-finite point {x}")
    return x


def eval_F(model: LinkModel, x: float) -> float:
    return float(model.cdf(_check_point(x)))


def eval_dF(model: LinkModel, x: float) -> float:
    return float(model.pdf(_check_point(x)))


# -- Condition U constants ---------------------------------------------------


def _grid_logs(model: LinkModel, alpha: float):
    alpha = float(alpha)
    if not (math.isfinite(alpha) and alpha >= 0):
        raise DomainError(f"alpha must be a finite nonnegative number, got {alpha}")
    x = np.linspace(-alpha, alpha, GRID_POINTS) if alpha > 0 else np.zeros(1)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        lc, ls, lp = model.log_cdf(x), model.log_sf(x), model.log_pdf(x)
    bad = ~(np.isfinite(lc) & np.isfinite(ls) & np.isfinite(lp))
    if bad.any():
        raise ModelError(
            f"F, 1-F or F' vanishes on [-{alpha}, {alpha}] (first at x={x[bad][0]:.6g})"
        )
    return lc, ls, lp


def _sup_exp(log_values) -> float:
    with np.errstate(over="ignore"):
        v = float(np.exp(np.max(log_values)))
    if not math.isfinite(v):
        raise ModelError("condition constant overflows: F' is numerically zero relative to F(1 - F)")
    return v


def l_alpha(model: LinkModel, alpha: float, closed_form: bool = True) -> float:
    """sup over ``|x| <= alpha`` of ``F'(x) / (F(x)(1 - F(x)))``."""
    if closed_form and model.kind is LinkKind.LOGISTIC:
        _grid_logs(model, alpha)
        return 1.0
    if closed_form and model.kind is LinkKind.LAPLACE:
        _grid_logs(model, alpha)
        return 2.0 / model.scale
    lc, ls, lp = _grid_logs(model, alpha)
    return _sup_exp(lp - lc - ls)


def beta_alpha(model: LinkModel, alpha: float, closed_form: bool = True) -> float:
    """sup over ``|x| <= alpha`` of ``F(x)(1 - F(x)) / F'(x)^2``.

    The Laplace closed form is ``b**2 * (2 exp(alpha/b) - 1)``; the square on
    ``b`` follows from ``F' = exp(-|x|/b) / (2b)``.
    """
    alpha = float(alpha)
    if closed_form and model.kind is LinkKind.LOGISTIC:
        _grid_logs(model, alpha)
        return (1.0 + math.exp(alpha)) ** 2 / math.exp(alpha)
    if closed_form and model.kind is LinkKind.LAPLACE:
        _grid_logs(model, alpha)
        b = model.scale
        return b * b * (2.0 * math.exp(alpha / b) - 1.0)
    lc, ls, lp = _grid_logs(model, alpha)
    return _sup_exp(lc + ls - 2.0 * lp)


def u_alpha(model: LinkModel, alpha: float, closed_form: bool = True) -> float:
    """sup over ``|x| <= alpha`` of ``log(1 / (F(x)(1 - F(x))))``."""
    alpha = float(alpha)
    if closed_form and model.kind is LinkKind.LOGISTIC:
        _grid_logs(model, alpha)
        return 2.0 * math.log(math.exp(alpha / 2) + math.exp(-alpha / 2))
    if closed_form and model.kind is LinkKind.LAPLACE:
        _grid_logs(model, alpha)
        a = alpha / model.scale
        return a - _LOG_HALF - math.log1p(-0.5 * math.exp(-a))
    lc, ls, _ = _grid_logs(model, alpha)
    return float(np.max(-(lc + ls)))
