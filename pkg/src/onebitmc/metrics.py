"""Divergences between probability matrices and recovery-error metrics."""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .linkmodel import LinkModel, beta_alpha


def _prob_pair(P, Q):
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise DomainError(f"shape mismatch {P.shape} vs {Q.shape}")
    for name, A in (("P", P), ("Q", Q)):
        if not np.isfinite(A).all() or (A < 0).any() or (A > 1).any():
            raise DomainError(f"entries of {name} must lie in [0, 1]")
    return P, Q


def hellinger_sq(P, Q) -> float:
    """Squared Hellinger distance averaged over entries."""
    P, Q = _prob_pair(P, Q)
    h = (np.sqrt(P) - np.sqrt(Q)) ** 2 + (np.sqrt(1 - P) - np.sqrt(1 - Q)) ** 2
    return float(h.mean())


def _kl_terms(p, q):
    # p log(p/q) with 0 log 0 = 0; q == 0 with p > 0 gives +inf
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * (np.log(p) - np.log(q)), 0.0)
    return t


def kl_divergence(P, Q) -> float:
    """Entry-averaged Bernoulli KL divergence ``K(P || Q)``; ``inf`` if ``Q`` puts zero mass where ``P`` does not."""
    P, Q = _prob_pair(P, Q)
    k = _kl_terms(P, Q) + _kl_terms(1 - P, 1 - Q)
    if np.isinf(k).any():
        return math.inf
    return float(k.mean())


def lemma2_coefficient(model: LinkModel, alpha: float) -> float:
    """Lower constant ``c`` with ``d_H^2(F(s); F(t)) >= c (s - t)^2`` for ``|s|, |t| <= alpha``.

    ``c`` is the infimum of ``F'(x)^2 / (8 F(x) (1 - F(x)))`` over the
    interval, which is ``1 / (8 beta_alpha)``.
    """
    return 1.0 / (8.0 * beta_alpha(model, alpha))


def recovery_errors(estimate, truth, dist=None) -> dict:
    """Weighted, relative and per-entry squared Frobenius errors.

    ``rel_frob_sq`` is ``nan`` when ``truth`` is zero.  Without ``dist`` the
    weighted error uses uniform weights.
    """
    E = np.asarray(estimate, dtype=float)
    T = np.asarray(truth, dtype=float)
    if E.shape != T.shape or E.ndim != 2:
        raise DomainError(f"shape mismatch {E.shape} vs {T.shape}")
    D2 = (E - T) ** 2
    total = float(D2.sum())
    tnorm = float((T * T).sum())
    weighted = float(D2.mean()) if dist is None else float(np.sum(dist.probs * D2))
    return {
        "weighted_frob_sq": weighted,
        "rel_frob_sq": total / tnorm if tnorm > 0 else math.nan,
        "per_dim_frob_sq": total / E.size,
    }
