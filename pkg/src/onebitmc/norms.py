"""Matrix norms and max-norm bounds.

The max-norm itself needs a semidefinite program and is not computed.  What
is available is an upper bound from any explicit factorization and a lower
bound from the trace and entrywise norms.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError
from .factors import FactoredPoint

RANK_RTOL = 1e-12


def _as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DomainError(f"expected a 2-d matrix, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise DomainError("matrix has non-finite entries")
    return M


def frobenius(M) -> float:
    return float(np.linalg.norm(_as_matrix(M)))


def inf_norm(M) -> float:
    M = _as_matrix(M)
    return float(np.abs(M).max()) if M.size else 0.0


def two_inf_norm(A) -> float:
    """Largest row l2 norm."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.sqrt(np.einsum("ij,ij->i", A, A).max()))


def singular_values(M) -> np.ndarray:
    return np.linalg.svd(_as_matrix(M), compute_uv=False)


def numerical_rank(M) -> int:
    s = singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > RANK_RTOL * s[0]))


def trace_norm(M) -> float:
    return float(singular_values(M).sum())


def weighted_frobenius(M, dist) -> float:
    """``sqrt(sum_kl pi_kl M_kl^2)`` for a sampling distribution ``dist``."""
    M = _as_matrix(M)
    if M.shape != dist.shape:
        raise DomainError(f"matrix shape {M.shape} does not match distribution {dist.shape}")
    return float(np.sqrt(np.sum(dist.probs * M * M)))


def _reweight(M, row_marg, col_marg, allow_zero=False):
    M = _as_matrix(M)
    r = np.asarray(row_marg, dtype=float)
    c = np.asarray(col_marg, dtype=float)
    if r.shape != (M.shape[0],) or c.shape != (M.shape[1],):
        raise DomainError("marginal lengths do not match the matrix")
    bad = (r < 0).any() or (c < 0).any() if allow_zero else (r <= 0).any() or (c <= 0).any()
    if bad:
        raise DomainError("marginals must be strictly positive")
    return np.sqrt(r)[:, None] * M * np.sqrt(c)[None, :]


def weighted_trace_norm(M, row_marg, col_marg) -> float:
    """Trace norm of ``diag(sqrt(row_marg)) M diag(sqrt(col_marg))``."""
    return trace_norm(_reweight(M, row_marg, col_marg))


def maxnorm_certificate(point: FactoredPoint) -> float:
    """``||U||_{2,inf} ||V||_{2,inf}``, an upper bound on the max-norm of ``U V^T``."""
    return two_inf_norm(point.U) * two_inf_norm(point.V)


def svd_factorization(M) -> FactoredPoint:
    """Balanced factorization ``M = (A sqrt(S)) (B sqrt(S))^T`` from the SVD."""
    A, s, Bt = np.linalg.svd(_as_matrix(M), full_matrices=False)
    r = s > RANK_RTOL * (s[0] if s.size else 0.0)
    r[0:1] = True
    root = np.sqrt(s[r])
    return FactoredPoint(A[:, r] * root, Bt[r].T * root)


def maxnorm_upper_bound(M) -> float:
    """Smaller of the SVD factorization certificate and ``sqrt(rank) ||M||_inf``."""
    M = _as_matrix(M)
    cert = maxnorm_certificate(svd_factorization(M))
    return min(cert, math.sqrt(max(numerical_rank(M), 1)) * inf_norm(M))


def maxnorm_lower_bound(M) -> float:
    """``max(||M||_* / sqrt(d1 d2), ||M||_inf)``; both terms bound the max-norm from below."""
    M = _as_matrix(M)
    d1, d2 = M.shape
    return max(trace_norm(M) / math.sqrt(d1 * d2), inf_norm(M))


@dataclass(frozen=True)
class NormReport:
    frobenius: float
    inf_norm: float
    trace_norm: float
    maxnorm_upper: float
    maxnorm_lower: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def norm_report(M, point: FactoredPoint | None = None) -> NormReport:
    """Norm summary of ``M``; a factorization of ``M``, if given, can tighten the upper bound."""
    M = _as_matrix(M)
    upper = maxnorm_upper_bound(M)
    if point is not None:
        upper = min(upper, maxnorm_certificate(point))
    lower = maxnorm_lower_bound(M)
    # both are valid bounds; agreement up to rounding is clipped here
    upper = max(upper, lower)
    return NormReport(frobenius(M), inf_norm(M), trace_norm(M), upper, lower)
