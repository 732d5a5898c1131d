"""Randomised property checks run by ``onebitmc verify``.

Each check returns a :class:`CheckResult`; the suite is deterministic for a
given seed and takes a few seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .factors import FactoredPoint
from .linkmodel import LinkModel, beta_alpha, l_alpha, u_alpha
from .metrics import hellinger_sq, kl_divergence, lemma2_coefficient
from .norms import frobenius, inf_norm, maxnorm_certificate, numerical_rank, trace_norm
from .objective import average_loss, factor_gradient
from .sampling import draw_with_replacement, generate_observations, uniform
from .solver import project_factor_ball, project_inf

SLACK = 1e-12


@dataclass
class CheckResult:
    name: str
    passed: bool
    cases: int
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name} ({self.cases} cases){'  ' + self.detail if self.detail else ''}"


def _rand_factors(rng, d1=None, d2=None, k=None):
    d1 = d1 or int(rng.integers(1, 8))
    d2 = d2 or int(rng.integers(1, 8))
    k = k or int(rng.integers(1, 5))
    s = 10.0 ** rng.uniform(-2, 1)
    return FactoredPoint(s * rng.standard_normal((d1, k)), s * rng.standard_normal((d2, k)))


def check_divergences(rng, cases=1000) -> CheckResult:
    bad = 0
    for _ in range(cases):
        shape = tuple(rng.integers(1, 6, size=2))
        P = rng.uniform(0.001, 0.999, size=shape)
        Q = rng.uniform(0.001, 0.999, size=shape)
        if hellinger_sq(P, Q) > kl_divergence(P, Q) + SLACK:
            bad += 1
    return CheckResult("hellinger_sq <= kl_divergence", bad == 0, cases, f"violations={bad}")


def check_trace_norm_sandwich(rng, cases=1000) -> CheckResult:
    bad = 0
    for _ in range(cases):
        M = _rand_factors(rng).matrix()
        f, t, r = frobenius(M), trace_norm(M), numerical_rank(M)
        if not (f <= t * (1 + SLACK) + SLACK and t <= math.sqrt(max(r, 1)) * f * (1 + SLACK) + SLACK):
            bad += 1
    return CheckResult("||M||_F <= ||M||_* <= sqrt(rank) ||M||_F", bad == 0, cases, f"violations={bad}")


def check_maxnorm_bounds(rng, cases=1000) -> CheckResult:
    bad = 0
    for _ in range(cases):
        p = _rand_factors(rng)
        M = p.matrix()
        c = maxnorm_certificate(p)
        tol = SLACK * (1 + c)
        if inf_norm(M) > c + tol or trace_norm(M) / math.sqrt(M.size) > c + tol:
            bad += 1
    return CheckResult("||M||_inf, ||M||_*/sqrt(d1 d2) <= certificate", bad == 0, cases, f"violations={bad}")


def check_lemma2(rng, cases=1000) -> CheckResult:
    models = [LinkModel.logistic(), LinkModel.probit(0.7), LinkModel.laplace(1.3)]
    bad = 0
    for i in range(cases):
        model = models[i % 3]
        alpha = float(rng.uniform(0.1, 3.0))
        c = lemma2_coefficient(model, alpha)
        s, t = rng.uniform(-alpha, alpha, size=2)
        lhs = hellinger_sq(np.array([[model.cdf(s)]]), np.array([[model.cdf(t)]]))
        if lhs < c * (s - t) ** 2 - SLACK:
            bad += 1
    return CheckResult("Hellinger lower bound via lemma2_coefficient", bad == 0, cases, f"violations={bad}")


def check_condition_constants(rng, cases=50) -> CheckResult:
    bad = 0
    for _ in range(cases):
        alpha = float(rng.uniform(0.1, 3.0))
        m = LinkModel.logistic()
        ea = math.exp(alpha)
        ref = (1.0, (1 + ea) ** 2 / ea, 2 * math.log(math.exp(alpha / 2) + math.exp(-alpha / 2)))
        got = (l_alpha(m, alpha), beta_alpha(m, alpha), u_alpha(m, alpha))
        grid = (l_alpha(m, alpha, False), beta_alpha(m, alpha, False), u_alpha(m, alpha, False))
        if any(abs(g - r) > 1e-10 * max(1, abs(r)) for g, r in zip(got, ref)):
            bad += 1
        if any(abs(g - r) > 1e-6 * max(1, abs(r)) for g, r in zip(grid, ref)):
            bad += 1
    return CheckResult("logistic condition constants (closed form vs grid)", bad == 0, cases, f"violations={bad}")


def check_projections(rng, cases=500) -> CheckResult:
    bad = 0
    for _ in range(cases):
        p = _rand_factors(rng)
        R = float(rng.uniform(0.01, 5.0))
        alpha = float(rng.uniform(0.01, 5.0))
        q = project_factor_ball(p, R)
        feasible = np.einsum("ij,ij->i", p.U, p.U) <= R
        ok = np.einsum("ij,ij->i", q.U, q.U).max() <= R + 1e-9
        ok &= np.array_equal(q.U[feasible], p.U[feasible])
        ok &= np.allclose(project_factor_ball(q, R).U, q.U, rtol=0, atol=1e-12)
        z = project_inf(p, alpha)
        ok &= inf_norm(z.matrix()) <= alpha + 1e-9
        ok &= np.allclose(project_inf(z, alpha).matrix(), z.matrix(), rtol=1e-12, atol=1e-12)
        bad += not ok
    return CheckResult("projection contracts and idempotence", bad == 0, cases, f"violations={bad}")


def _fd_error(obs, point, model, h=1e-6) -> float:
    ev = average_loss(obs, point, model)
    gU, gV = factor_gradient(ev, point)
    num = [np.zeros_like(point.U), np.zeros_like(point.V)]
    for which, A in enumerate((point.U, point.V)):
        for idx in np.ndindex(A.shape):
            Ap, Am = A.copy(), A.copy()
            Ap[idx] += h
            Am[idx] -= h
            pp = FactoredPoint(Ap, point.V) if which == 0 else FactoredPoint(point.U, Ap)
            pm = FactoredPoint(Am, point.V) if which == 0 else FactoredPoint(point.U, Am)
            num[which][idx] = (average_loss(obs, pp, model).value - average_loss(obs, pm, model).value) / (2 * h)
    an = np.concatenate([gU.ravel(), gV.ravel()])
    nu = np.concatenate([num[0].ravel(), num[1].ravel()])
    return float(np.linalg.norm(an - nu) / max(np.linalg.norm(nu), 1e-12))


def check_gradients(rng, cases=20) -> CheckResult:
    models = [LinkModel.logistic(), LinkModel.probit(0.8), LinkModel.laplace(0.9)]
    worst = 0.0
    for i in range(cases):
        d1, d2, k = (int(v) for v in rng.integers(2, 6, size=3))
        truth = rng.uniform(-1, 1, size=(d1, d2))
        model = models[i % 3]
        idx = draw_with_replacement(uniform(d1, d2), 30, rng)
        obs = generate_observations(truth, model, idx, rng)
        point = FactoredPoint(0.5 * rng.standard_normal((d1, k)), 0.5 * rng.standard_normal((d2, k)))
        worst = max(worst, _fd_error(obs, point, model))
    return CheckResult("factor gradient vs central differences", worst <= 1e-5, cases, f"max_rel_err={worst:.2e}")


ALL_CHECKS = (
    check_divergences,
    check_trace_norm_sandwich,
    check_maxnorm_bounds,
    check_lemma2,
    check_condition_constants,
    check_projections,
    check_gradients,
)


def run_all(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    return [check(rng) for check in ALL_CHECKS]
