"""Seeded, config-driven simulation experiments and their CSV output.

Random streams
--------------
Every random draw comes from ``numpy.random.SeedSequence(seed, spawn_key=key)``
with ``key`` one of

* ``(0, rep)``                      truth matrix of repetition ``rep``
* ``(1, rep)``                      index sample of repetition ``rep``
* ``(2, rep)``                      sign uniforms of repetition ``rep``
* ``(3, rep, s, i, e)``             solver seed for noise level ``s``, sample size ``i``, estimator ``e``

The index sample is drawn once at the largest sample size and smaller sizes
use its prefix; sign uniforms are shared across noise levels.  Both choices
couple the cells of one repetition, which removes sampling noise from
comparisons along the grid without changing the law of any single cell.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DomainError, OneBitError
from .estimators import EstimatorKind, EstimatorSpec, MarginalsSource, estimate
from .factors import FactoredPoint
from .linkmodel import LinkKind, LinkModel, l_alpha
from .metrics import recovery_errors
from .norms import inf_norm, maxnorm_certificate, svd_factorization, weighted_trace_norm
from .sampling import (
    SamplingDistribution,
    draw_with_replacement,
    draw_without_replacement,
    generate_observations,
    product_marginals,
    uniform,
)
from .solver import SolverConfig

CSV_COLUMNS = [
    "experiment", "d1", "d2", "rank", "sigma", "n", "estimator", "repetition", "seed",
    "per_dim_frob_sq", "rel_frob_sq", "weighted_frob_sq", "objective", "k_used", "wall_ms", "status",
]
METRIC_COLUMNS = ["per_dim_frob_sq", "rel_frob_sq", "weighted_frob_sq", "objective", "k_used", "wall_ms"]


class TruthKind(str, Enum):
    SPECTRAL_RANK_TWO = "spectral_rank_two"
    UNIFORM_FACTOR = "uniform_factor"


class Normalization(str, Enum):
    INF_NORM_ONE = "inf_norm_one"
    FROB_PER_DIM_ONE = "frob_per_dim_one"


# -- truth matrices ------------------------------------------------------------


def make_truth_spectral(d: int, scale: float = 1.0, rng: Optional[np.random.Generator] = None, return_factors=False):
    """Rank-two ``d x d`` matrix with both singular values ``scale * d / sqrt(2)``.

    Singular vectors come from orthonormalised Gaussian draws.  At ``scale=1``
    the matrix satisfies ``||M||_F / d = 1``.
    """
    if d < 2:
        raise DomainError(f"spectral truth needs d >= 2, got {d}")
    rng = rng if rng is not None else np.random.default_rng()
    A, _ = np.linalg.qr(rng.standard_normal((d, 2)))
    B, _ = np.linalg.qr(rng.standard_normal((d, 2)))
    s = scale * d / math.sqrt(2.0)
    root = math.sqrt(s)
    point = FactoredPoint(A * root, B * root)
    M = point.matrix()
    return (M, point) if return_factors else M


def make_truth_uniform_factor(d1: int, d2: int, r: int, normalization, rng: np.random.Generator, return_factors=False):
    """``L R^T`` with Uniform[-1/2, 1/2] factors, rescaled per ``normalization``.

    ``FROB_PER_DIM_ONE`` scales to ``||M||_F / sqrt(d1 d2) = 1`` (``||M||_F / d`` for square ``M``).
    """
    normalization = Normalization(normalization)
    if not 1 <= r <= min(d1, d2):
        raise DomainError(f"rank {r} outside [1, {min(d1, d2)}]")
    for _ in range(100):
        L = rng.uniform(-0.5, 0.5, size=(d1, r))
        Rf = rng.uniform(-0.5, 0.5, size=(d2, r))
        M = L @ Rf.T
        size = np.abs(M).max() if normalization is Normalization.INF_NORM_ONE else np.linalg.norm(M) / math.sqrt(d1 * d2)
        if size > 0:
            break
    else:  # pragma: no cover - probability zero
        raise DomainError("uniform factor draw degenerated to zero")
    c = math.sqrt(1.0 / size)
    point = FactoredPoint(L * c, Rf * c)
    M = point.matrix()
    return (M, point) if return_factors else M


# -- experiment specification --------------------------------------------------


@dataclass
class EstimatorPlan:
    """Estimator entry of an experiment; radius resolved per truth matrix.

    ``radius_rule`` is ``truth_certificate`` (factor times the factorization
    certificate of the truth), ``alpha_sqrt_rank`` (factor times alpha
    sqrt(rank)), ``truth_weighted_trace`` or ``fixed``.

    A solver entry ``"tau_rule": "inverse_l_zero"`` divides ``tau`` by
    ``F'(0) / (F(0)(1 - F(0)))`` (``l_alpha`` at ``alpha = 0``; 1 for the
    logistic link), so one step scale stays usable across a noise grid.
    """

    label: str
    kind: EstimatorKind
    radius_rule: str = "truth_certificate"
    radius_factor: float = 1.1
    radius: Optional[float] = None
    marginals_source: MarginalsSource = MarginalsSource.TRUE
    solver: dict = field(default_factory=dict)
    k0: Optional[int] = None
    k_max: Optional[int] = None

    @classmethod
    def from_config(cls, cfg: dict) -> "EstimatorPlan":
        kind = EstimatorKind(cfg["kind"])
        default_rule = "truth_certificate" if kind is EstimatorKind.MAX_NORM else "alpha_sqrt_rank"
        return cls(
            label=cfg.get("label", kind.value),
            kind=kind,
            radius_rule=cfg.get("radius_rule", default_rule),
            radius_factor=float(cfg.get("radius_factor", 1.1 if default_rule == "truth_certificate" else 1.0)),
            radius=cfg.get("radius"),
            marginals_source=MarginalsSource(cfg.get("marginals_source", "true")),
            solver=dict(cfg.get("solver", {})),
            k0=cfg.get("k0"),
            k_max=cfg.get("k_max"),
        )

    def resolve(self, truth, factors, alpha, rank, dist, seed, model: Optional[LinkModel] = None) -> EstimatorSpec:
        rule = self.radius_rule
        if rule == "fixed":
            radius = float(self.radius)
        elif rule == "truth_certificate":
            radius = self.radius_factor * maxnorm_certificate(factors)
        elif rule == "alpha_sqrt_rank":
            radius = self.radius_factor * alpha * math.sqrt(rank)
        elif rule == "truth_weighted_trace":
            radius = self.radius_factor * weighted_trace_norm(truth, dist.row_marginals(), dist.col_marginals())
        else:
            raise DomainError(f"unknown radius rule {rule!r}")
        scfg = dict(self.solver)
        k = scfg.get("k", 2)
        if isinstance(k, str):
            if not k.startswith("rank"):
                raise DomainError(f"cannot read factor width {k!r}")
            k = rank + int(k[4:] or 0)
        scfg["k"] = int(k)
        scfg["seed"] = seed
        tau_rule = scfg.pop("tau_rule", "fixed")
        if tau_rule == "inverse_l_zero":
            if model is None:
                raise DomainError("tau_rule inverse_l_zero needs the link model")
            scfg["tau"] = float(scfg.get("tau", 1.0)) / l_alpha(model, 0.0)
        elif tau_rule != "fixed":
            raise DomainError(f"unknown tau rule {tau_rule!r}")
        return EstimatorSpec(
            kind=self.kind,
            alpha=alpha,
            radius=radius,
            solver=SolverConfig.from_config(scfg),
            marginals_source=self.marginals_source,
            k0=self.k0,
            k_max=self.k_max,
        )


@dataclass
class ExperimentSpec:
    name: str
    d1: int
    d2: int
    rank: int
    truth_kind: TruthKind
    normalization: Normalization
    model: dict
    sampling: dict
    sample_sizes: list
    estimators: list
    repetitions: int = 1
    seed: int = 0
    sigma_grid: Optional[list] = None

    def __post_init__(self):
        self.truth_kind = TruthKind(self.truth_kind)
        self.normalization = Normalization(self.normalization)
        if self.repetitions < 1:
            raise DomainError("repetitions must be at least 1")
        if not self.sample_sizes or min(self.sample_sizes) < 1:
            raise DomainError("sample sizes must be positive")
        if not self.sampling.get("replacement", True) and max(self.sample_sizes) > self.d1 * self.d2:
            raise DomainError("sample size exceeds d1*d2 without replacement")
        if self.truth_kind is TruthKind.SPECTRAL_RANK_TWO and (self.d1 != self.d2 or self.rank != 2):
            raise DomainError("spectral truth is square with rank 2")

    @classmethod
    def from_config(cls, cfg: dict) -> "ExperimentSpec":
        cfg = dict(cfg)
        d1 = int(cfg.get("d1", cfg.get("d", 0)))
        d2 = int(cfg.get("d2", cfg.get("d", 0)))
        if "sample_fractions" in cfg:
            sizes = [int(round(f * d1 * d2)) for f in cfg["sample_fractions"]]
        else:
            sizes = [int(n) for n in cfg["sample_sizes"]]
        return cls(
            name=cfg["name"],
            d1=d1,
            d2=d2,
            rank=int(cfg.get("rank", 2)),
            truth_kind=cfg.get("truth_kind", "spectral_rank_two"),
            normalization=cfg.get("normalization", "frob_per_dim_one"),
            model=dict(cfg.get("model", {"kind": "logistic"})),
            sampling=dict(cfg.get("sampling", {"kind": "uniform"})),
            sample_sizes=sizes,
            estimators=[EstimatorPlan.from_config(e) for e in cfg["estimators"]],
            repetitions=int(cfg.get("repetitions", 1)),
            seed=int(cfg.get("seed", 0)),
            sigma_grid=[float(s) for s in cfg["sigma_grid"]] if cfg.get("sigma_grid") else None,
        )

    def to_config(self) -> dict:
        return {
            "name": self.name,
            "d1": self.d1,
            "d2": self.d2,
            "rank": self.rank,
            "truth_kind": self.truth_kind.value,
            "normalization": self.normalization.value,
            "model": self.model,
            "sampling": self.sampling,
            "sample_sizes": self.sample_sizes,
            "sigma_grid": self.sigma_grid,
            "estimators": [
                {
                    "label": e.label,
                    "kind": e.kind.value,
                    "radius_rule": e.radius_rule,
                    "radius_factor": e.radius_factor,
                    "radius": e.radius,
                    "marginals_source": e.marginals_source.value,
                    "solver": e.solver,
                    "k0": e.k0,
                    "k_max": e.k_max,
                }
                for e in self.estimators
            ],
            "repetitions": self.repetitions,
            "seed": self.seed,
        }

    def distribution(self) -> SamplingDistribution:
        kind = self.sampling.get("kind", "uniform")
        if kind == "uniform":
            return uniform(self.d1, self.d2)
        if kind == "power_law":
            # weights k^-exponent on rows and columns
            a = float(self.sampling.get("exponent", 1.0))
            return product_marginals(np.arange(1, self.d1 + 1) ** -a, np.arange(1, self.d2 + 1) ** -a)
        if kind == "product":
            return product_marginals(self.sampling["row_weights"], self.sampling["col_weights"])
        raise DomainError(f"unknown sampling kind {kind!r}")


def load_config(path, full: bool = False) -> list:
    """Experiments in a JSON config: a single experiment, or ``{"base": ..., "experiments": [...]}``.

    With ``full=True`` each experiment's optional ``full`` mapping overrides its fields.
    """
    with open(path) as fh:
        raw = json.load(fh)
    return experiments_from_mapping(raw, full)


def experiments_from_mapping(raw: dict, full: bool = False) -> list:
    items = raw["experiments"] if "experiments" in raw else [raw]
    base = raw.get("base", {})
    out = []
    for item in items:
        cfg = copy.deepcopy(base)
        cfg.update(copy.deepcopy(item))
        overrides = cfg.pop("full", {})
        if full:
            cfg.update(overrides)
        out.append(ExperimentSpec.from_config(cfg))
    return out


# -- running -------------------------------------------------------------------


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def derived_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=tuple(key)).generate_state(1)[0])


def _make_truth(spec: ExperimentSpec, rng):
    if spec.truth_kind is TruthKind.SPECTRAL_RANK_TWO:
        return make_truth_spectral(spec.d1, 1.0, rng, return_factors=True)
    return make_truth_uniform_factor(spec.d1, spec.d2, spec.rank, spec.normalization, rng, return_factors=True)


def _model_for(spec: ExperimentSpec, alpha: float, sigma: Optional[float]) -> LinkModel:
    model = LinkModel.from_config(spec.model)
    if sigma is not None:
        return model.with_scale(sigma)
    if spec.model.get("scale_mode") == "relative_alpha":
        return model.with_scale(float(spec.model.get("scale", 1.0)) * alpha)
    return model


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class ExperimentResult:
    rows: list
    traces: dict = field(default_factory=dict)

    def to_csv(self, path_or_buf=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])
        text = buf.getvalue()
        if path_or_buf is not None:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
        return text

    def data_rows(self) -> list:
        return [r for r in self.rows if isinstance(r["repetition"], int)]

    def aggregate(self, stat: str = "mean") -> list:
        return [r for r in self.rows if r["repetition"] == stat]


def _aggregate_rows(cell_rows: list) -> list:
    ok = [r for r in cell_rows if r["status"] == "ok"]
    out = []
    for stat in ("mean", "std"):
        agg = {k: cell_rows[0][k] for k in ("experiment", "d1", "d2", "rank", "sigma", "n", "estimator", "seed")}
        agg["repetition"] = stat
        agg["status"] = f"ok={len(ok)}/{len(cell_rows)}"
        for col in METRIC_COLUMNS:
            vals = [r[col] for r in ok if r.get(col) is not None]
            if not vals:
                agg[col] = None
            elif stat == "mean":
                agg[col] = float(np.mean(vals))
            else:
                agg[col] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        out.append(agg)
    return out


def run_experiment(spec: ExperimentSpec, record_timing: bool = False, keep_traces: bool = False, progress=None) -> ExperimentResult:
    """Run every (noise level, sample size, estimator, repetition) cell of ``spec``.

    Rows come out grouped by cell with the repetitions in order, each group
    followed by its mean and standard-deviation rows.  Estimator failures are
    recorded in the ``status`` column and the run continues.
    """
    dist = spec.distribution()
    sigmas = spec.sigma_grid if spec.sigma_grid else [None]
    n_max = max(spec.sample_sizes)
    replacement = spec.sampling.get("replacement", True)
    draw = draw_with_replacement if replacement else draw_without_replacement
    cells: dict = {}
    traces: dict = {}

    for rep in range(spec.repetitions):
        truth, factors = _make_truth(spec, stream(spec.seed, 0, rep))
        alpha = inf_norm(truth)
        indices = draw(dist, n_max, stream(spec.seed, 1, rep))
        for si, sigma in enumerate(sigmas):
            model = _model_for(spec, alpha, sigma)
            obs_all = generate_observations(truth, model, indices, stream(spec.seed, 2, rep))
            for ni, n in enumerate(spec.sample_sizes):
                obs = obs_all.head(n)
                for ei, plan in enumerate(spec.estimators):
                    seed = derived_seed(spec.seed, 3, rep, si, ni, ei)
                    row = {
                        "experiment": spec.name,
                        "d1": spec.d1,
                        "d2": spec.d2,
                        "rank": spec.rank,
                        "sigma": model.scale if model.kind is not LinkKind.LOGISTIC else None,
                        "n": n,
                        "estimator": plan.label,
                        "repetition": rep,
                        "seed": spec.seed,
                    }
                    t0 = time.perf_counter()
                    try:
                        est = plan.resolve(truth, factors, alpha, spec.rank, dist, seed, model)
                        M_hat, _, diag = estimate(obs, model, est, dist)
                        errs = recovery_errors(M_hat, truth, dist)
                        row.update(errs)
                        row.update(objective=diag.objective, k_used=diag.k_used, status="ok")
                        if keep_traces and diag.trace is not None:
                            traces[(spec.name, si, ni, plan.label, rep)] = diag.trace
                    except (OneBitError, OverflowError, np.linalg.LinAlgError) as exc:
                        row.update(status=f"error:{type(exc).__name__}")
                    if record_timing:
                        row["wall_ms"] = 1000.0 * (time.perf_counter() - t0)
                    cells.setdefault((si, ni, ei), []).append(row)
                    if progress is not None:
                        progress(row)

    rows = []
    for key in sorted(cells):
        group = cells[key]
        rows.extend(group)
        rows.extend(_aggregate_rows(group))
    return ExperimentResult(rows, traces)
