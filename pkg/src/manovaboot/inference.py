"""Wald-type statistic and its chi-square / bootstrap reference distributions."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg as la
from .design import HypothesisMatrix, HypothesisSpec
from .distributions import RngStream, as_stream, chi_square_sf
from .errors import DataError, InsufficientDataError, NumericalError, ShapeError, SpecError

# Bootstrap replicates are drawn in fixed-size blocks; block k always uses
# sub-stream k, so results do not depend on how blocks are scheduled.
BLOCK_SIZE = 250

PBS_STREAM = 1
NPBS_STREAM = 2

METHODS = ("chi2", "pbs", "npbs")


@dataclass(frozen=True, eq=False)
class GroupedDataset:
    """Observation matrices (n_i x p), one per cell, in layout order."""

    groups: tuple[np.ndarray, ...]
    labels: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        groups = tuple(np.atleast_2d(np.asarray(g, dtype=float)) for g in self.groups)
        if not groups:
            raise DataError("dataset has no groups")
        labels = tuple(tuple(lab) if isinstance(lab, (tuple, list)) else (str(lab),)
                       for lab in self.labels) or tuple((str(i + 1),) for i in range(len(groups)))
        if len(labels) != len(groups):
            raise DataError(f"{len(labels)} labels for {len(groups)} groups")
        p = groups[0].shape[1]
        for lab, g in zip(labels, groups):
            if g.ndim != 2 or g.shape[1] != p:
                raise ShapeError(f"group {_cell(lab)} has shape {g.shape}, expected (n, {p})")
            if not np.all(np.isfinite(g)):
                raise DataError(f"group {_cell(lab)} contains non-finite values")
            if g.shape[0] < 2:
                raise InsufficientDataError(
                    f"cell {_cell(lab)} has {g.shape[0]} observation(s); at least 2 are needed"
                )
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "labels", labels)

    @property
    def d(self) -> int:
        return len(self.groups)

    @property
    def p(self) -> int:
        return self.groups[0].shape[1]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.shape[0] for g in self.groups])


def _cell(label) -> str:
    return "(" + ", ".join(map(str, label)) + ")"


@dataclass(frozen=True, eq=False)
class MomentEstimates:
    means: np.ndarray        # (d, p)
    covariances: np.ndarray  # (d, p, p)
    n: np.ndarray            # (d,)

    @property
    def N(self) -> int:
        return int(self.n.sum())

    @property
    def d(self) -> int:
        return self.means.shape[0]

    @property
    def p(self) -> int:
        return self.means.shape[1]


def estimate_moments(data: GroupedDataset) -> MomentEstimates:
    means = np.stack([g.mean(axis=0) for g in data.groups])
    covs = np.stack([np.cov(g, rowvar=False, ddof=1).reshape(data.p, data.p) for g in data.groups])
    return MomentEstimates(means, covs, data.sizes)


def covariance_operator(est: MomentEstimates) -> np.ndarray:
    """V_N = blockdiag(N / n_i * Sigma_i)."""
    d, p = est.d, est.p
    v = np.zeros((d * p, d * p))
    for i in range(d):
        v[i * p:(i + 1) * p, i * p:(i + 1) * p] = est.N / est.n[i] * est.covariances[i]
    return v


def wald_statistic(est: MomentEstimates, hyp: HypothesisMatrix | np.ndarray) -> tuple[float, int]:
    """Q_N(T) = N * xbar' T' (T V_N T')^+ T xbar and the rank of T V_N T'."""
    t = hyp.t if isinstance(hyp, HypothesisMatrix) else np.asarray(hyp, dtype=float)
    dp = est.d * est.p
    if t.ndim != 2 or t.shape[1] != dp:
        raise ShapeError(f"hypothesis matrix has shape {t.shape}; expected {dp} columns")
    xbar = est.means.reshape(-1)
    tv = t @ covariance_operator(est) @ t.T
    inv, rank = la.pseudo_inverse((tv + tv.T) / 2)
    y = t @ xbar
    q = max(float(est.N * y @ inv @ y), 0.0)
    if isinstance(hyp, HypothesisMatrix) and rank != hyp.df:
        warnings.warn(
            f"effect {hyp.label or set(hyp.spec.effect)}: rank(T V T) = {rank} differs from "
            f"rank(T) = {hyp.df}; the covariance estimate is degenerate",
            RuntimeWarning,
            stacklevel=2,
        )
    return q, rank


def chi2_test(q: float, df: int) -> float:
    if df == 0:
        raise SpecError("degenerate hypothesis: the effect has no contrast (df = 0)")
    return chi_square_sf(q, df)


class WaldOperator:
    """Precomputed linear maps for evaluating the WTS on many moment sets.

    With ``C`` an orthonormal (r, d*p) basis of the hypothesis row space,
    ``Q = y' K^+ y`` where ``y = C xbar`` and
    ``K = sum_i C_i Sigma_i C_i' / n_i`` (``C_i`` the columns of cell i).
    Both ``y`` and ``K`` are linear in the stacked moments, so a batch is two
    matrix products.
    """

    def __init__(self, basis: np.ndarray, n: np.ndarray):
        n = np.asarray(n, dtype=float)
        d = n.shape[0]
        r, dp = basis.shape
        p = dp // d
        self.r = r
        self.mean_map = basis.T.copy()                                   # (d*p, r)
        cb = basis.reshape(r, d, p)
        g = np.einsum("rip,siq->ipqrs", cb, cb) / n[:, None, None, None, None]
        self.cov_map = g.reshape(d * p * p, r * r)

    def __call__(self, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
        batch = means.shape[:-2]
        m = int(np.prod(batch, dtype=int))
        y = means.reshape(m, -1) @ self.mean_map
        k = (covs.reshape(m, -1) @ self.cov_map).reshape(m, self.r, self.r)
        k = (k + k.transpose(0, 2, 1)) / 2
        q = la.pinv_quadratic_forms(k, y)
        return np.maximum(q, 0.0).reshape(batch)


def batched_wald(means: np.ndarray, covs: np.ndarray, n: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Vectorized WTS over leading batch axes.

    ``means`` is (..., d, p), ``covs`` (..., d, p, p) and ``basis`` an
    orthonormal (r, d*p) basis of the hypothesis row space. Equivalent to
    :func:`wald_statistic` with ``T = basis' basis``.
    """
    return WaldOperator(basis, n)(np.asarray(means, dtype=float), np.asarray(covs, dtype=float))


def _group_moments(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # x: (m, n, p) -> means (m, p), covariances (m, p, p)
    mean = x.mean(axis=1)
    c = x - mean[:, None, :]
    return mean, np.matmul(c.transpose(0, 2, 1), c) / (x.shape[1] - 1)


class _Resampler:
    """Draws blocks of bootstrap moment estimates for one dataset."""

    def __init__(self, data: GroupedDataset, method: str, est: MomentEstimates | None = None):
        if method not in ("pbs", "npbs"):
            raise ValueError(f"unknown bootstrap method {method!r}")
        self.method = method
        self.data = data
        est = est or estimate_moments(data)
        if method == "pbs":
            try:
                self.roots = [la.sym_sqrt(s) for s in est.covariances]
            except ShapeError as exc:
                raise NumericalError(f"covariance square root failed: {exc}") from exc
        else:
            self.centered = [g - m for g, m in zip(data.groups, est.means)]

    def block(self, m: int, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
        g = rng.generator
        p = self.data.p
        means, covs = [], []
        for i, n_i in enumerate(self.data.sizes):
            if self.method == "pbs":
                x = g.standard_normal((m, n_i, p)) @ self.roots[i].T
            else:
                x = self.centered[i][g.integers(0, n_i, size=(m, n_i))]
            mu, s = _group_moments(x)
            means.append(mu)
            covs.append(s)
        return np.stack(means, axis=1), np.stack(covs, axis=1)


def _blocks(b: int) -> list[tuple[int, int]]:
    return [(k, min(BLOCK_SIZE, b - k * BLOCK_SIZE)) for k in range(math.ceil(b / BLOCK_SIZE))]


def bootstrap_distribution(
    data: GroupedDataset,
    hyps: Sequence[HypothesisMatrix],
    b: int,
    rng,
    method: str = "pbs",
    workers: int = 1,
    est: MomentEstimates | None = None,
) -> np.ndarray:
    """Bootstrap replicates of the WTS, shape (len(hyps), b).

    All hypotheses share the same resampled datasets.
    """
    if b < 1:
        raise ValueError("number of bootstrap replicates must be >= 1")
    rng = as_stream(rng)
    sampler = _Resampler(data, method, est)
    ops = [WaldOperator(h.basis, data.sizes) for h in hyps]

    def run(block):
        k, m = block
        means, covs = sampler.block(m, rng.child(k))
        return np.stack([op(means, covs) for op in ops])

    blocks = _blocks(b)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(blk) for blk in blocks]
    return np.concatenate(parts, axis=1)


def bootstrap_pvalue(q: float, qstar: np.ndarray) -> float:
    qstar = np.asarray(qstar)
    return float((np.count_nonzero(qstar >= q) + 1) / (qstar.shape[-1] + 1))


def critical_value(qstar: np.ndarray, alpha: float) -> float:
    """Empirical (1 - alpha) quantile of the bootstrap statistics."""
    return float(np.quantile(qstar, 1.0 - alpha, method="higher"))


def _seed_stream(seed, stream_id: int) -> RngStream:
    base = as_stream(seed)
    return base.child(stream_id)


def pbs_test(
    data: GroupedDataset,
    hyp: HypothesisMatrix,
    b: int,
    seed,
    alpha: float = 0.05,
    workers: int = 1,
) -> tuple[float, float]:
    """Parametric bootstrap test: returns (p-value, critical value c*(alpha))."""
    est = estimate_moments(data)
    q, _ = wald_statistic(est, hyp)
    qstar = bootstrap_distribution(data, [hyp], b, _seed_stream(seed, PBS_STREAM), "pbs", workers, est)[0]
    return bootstrap_pvalue(q, qstar), critical_value(qstar, alpha)


def npbs_test(data: GroupedDataset, hyp: HypothesisMatrix, b: int, seed, workers: int = 1) -> float:
    """Nonparametric bootstrap test from groupwise centered resampling."""
    est = estimate_moments(data)
    q, _ = wald_statistic(est, hyp)
    qstar = bootstrap_distribution(data, [hyp], b, _seed_stream(seed, NPBS_STREAM), "npbs", workers, est)[0]
    return bootstrap_pvalue(q, qstar)


@dataclass
class TestResult:
    effect: str
    statistic: float
    df: int
    p_chi2: float | None = None
    p_pbs: float | None = None
    p_npbs: float | None = None
    crit_pbs: float | None = None
    b_replicates: int = 0
    seed: int | None = None
    spec: HypothesisSpec | None = field(default=None, repr=False)
    rank_tvt: int | None = None

    __test__ = False  # not a pytest class

    def pvalue(self, method: str) -> float | None:
        return getattr(self, f"p_{method}")


def run_tests(
    data: GroupedDataset,
    hyps: Sequence[HypothesisMatrix],
    methods: Sequence[str] = ("chi2", "pbs"),
    b: int = 10_000,
    seed: int = 0,
    alpha: float = 0.05,
    workers: int = 1,
) -> list[TestResult]:
    """Evaluate every hypothesis with every requested method.

    Bootstrap resamples are shared across hypotheses within a method.
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise SpecError(f"unknown method(s) {sorted(unknown)}; choose from {list(METHODS)}")
    est = estimate_moments(data)
    results = []
    for h in hyps:
        if h.df == 0:
            raise SpecError(f"effect {h.label!r} has no contrast (df = 0)")
        q, rank = wald_statistic(est, h)
        results.append(TestResult(h.label, q, h.df, spec=h.spec, rank_tvt=rank, seed=seed))
    if "chi2" in methods:
        for r in results:
            r.p_chi2 = chi2_test(r.statistic, r.df)
    for method, stream in (("pbs", PBS_STREAM), ("npbs", NPBS_STREAM)):
        if method not in methods:
            continue
        qstar = bootstrap_distribution(data, hyps, b, _seed_stream(seed, stream), method, workers, est)
        for r, qs in zip(results, qstar):
            setattr(r, f"p_{method}", bootstrap_pvalue(r.statistic, qs))
            if method == "pbs":
                r.crit_pbs = critical_value(qs, alpha)
            r.b_replicates = b
    return results
