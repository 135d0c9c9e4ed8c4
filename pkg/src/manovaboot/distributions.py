"""Chi-square tail probabilities, standardized error laws and seeded streams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NumericalError, ShapeError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 100_000


def _lower_series(a: float, x: float) -> float:
    # P(a, x) = x^a e^-x / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise NumericalError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _upper_continued_fraction(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise NumericalError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma function Q(a, x)."""
    if a <= 0 or x < 0:
        raise ValueError(f"Q(a, x) needs a > 0 and x >= 0, got a={a}, x={x}")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _lower_series(a, x)
    return _upper_continued_fraction(a, x)


def regularized_gamma_p(a: float, x: float) -> float:
    if a <= 0 or x < 0:
        raise ValueError(f"P(a, x) needs a > 0 and x >= 0, got a={a}, x={x}")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return _lower_series(a, x)
    return 1.0 - _upper_continued_fraction(a, x)


def _check_chi2_args(x: float, df: int) -> None:
    if not x >= 0:
        raise ValueError(f"chi-square argument must be >= 0, got {x}")
    if int(df) != df or df < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {df}")


def chi_square_sf(x: float, df: int) -> float:
    """P(chi2_df > x)."""
    _check_chi2_args(x, df)
    return regularized_gamma_q(df / 2.0, x / 2.0)


def chi_square_cdf(x: float, df: int) -> float:
    _check_chi2_args(x, df)
    return regularized_gamma_p(df / 2.0, x / 2.0)


class ErrorDistribution(str, Enum):
    """Marginal laws for simulated errors; all standardized to mean 0, variance 1."""

    NORMAL = "normal"
    DOUBLE_EXPONENTIAL = "double_exponential"
    CHI_SQUARE_20 = "chi_square_20"
    CHI_SQUARE_15 = "chi_square_15"
    T_7 = "t_7"

    @classmethod
    def parse(cls, name: str) -> "ErrorDistribution":
        key = name.strip().lower()
        if key in _ALIASES:
            return _ALIASES[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown error distribution {name!r}") from None

    @property
    def label(self) -> str:
        return _LABELS[self]


_ALIASES = {
    "laplace": ErrorDistribution.DOUBLE_EXPONENTIAL,
    "chisq20": ErrorDistribution.CHI_SQUARE_20,
    "chisq15": ErrorDistribution.CHI_SQUARE_15,
    "t7": ErrorDistribution.T_7,
}

_LABELS = {
    ErrorDistribution.NORMAL: "Multivariate normal",
    ErrorDistribution.DOUBLE_EXPONENTIAL: "Double exponential",
    ErrorDistribution.CHI_SQUARE_20: "chi2(20)",
    ErrorDistribution.CHI_SQUARE_15: "chi2(15)",
    ErrorDistribution.T_7: "t(7)",
}


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys, so
    a given identity always yields the same variates regardless of which
    worker consumes it. ``prefix`` records the ancestry of nested streams.
    """

    seed: int
    stream_id: int = 0
    prefix: tuple[int, ...] = ()
    _gen: np.random.Generator | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def key(self) -> tuple[int, ...]:
        return self.prefix + (self.stream_id,)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
            object.__setattr__(self, "_gen", np.random.Generator(np.random.PCG64(ss)))
        return self._gen

    def child(self, stream_id: int) -> "RngStream":
        """Independent sub-stream nested under this one."""
        return RngStream(self.seed, stream_id, self.key)


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))


def draw_standardized(dist: ErrorDistribution, n, rng: RngStream) -> np.ndarray:
    """I.i.d. draws with mean 0 and variance 1 from the named family.

    ``n`` may be an int or a shape tuple.
    """
    g = as_stream(rng).generator
    dist = ErrorDistribution(dist)
    if dist is ErrorDistribution.NORMAL:
        return g.standard_normal(n)
    if dist is ErrorDistribution.DOUBLE_EXPONENTIAL:
        return g.laplace(0.0, 1.0 / math.sqrt(2.0), n)
    if dist is ErrorDistribution.CHI_SQUARE_20:
        return (g.chisquare(20, n) - 20.0) / math.sqrt(40.0)
    if dist is ErrorDistribution.CHI_SQUARE_15:
        return (g.chisquare(15, n) - 15.0) / math.sqrt(30.0)
    return g.standard_t(7, n) * math.sqrt(5.0 / 7.0)


def draw_mvn(mean, cov_sqrt, rng: RngStream, size: int | None = None) -> np.ndarray:
    """``mean + cov_sqrt @ z`` with standard normal ``z``.

    With ``size`` given, returns ``size`` draws stacked as rows.
    """
    mean = np.asarray(mean, dtype=float)
    a = np.asarray(cov_sqrt, dtype=float)
    if a.ndim != 2 or mean.shape != (a.shape[0],):
        raise ShapeError(f"mean of shape {mean.shape} does not match cov_sqrt {a.shape}")
    g = as_stream(rng).generator
    if size is None:
        return mean + a @ g.standard_normal(a.shape[1])
    return mean + g.standard_normal((size, a.shape[1])) @ a.T
