"""Factorial layouts and projection hypothesis matrices.

Cells (between-subjects level combinations) and response coordinates
(within-subjects level combinations) are ordered lexicographically by the
declaration order of the factors, last factor varying fastest.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from math import prod
from typing import Iterable, Sequence

import numpy as np

from . import linalg as la
from .errors import SpecError


class Role(str, Enum):
    BETWEEN = "between"
    WITHIN = "within"


class Analysis(str, Enum):
    MULTIVARIATE = "multivariate"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class Factor:
    name: str
    role: Role
    levels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if not self.name:
            raise SpecError("factor name must be non-empty")
        if len(self.levels) < 1:
            raise SpecError(f"factor {self.name!r} needs at least one level")
        if len(set(self.levels)) != len(self.levels):
            raise SpecError(f"factor {self.name!r} has duplicate level labels")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def level_index(self, label) -> int:
        try:
            return self.levels.index(str(label))
        except ValueError:
            raise SpecError(
                f"unknown level {label!r} for factor {self.name!r} (levels: {list(self.levels)})"
            ) from None


def between(name: str, levels: Sequence | int) -> Factor:
    return Factor(name, Role.BETWEEN, _levels(levels))


def within(name: str, levels: Sequence | int) -> Factor:
    return Factor(name, Role.WITHIN, _levels(levels))


def _levels(levels) -> tuple[str, ...]:
    if isinstance(levels, int):
        return tuple(str(i + 1) for i in range(levels))
    return tuple(levels)


@dataclass(frozen=True)
class FactorialLayout:
    """Crossed between/within layout.

    ``p`` is inferred from the within factors when any are declared;
    otherwise it must be given (an unstructured response of dimension p).
    """

    factors: tuple[Factor, ...]
    p: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise SpecError(f"duplicate factor names in layout: {names}")
        w = self.within_factors
        if w:
            implied = prod(f.n_levels for f in w)
            if self.p is not None and self.p != implied:
                raise SpecError(
                    f"p={self.p} disagrees with within-factor levels (product {implied})"
                )
            object.__setattr__(self, "p", implied)
        elif self.p is None or int(self.p) != self.p or self.p < 1:
            raise SpecError("a layout without within factors needs a positive response dimension p")

    @property
    def between_factors(self) -> tuple[Factor, ...]:
        return tuple(f for f in self.factors if f.role is Role.BETWEEN)

    @property
    def within_factors(self) -> tuple[Factor, ...]:
        return tuple(f for f in self.factors if f.role is Role.WITHIN)

    @property
    def d(self) -> int:
        return prod(f.n_levels for f in self.between_factors)

    def factor(self, name: str) -> Factor:
        for f in self.factors:
            if f.name == name:
                return f
        raise SpecError(f"unknown factor {name!r} (layout has {[f.name for f in self.factors]})")

    def cells(self) -> list[tuple[str, ...]]:
        """Between-level tuples in lexicographic cell order."""
        return list(itertools.product(*(f.levels for f in self.between_factors)))

    def response_labels(self) -> list[tuple[str, ...]]:
        return list(itertools.product(*(f.levels for f in self.within_factors)))

    def effects(self, analysis: Analysis | str = Analysis.MULTIVARIATE) -> list[frozenset[str]]:
        """All main effects and interactions admissible for ``analysis``.

        Ordered by interaction order, then by factor declaration order.
        """
        analysis = Analysis(analysis)
        pool = self.between_factors if analysis is Analysis.MULTIVARIATE else self.factors
        names = [f.name for f in pool]
        return [
            frozenset(combo)
            for k in range(1, len(names) + 1)
            for combo in itertools.combinations(names, k)
        ]

    def effect_label(self, effect: Iterable[str]) -> str:
        effect = set(effect)
        return "*".join(f.name for f in self.factors if f.name in effect)


def layout(*factors: Factor, p: int | None = None) -> FactorialLayout:
    return FactorialLayout(tuple(factors), p)


def cell_index(lay: FactorialLayout, levels: Sequence) -> int:
    """0-based lexicographic index of a between-level combination."""
    bf = lay.between_factors
    if len(levels) != len(bf):
        raise SpecError(f"expected {len(bf)} levels (one per between factor), got {len(levels)}")
    idx = 0
    for f, lab in zip(bf, levels):
        idx = idx * f.n_levels + f.level_index(lab)
    return idx


@dataclass(frozen=True)
class HypothesisSpec:
    effect: frozenset[str]
    analysis: Analysis = Analysis.MULTIVARIATE

    def __post_init__(self):
        eff = self.effect
        if isinstance(eff, str):
            eff = [eff]
        object.__setattr__(self, "effect", frozenset(eff))
        object.__setattr__(self, "analysis", Analysis(self.analysis))
        if not self.effect:
            raise SpecError("an effect must name at least one factor")


@dataclass(frozen=True, eq=False)
class HypothesisMatrix:
    """Projection hypothesis matrix ``t`` with its rank.

    ``basis`` holds orthonormal rows spanning the row space of ``t``, so that
    ``t == basis.T @ basis``.
    """

    t: np.ndarray
    df: int
    spec: HypothesisSpec
    label: str = ""
    basis: np.ndarray = field(default=None, repr=False)


def build_hypothesis(lay: FactorialLayout, spec: HypothesisSpec) -> HypothesisMatrix:
    """Kronecker-product hypothesis matrix for an effect.

    Every factor contributes P_l when it belongs to the effect and J_l / l
    otherwise. Multivariate hypotheses end with I_p; marginal hypotheses let
    the within factors contribute their own P/J blocks instead.
    """
    spec = spec if isinstance(spec, HypothesisSpec) else HypothesisSpec(spec)
    for name in spec.effect:
        f = lay.factor(name)
        if spec.analysis is Analysis.MULTIVARIATE and f.role is Role.WITHIN:
            raise SpecError(
                f"within factor {name!r} cannot appear in a multivariate effect; "
                "use the marginal analysis"
            )
    mats, bases = [], []
    if spec.analysis is Analysis.MULTIVARIATE:
        order = list(lay.between_factors)
    else:
        order = list(lay.between_factors) + list(lay.within_factors)
    for f in order:
        if f.name in spec.effect:
            mats.append(la.centering_matrix(f.n_levels))
            bases.append(la.centering_basis(f.n_levels))
        else:
            mats.append(la.averaging_matrix(f.n_levels))
            bases.append(la.averaging_basis(f.n_levels))
    if spec.analysis is Analysis.MULTIVARIATE:
        mats.append(np.eye(lay.p))
        bases.append(np.eye(lay.p))
    elif not lay.within_factors:
        # unstructured response: average over its p coordinates
        mats.append(la.averaging_matrix(lay.p))
        bases.append(la.averaging_basis(lay.p))
    t = la.kron_all(mats)
    basis = _kron_rows(bases)
    df = prod(lay.factor(n).n_levels - 1 for n in spec.effect)
    if spec.analysis is Analysis.MULTIVARIATE:
        df *= lay.p
    return HypothesisMatrix(t, df, spec, lay.effect_label(spec.effect), basis)


def _kron_rows(bases: list[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1))
    for b in bases:
        out = np.kron(out, b)
    return out


def partition_hypothesis(
    lay: FactorialLayout,
    factor: str,
    blocks: Iterable[Iterable[str]],
    analysis: Analysis | str = Analysis.MULTIVARIATE,
    label: str = "",
) -> HypothesisMatrix:
    """Hypothesis that the marginal means of ``factor`` agree within each block.

    ``blocks`` lists groups of level labels declared equal; singleton blocks
    impose nothing. Other between factors are averaged over; within factors
    are kept (multivariate) or averaged (marginal).
    """
    analysis = Analysis(analysis)
    target = lay.factor(factor)
    if target.role is not Role.BETWEEN:
        raise SpecError(f"factor {factor!r} is not a between-subjects factor")
    rows = []
    for block in blocks:
        idx = [target.level_index(v) for v in block]
        for j in idx[1:]:
            r = np.zeros(target.n_levels)
            r[idx[0]], r[j] = 1.0, -1.0
            rows.append(r)
    if rows:
        core = la.row_space_basis(np.array(rows))
    else:
        core = np.zeros((0, target.n_levels))
    bases = []
    for f in lay.between_factors:
        bases.append(core if f.name == factor else la.averaging_basis(f.n_levels))
    if analysis is Analysis.MULTIVARIATE:
        bases.append(np.eye(lay.p))
    else:
        bases.append(la.averaging_basis(lay.p))
    basis = _kron_rows(bases)
    t = basis.T @ basis
    spec = HypothesisSpec(frozenset([factor]), analysis)
    return HypothesisMatrix(t, basis.shape[0], spec, label, basis)
