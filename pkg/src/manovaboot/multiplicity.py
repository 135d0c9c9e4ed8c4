"""Closed testing over families of group-equality hypotheses.

An elementary hypothesis declares a set of groups equal. Intersecting
several of them merges overlapping sets, so every intersection is a
partition of the groups; only its non-singleton blocks carry constraints.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Iterator

from .errors import ManovaError, SpecError

MAX_GROUPS = 6

Partition = tuple[tuple[str, ...], ...]


class IntersectionTestError(ManovaError):
    """The tester failed on one intersection hypothesis."""

    def __init__(self, intersection: Partition, cause: BaseException):
        super().__init__(f"testing intersection {format_partition(intersection)} failed: {cause}")
        self.intersection = intersection
        self.exit_code = getattr(cause, "exit_code", 1)


@dataclass(frozen=True)
class HypothesisFamily:
    elementary: tuple[frozenset[str], ...]
    alpha: float = 0.05
    groups: tuple[str, ...] = ()

    def __post_init__(self):
        elems = tuple(frozenset(map(str, h)) for h in self.elementary)
        object.__setattr__(self, "elementary", elems)
        if not elems:
            raise SpecError("a hypothesis family needs at least one elementary hypothesis")
        if len(set(elems)) != len(elems):
            raise SpecError("elementary hypotheses must be distinct")
        if any(len(h) < 2 for h in elems):
            raise SpecError("each elementary hypothesis must involve at least two groups")
        if not 0 < self.alpha < 1:
            raise SpecError(f"alpha must lie in (0, 1), got {self.alpha}")
        used = sorted(set().union(*elems))
        groups = tuple(map(str, self.groups)) or tuple(used)
        missing = set(used) - set(groups)
        if missing:
            raise SpecError(f"hypotheses reference unknown groups {sorted(missing)}")
        if len(groups) > MAX_GROUPS:
            raise SpecError(
                f"closed testing is limited to {MAX_GROUPS} groups (got {len(groups)}); "
                "the closure grows exponentially"
            )
        object.__setattr__(self, "groups", groups)

    @classmethod
    def pairwise(cls, groups: Iterable[str], alpha: float = 0.05) -> "HypothesisFamily":
        groups = tuple(map(str, groups))
        if len(groups) > MAX_GROUPS:
            raise SpecError(
                f"closed testing is limited to {MAX_GROUPS} groups (got {len(groups)})"
            )
        return cls(tuple(frozenset(p) for p in combinations(groups, 2)), alpha, groups)


def canonical(blocks: Iterable[Iterable[str]], order: tuple[str, ...]) -> Partition:
    """Drop singleton blocks and sort by the given group order."""
    rank = {g: i for i, g in enumerate(order)}
    out = [tuple(sorted(b, key=rank.__getitem__)) for b in blocks if len(set(b)) > 1]
    return tuple(sorted(out, key=lambda b: [rank[g] for g in b]))


def join(sets: Iterable[frozenset[str]], order: tuple[str, ...]) -> Partition:
    """Partition obtained by merging overlapping equality sets."""
    blocks: list[set[str]] = []
    for s in sets:
        merged = set(s)
        rest = []
        for b in blocks:
            if b & merged:
                merged |= b
            else:
                rest.append(b)
        blocks = rest + [merged]
    return canonical(blocks, order)


def format_partition(part: Partition) -> str:
    return "; ".join("=".join(b) for b in part) or "(none)"


def _set_partitions(items: list[str]) -> Iterator[list[list[str]]]:
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[head]] + part
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1:]


def implies(part: Partition, hyp: frozenset[str]) -> bool:
    """True when the partition forces every group in ``hyp`` to be equal."""
    return any(hyp <= set(b) for b in part)


def intersections(family: HypothesisFamily) -> list[Partition]:
    """Distinct intersection hypotheses of the family, most restrictive first.

    A partition is an intersection iff it equals the join of the elementary
    hypotheses it implies.
    """
    found = []
    for raw in _set_partitions(list(family.groups)):
        part = canonical(raw, family.groups)
        members = [h for h in family.elementary if implies(part, h)]
        if members and join(members, family.groups) == part:
            found.append(part)
    found.sort(key=lambda p: (-sum(len(b) - 1 for b in p), [family.groups.index(b[0]) for b in p], p))
    return found


@dataclass
class ElementaryDecision:
    hypothesis: tuple[str, ...]
    raw_p: float
    adjusted_p: float
    rejected: bool


@dataclass
class ClosureDecision:
    alpha: float
    elementary: list[ElementaryDecision] = field(default_factory=list)
    intersections: dict[Partition, float] = field(default_factory=dict)

    def rejected(self, hyp: Iterable[str]) -> bool:
        key = frozenset(hyp)
        for e in self.elementary:
            if frozenset(e.hypothesis) == key:
                return e.rejected
        raise KeyError(tuple(sorted(key)))


def closure(
    family: HypothesisFamily,
    tester: Callable[[Partition], float],
    workers: int = 1,
) -> ClosureDecision:
    """Closed testing: reject H iff every intersection implying H has p <= alpha.

    ``tester`` is called exactly once per distinct intersection.
    """
    parts = intersections(family)

    def run(part: Partition) -> float:
        try:
            p = float(tester(part))
        except Exception as exc:  # noqa: BLE001 - re-raised with context
            raise IntersectionTestError(part, exc) from exc
        if not 0.0 <= p <= 1.0:
            raise IntersectionTestError(part, ValueError(f"p-value {p} outside [0, 1]"))
        return p

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pvals = list(pool.map(run, parts))
    else:
        pvals = [run(part) for part in parts]
    tested = dict(zip(parts, pvals))
    decision = ClosureDecision(family.alpha, intersections=tested)
    for h in family.elementary:
        own = canonical([h], family.groups)
        covering = [p for part, p in tested.items() if implies(part, h)]
        adjusted = max(covering)
        decision.elementary.append(ElementaryDecision(
            own[0], tested[own], adjusted, adjusted <= family.alpha
        ))
    return decision
