"""Monte Carlo type-I error experiments for the WTS and both bootstraps."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import fixtures
from . import linalg as la
from .design import Analysis, FactorialLayout, HypothesisSpec, between, build_hypothesis, layout
from .distributions import ErrorDistribution, RngStream, chi_square_sf, draw_standardized
from .errors import NumericalError, ShapeError, SpecError
from .inference import GroupedDataset, batched_wald, bootstrap_distribution, bootstrap_pvalue, estimate_moments

SIM_METHODS = ("WTS", "NPBS", "PBS")


@dataclass(frozen=True, eq=False)
class SimulationScenario:
    name: str
    layout: FactorialLayout
    cell_sizes: tuple[int, ...]
    cov_per_cell: np.ndarray
    dist: ErrorDistribution = ErrorDistribution.NORMAL
    effects: tuple[HypothesisSpec, ...] = ()
    nsim: int = 5000
    b: int = 1000
    alpha: float = 0.05
    seed: int = 2016

    def __post_init__(self):
        object.__setattr__(self, "cell_sizes", tuple(int(n) for n in self.cell_sizes))
        object.__setattr__(self, "cov_per_cell", np.asarray(self.cov_per_cell, dtype=float))
        object.__setattr__(self, "dist", ErrorDistribution(self.dist))
        if not self.effects:
            object.__setattr__(
                self, "effects",
                tuple(HypothesisSpec(e, Analysis.MULTIVARIATE) for e in self.layout.effects()),
            )
        self.validate()

    def validate(self) -> None:
        d, p = self.layout.d, self.layout.p
        if len(self.cell_sizes) != d:
            raise SpecError(f"scenario {self.name!r}: {len(self.cell_sizes)} cell sizes for {d} cells")
        if any(n < 2 for n in self.cell_sizes):
            raise SpecError(f"scenario {self.name!r}: every cell needs at least 2 observations")
        if self.cov_per_cell.shape != (d, p, p):
            raise SpecError(
                f"scenario {self.name!r}: covariances have shape {self.cov_per_cell.shape}, "
                f"expected {(d, p, p)}"
            )
        for i, s in enumerate(self.cov_per_cell):
            if not np.allclose(s, s.T, atol=1e-10):
                raise NumericalError(f"scenario {self.name!r}: covariance of cell {i} is not symmetric")
        if self.nsim < 1 or self.b < 1 or not 0 < self.alpha < 1:
            raise SpecError(f"scenario {self.name!r}: need nsim >= 1, b >= 1 and 0 < alpha < 1")

    def with_(self, **changes) -> "SimulationScenario":
        return replace(self, **changes)


@dataclass
class RateRow:
    effect: str
    method: str
    rate: float
    mcse: float
    nsim: int
    wall_time: float = 0.0


@dataclass
class SimulationReport:
    scenario: str
    dist: ErrorDistribution
    rows: list[RateRow] = field(default_factory=list)
    nsim: int = 0
    b: int = 0
    alpha: float = 0.05
    seed: int = 0

    def rate(self, effect: str, method: str) -> float:
        for r in self.rows:
            if r.effect == effect and r.method == method:
                return r.rate
        raise KeyError((effect, method))

    @property
    def effects(self) -> list[str]:
        return list(dict.fromkeys(r.effect for r in self.rows))


def _diagnosis_covariances(cells) -> np.ndarray:
    return np.stack([fixtures.DIAGNOSIS_COVARIANCES[c[-1]] for c in cells])


def two_way_scenario(dist=ErrorDistribution.NORMAL, **kw) -> SimulationScenario:
    lay = layout(between("sex", fixtures.SEXES), between("diagnosis", fixtures.DIAGNOSES), p=6)
    return SimulationScenario(
        "two-way", lay, fixtures.TWO_WAY_SIZES, _diagnosis_covariances(lay.cells()), dist, **kw
    )


def three_way_scenario(dist=ErrorDistribution.NORMAL, **kw) -> SimulationScenario:
    lay = layout(
        between("sex", fixtures.SEXES),
        between("age", fixtures.AGES),
        between("diagnosis", fixtures.DIAGNOSES),
        p=6,
    )
    return SimulationScenario(
        "three-way", lay, fixtures.THREE_WAY_SIZES, _diagnosis_covariances(lay.cells()), dist, **kw
    )


def builtin_scenarios() -> list[SimulationScenario]:
    """Two-way and three-way scenarios under every error distribution."""
    return [
        make(dist)
        for make in (two_way_scenario, three_way_scenario)
        for dist in ErrorDistribution
    ]


class _Replicator:
    """Runs single replications of a scenario; picklable for process pools."""

    def __init__(self, s: SimulationScenario):
        self.s = s
        self.hyps = [build_hypothesis(s.layout, e) for e in s.effects]
        for h in self.hyps:
            if h.df == 0:
                raise SpecError(f"scenario {s.name!r}: effect {h.label!r} has no contrast")
        try:
            self.roots = [la.sym_sqrt(c) for c in s.cov_per_cell]
        except ShapeError as exc:
            raise NumericalError(f"scenario {s.name!r}: {exc}") from exc
        self.n = np.array(s.cell_sizes, dtype=float)

    def generate(self, rng: RngStream) -> GroupedDataset:
        p = self.s.layout.p
        groups = [
            draw_standardized(self.s.dist, (n, p), rng) @ a.T
            for n, a in zip(self.s.cell_sizes, self.roots)
        ]
        return GroupedDataset(groups, self.s.layout.cells())

    def replicate(self, r: int) -> tuple[np.ndarray, np.ndarray]:
        """Rejection indicators (effects x methods) and per-method seconds."""
        s = self.s
        stream = RngStream(s.seed).child(r)
        out = np.zeros((len(self.hyps), len(SIM_METHODS)), dtype=bool)
        secs = np.zeros(len(SIM_METHODS))
        t0 = time.perf_counter()
        data = self.generate(stream.child(0))
        est = estimate_moments(data)
        q = np.array([batched_wald(est.means, est.covariances, self.n, h.basis) for h in self.hyps])
        out[:, 0] = [chi_square_sf(qi, h.df) <= s.alpha for qi, h in zip(q, self.hyps)]
        t1 = time.perf_counter()
        secs[0] = t1 - t0
        for col, (method, sid) in ((1, ("npbs", 2)), (2, ("pbs", 1))):
            qstar = bootstrap_distribution(data, self.hyps, s.b, stream.child(sid), method, est=est)
            out[:, col] = [bootstrap_pvalue(qi, qs) <= s.alpha for qi, qs in zip(q, qstar)]
            t2 = time.perf_counter()
            secs[col] = t2 - t1
            t1 = t2
        return out, secs

    def run_range(self, bounds: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        rej = np.zeros((bounds[1] - bounds[0], len(self.hyps), len(SIM_METHODS)), dtype=bool)
        secs = np.zeros(len(SIM_METHODS))
        for j, r in enumerate(range(*bounds)):
            rej[j], t = self.replicate(r)
            secs += t
        return rej, secs


def _chunks(nsim: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(nsim / (4 * workers)))
    return [(lo, min(lo + size, nsim)) for lo in range(0, nsim, size)]


def run_scenario(s: SimulationScenario, workers: int = 1, progress=None) -> SimulationReport:
    """Simulate ``s.nsim`` null datasets and tabulate rejection rates.

    Replication r draws everything from sub-streams of ``(s.seed, r)``, so the
    rates do not depend on ``workers``.
    """
    s.validate()
    rep = _Replicator(s)
    chunks = _chunks(s.nsim, workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(rep.run_range, chunks))
    else:
        parts = []
        for c in chunks:
            parts.append(rep.run_range(c))
            if progress is not None:
                progress(c[1], s.nsim)
    rej = np.concatenate([p[0] for p in parts])
    secs = np.sum([p[1] for p in parts], axis=0)
    report = SimulationReport(s.name, s.dist, nsim=s.nsim, b=s.b, alpha=s.alpha, seed=s.seed)
    for h, hits in zip(rep.hyps, rej.transpose(1, 0, 2)):
        for m, method in enumerate(SIM_METHODS):
            rate = float(hits[:, m].mean())
            report.rows.append(RateRow(
                h.label, method, rate, math.sqrt(rate * (1 - rate) / s.nsim), s.nsim, float(secs[m])
            ))
    return report


def format_report(reports: list[SimulationReport]) -> str:
    """Aligned table: Distribution | Hypothesis | WTS | NPBS | PBS."""
    width = max([len("Hypothesis")] + [len(e) for r in reports for e in r.effects])
    dwidth = max([len("Distribution")] + [len(r.dist.label) for r in reports])
    head = f"{'Distribution':<{dwidth}}  {'Hypothesis':<{width}}  {'WTS':>6}  {'NPBS':>6}  {'PBS':>6}"
    lines = [head, "-" * len(head)]
    for rep in reports:
        for i, eff in enumerate(rep.effects):
            dist = rep.dist.label if i == 0 else ""
            rates = "  ".join(f"{rep.rate(eff, m):>6.3f}" for m in SIM_METHODS)
            lines.append(f"{dist:<{dwidth}}  {eff:<{width}}  {rates}")
        lines.append("-" * len(head))
    return "\n".join(lines)
