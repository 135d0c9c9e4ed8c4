"""Analysis configuration, CSV ingestion, and result documents.

Configuration files are YAML (JSON is accepted too, being a YAML subset)::

    factors:
      - {name: sex, role: between, column: sex, levels: [M, F]}
      - {name: diagnosis, role: between, levels: [AD, MCI, SCC]}
      - {name: region, role: within, levels: [temporal, frontal, central]}
      - {name: feature, role: within, levels: [brainrate, complexity]}
    responses:
      - {column: br_temporal, levels: {region: temporal, feature: brainrate}}
      - ...
    transforms:
      cx_temporal: {negate: true, zscore: true}
    analysis: marginal          # or multivariate
    effects: all                # or a list such as [[sex], [sex, diagnosis]]
    methods: [chi2, pbs]
    alpha: 0.05
    B: 10000
    seed: 1

Without within factors, ``responses`` is a plain list of column names.
Between-factor ``column`` defaults to the factor name; omitted ``levels``
are inferred from the data in sorted order.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .design import Analysis, Factor, FactorialLayout, HypothesisSpec, Role, cell_index
from .errors import DataError, InsufficientDataError, SpecError
from .inference import METHODS, GroupedDataset, TestResult

MISSING_TOKENS = {"", "na", "nan", "null", "none", "."}


@dataclass(frozen=True)
class FactorConfig:
    name: str
    role: Role
    levels: tuple[str, ...] | None = None
    column: str | None = None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"name": self.name, "role": self.role.value}
        if self.levels is not None:
            out["levels"] = list(self.levels)
        if self.column is not None:
            out["column"] = self.column
        return out


@dataclass(frozen=True)
class ResponseColumn:
    column: str
    levels: tuple[tuple[str, str], ...] = ()   # (within factor, level) pairs

    def to_dict(self) -> dict | str:
        if not self.levels:
            return self.column
        return {"column": self.column, "levels": dict(self.levels)}


@dataclass(frozen=True)
class Transform:
    zscore: bool = False
    negate: bool = False


@dataclass(frozen=True)
class AnalysisConfig:
    factors: tuple[FactorConfig, ...]
    responses: tuple[ResponseColumn, ...]
    transforms: tuple[tuple[str, Transform], ...] = ()
    analysis: Analysis = Analysis.MULTIVARIATE
    effects: tuple[tuple[str, ...], ...] | None = None   # None = all admissible
    methods: tuple[str, ...] = ("chi2", "pbs")
    alpha: float = 0.05
    b: int = 10_000
    seed: int = 1

    # -- construction -----------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict) -> "AnalysisConfig":
        if not isinstance(raw, dict):
            raise SpecError("configuration must be a mapping")
        unknown = set(raw) - {"factors", "responses", "transforms", "analysis", "effects",
                              "methods", "alpha", "B", "b", "seed"}
        if unknown:
            raise SpecError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            factors = tuple(_factor_from(f) for f in raw["factors"])
            responses = tuple(_response_from(r) for r in raw["responses"])
        except KeyError as exc:
            raise SpecError(f"configuration is missing required key {exc}") from None
        transforms = tuple(sorted(
            (str(col), Transform(bool(t.get("zscore", False)), bool(t.get("negate", False))))
            for col, t in (raw.get("transforms") or {}).items()
        ))
        effects = raw.get("effects", "all")
        if effects in (None, "all"):
            effects = None
        else:
            effects = tuple(
                tuple([e] if isinstance(e, str) else e) for e in effects
            )
        methods = raw.get("methods", ["chi2", "pbs"])
        if isinstance(methods, str):
            methods = [m.strip() for m in methods.split(",")]
        try:
            cfg = cls(
                factors=factors,
                responses=responses,
                transforms=transforms,
                analysis=Analysis(raw.get("analysis", "multivariate")),
                effects=effects,
                methods=tuple(methods),
                alpha=float(raw.get("alpha", 0.05)),
                b=int(raw.get("B", raw.get("b", 10_000))),
                seed=int(raw.get("seed", 1)),
            )
        except ValueError as exc:
            raise SpecError(str(exc)) from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "AnalysisConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise SpecError(f"cannot read config {path}: {exc}") from None
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise SpecError(f"config {path} is not valid YAML: {exc}") from None
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "factors": [f.to_dict() for f in self.factors],
            "responses": [r.to_dict() for r in self.responses],
            "analysis": self.analysis.value,
            "effects": "all" if self.effects is None else [list(e) for e in self.effects],
            "methods": list(self.methods),
            "alpha": self.alpha,
            "B": self.b,
            "seed": self.seed,
        }
        if self.transforms:
            out["transforms"] = {c: {"zscore": t.zscore, "negate": t.negate} for c, t in self.transforms}
        return out

    def with_(self, **changes) -> "AnalysisConfig":
        cfg = replace(self, **changes)
        cfg.validate()
        return cfg

    # -- validation -------------------------------------------------------
    def validate(self) -> None:
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise SpecError(f"duplicate factor names: {names}")
        cols = [r.column for r in self.responses]
        if not cols:
            raise SpecError("at least one response column is required")
        if len(set(cols)) != len(cols):
            raise SpecError("response columns must be distinct")
        within = [f for f in self.factors if f.role is Role.WITHIN]
        for f in within:
            if not f.levels:
                raise SpecError(f"within factor {f.name!r} needs explicit levels")
        if within:
            seen = set()
            for r in self.responses:
                tags = dict(r.levels)
                if set(tags) != {f.name for f in within}:
                    raise SpecError(
                        f"response {r.column!r} must be tagged with one level of each within factor "
                        f"{[f.name for f in within]}"
                    )
                key = []
                for f in within:
                    if tags[f.name] not in f.levels:
                        raise SpecError(f"response {r.column!r}: unknown level {tags[f.name]!r} of {f.name!r}")
                    key.append(tags[f.name])
                if tuple(key) in seen:
                    raise SpecError(f"within combination {tuple(key)} is assigned twice")
                seen.add(tuple(key))
            total = math.prod(len(f.levels) for f in within)
            if len(seen) != total:
                raise SpecError(
                    f"within tagging covers {len(seen)} of {total} level combinations"
                )
        elif any(r.levels for r in self.responses):
            raise SpecError("responses are tagged with levels but no within factors are declared")
        for col, _ in self.transforms:
            if col not in cols:
                raise SpecError(f"transform given for {col!r}, which is not a response column")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise SpecError(f"unknown method(s) {sorted(bad)}; choose from {list(METHODS)}")
        if not 0 < self.alpha < 1:
            raise SpecError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.b < 1:
            raise SpecError("B must be at least 1")
        if self.effects is not None:
            known = {f.name: f for f in self.factors}
            for eff in self.effects:
                if not eff:
                    raise SpecError("empty effect in effects list")
                for name in eff:
                    if name not in known:
                        raise SpecError(f"effect {'*'.join(eff)!r} names unknown factor {name!r}")
                    if self.analysis is Analysis.MULTIVARIATE and known[name].role is Role.WITHIN:
                        raise SpecError(
                            f"effect {'*'.join(eff)!r}: within factor {name!r} is not allowed in a "
                            "multivariate analysis (only between-subjects effects are tested per "
                            "response); use analysis: marginal"
                        )

    # -- derived objects --------------------------------------------------
    @property
    def between(self) -> tuple[FactorConfig, ...]:
        return tuple(f for f in self.factors if f.role is Role.BETWEEN)

    @property
    def within(self) -> tuple[FactorConfig, ...]:
        return tuple(f for f in self.factors if f.role is Role.WITHIN)

    def ordered_responses(self) -> list[str]:
        """Response columns in within-factor lexicographic order."""
        if not self.within:
            return [r.column for r in self.responses]
        lookup = {tuple(dict(r.levels)[f.name] for f in self.within): r.column for r in self.responses}
        return [lookup[combo] for combo in itertools.product(*(f.levels for f in self.within))]

    def layout(self) -> FactorialLayout:
        if any(f.levels is None for f in self.between):
            raise SpecError("between-factor levels are unresolved; load the data first")
        factors = tuple(Factor(f.name, f.role, f.levels) for f in self.factors)
        p = None if self.within else len(self.responses)
        return FactorialLayout(factors, p)

    def hypothesis_specs(self, lay: FactorialLayout) -> list[HypothesisSpec]:
        if self.effects is None:
            effects = lay.effects(self.analysis)
        else:
            effects = [frozenset(e) for e in self.effects]
        return [HypothesisSpec(e, self.analysis) for e in effects]


def _factor_from(raw) -> FactorConfig:
    if not isinstance(raw, dict) or "name" not in raw:
        raise SpecError(f"factor entry {raw!r} needs a name")
    role = raw.get("role", "between")
    try:
        role = Role(role)
    except ValueError:
        raise SpecError(f"factor {raw['name']!r}: role must be 'between' or 'within'") from None
    levels = raw.get("levels")
    if levels is not None:
        levels = tuple(str(v) for v in levels)
        if not levels:
            raise SpecError(f"factor {raw['name']!r} has an empty level list")
        if len(set(levels)) != len(levels):
            raise SpecError(f"factor {raw['name']!r} has duplicate levels")
    column = raw.get("column")
    if role is Role.BETWEEN and column is None:
        column = str(raw["name"])
    return FactorConfig(str(raw["name"]), role, levels, column)


def _response_from(raw) -> ResponseColumn:
    if isinstance(raw, str):
        return ResponseColumn(raw)
    if isinstance(raw, dict) and "column" in raw:
        levels = tuple((str(k), str(v)) for k, v in (raw.get("levels") or {}).items())
        return ResponseColumn(str(raw["column"]), levels)
    raise SpecError(f"response entry {raw!r} must be a column name or a mapping with 'column'")


# -- data ingestion -------------------------------------------------------

@dataclass
class LoadedData:
    dataset: GroupedDataset
    layout: FactorialLayout
    config: AnalysisConfig   # with between levels resolved
    digest: str
    n_rows: int


def file_digest(path: str | Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def zscore(x: np.ndarray) -> np.ndarray:
    """Full-sample standardization (mean 0, SD 1 with divisor n - 1)."""
    sd = x.std(ddof=1)
    if not sd > 0:
        raise DataError("cannot z-score a constant column")
    return (x - x.mean()) / sd


def read_table(path: str | Path, config: AnalysisConfig, group_by: tuple[str, ...] | None = None) -> LoadedData:
    """Read a CSV file and group it according to ``config``.

    ``group_by`` restricts grouping to a subset of the between factors
    (used for one-way post-hoc layouts).
    """
    path = Path(path)
    try:
        raw_text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from None
    reader = csv.reader(_io.StringIO(raw_text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError(f"{path} is empty") from None
    between = [f for f in config.between if group_by is None or f.name in group_by]
    responses = config.ordered_responses()
    needed = [f.column for f in between] + responses
    missing_cols = [c for c in needed if c not in header]
    if missing_cols:
        raise DataError(f"{path}: missing column(s) {missing_cols}")
    pos = {c: header.index(c) for c in needed}

    labels, values = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise DataError(f"{path}, line {lineno}: expected {len(header)} fields, got {len(row)}")
        lab = []
        for f in between:
            v = row[pos[f.column]].strip()
            if v.lower() in MISSING_TOKENS:
                raise DataError(f"{path}, line {lineno}: missing value in factor column {f.column!r}")
            lab.append(v)
        vec = []
        for c in responses:
            cell = row[pos[c]].strip()
            if cell.lower() in MISSING_TOKENS:
                raise DataError(f"{path}, line {lineno}: missing value in column {c!r}")
            try:
                x = float(cell)
            except ValueError:
                raise DataError(f"{path}, line {lineno}: non-numeric value {cell!r} in column {c!r}") from None
            if not math.isfinite(x):
                raise DataError(f"{path}, line {lineno}: non-finite value in column {c!r}")
            vec.append(x)
        labels.append(tuple(lab))
        values.append(vec)
    if not values:
        raise DataError(f"{path} has no data rows")
    y = np.array(values, dtype=float)

    transforms = dict(config.transforms)
    for j, c in enumerate(responses):
        t = transforms.get(c)
        if t is None:
            continue
        if t.negate:
            y[:, j] = -y[:, j]
        if t.zscore:
            y[:, j] = zscore(y[:, j])

    resolved = []
    for f in config.factors:
        if f.role is Role.BETWEEN and f in between and f.levels is None:
            k = between.index(f)
            f = replace(f, levels=tuple(sorted({lab[k] for lab in labels})))
        resolved.append(f)
    keep = {f.name for f in between}
    cfg = replace(
        config,
        factors=tuple(f for f in resolved if f.role is Role.WITHIN or f.name in keep),
    )
    lay = cfg.layout()
    groups: list[list[int]] = [[] for _ in range(lay.d)]
    for i, lab in enumerate(labels):
        groups[cell_index(lay, lab)].append(i)
    cells = lay.cells()
    small = [(cells[k], len(g)) for k, g in enumerate(groups) if len(g) < 2]
    if small:
        listing = ", ".join(f"({', '.join(c)}): n={n}" for c, n in small)
        raise InsufficientDataError(f"cells with fewer than 2 observations: {listing}")
    ds = GroupedDataset([y[g] for g in groups], cells)
    return LoadedData(ds, lay, cfg, file_digest(path), len(values))


def load_csv(path: str | Path, config: AnalysisConfig) -> GroupedDataset:
    return read_table(path, config).dataset


# -- results ----------------------------------------------------------------

RESULT_FIELDS = ("effect", "statistic", "df", "p_chi2", "p_pbs", "p_npbs", "crit_pbs", "b_replicates", "seed")


def result_row(r: TestResult, analysis: str | None = None) -> dict:
    row = {k: getattr(r, k) for k in RESULT_FIELDS}
    row["statistic"] = float(row["statistic"])
    if analysis is not None:
        row["analysis"] = analysis
    return row


@dataclass
class ResultDocument:
    metadata: dict
    results: list[dict] = field(default_factory=list)
    closure: dict | None = None
    simulation: list[dict] | None = None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"metadata": self.metadata, "results": self.results}
        if self.closure is not None:
            out["closure"] = self.closure
        if self.simulation is not None:
            out["simulation"] = self.simulation
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ResultDocument":
        return cls(raw["metadata"], raw.get("results", []), raw.get("closure"), raw.get("simulation"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ResultDocument":
        return cls.from_dict(json.loads(text))


def format_p(p: float | None) -> str:
    if p is None:
        return "-"
    if p < 1e-4:
        return "<0.0001"
    return f"{p:.4f}"


def results_csv(rows: list[dict], columns: list[str]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(["" if row.get(c) is None else _csv_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def text_table(headers: list[str], rows: list[list[str]], align: str | None = None) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    align = align or "l" + "r" * (len(headers) - 1)

    def fmt(cells):
        return "  ".join(c.ljust(w) if a == "l" else c.rjust(w) for c, w, a in zip(cells, widths, align)).rstrip()

    line = "-" * sum(widths + [2 * (len(widths) - 1)])
    return "\n".join([fmt(headers), line] + [fmt(r) for r in rows] + [line])
