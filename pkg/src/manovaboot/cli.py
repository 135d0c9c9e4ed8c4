"""Command-line interface: ``manovaboot analyze | pairwise | simulate``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, fixtures
from .design import HypothesisSpec, Role, between, build_hypothesis, layout, partition_hypothesis
from .distributions import ErrorDistribution, RngStream
from .errors import DataError, ManovaError, SpecError
from .inference import run_tests
from .io import (
    AnalysisConfig,
    ResultDocument,
    format_p,
    read_table,
    result_row,
    results_csv,
    text_table,
)
from .multiplicity import MAX_GROUPS, HypothesisFamily, closure, format_partition, intersections
from .simulation import (
    SIM_METHODS,
    SimulationScenario,
    format_report,
    run_scenario,
    three_way_scenario,
    two_way_scenario,
)

ZSCORE_NOTE = "z-scores use full-sample mean and SD (divisor n-1), not external norms"

DIST_CHOICES = {
    "normal": ErrorDistribution.NORMAL,
    "laplace": ErrorDistribution.DOUBLE_EXPONENTIAL,
    "chisq20": ErrorDistribution.CHI_SQUARE_20,
    "chisq15": ErrorDistribution.CHI_SQUARE_15,
    "t7": ErrorDistribution.T_7,
}


def _methods(text: str | None) -> tuple[str, ...] | None:
    if text is None:
        return None
    return tuple(m.strip() for m in text.split(",") if m.strip())


def _apply_overrides(cfg: AnalysisConfig, args) -> AnalysisConfig:
    changes = {}
    if args.alpha is not None:
        changes["alpha"] = args.alpha
    if args.methods is not None:
        changes["methods"] = _methods(args.methods)
    if args.B is not None:
        changes["b"] = args.B
    if args.seed is not None:
        changes["seed"] = args.seed
    return cfg.with_(**changes) if changes else cfg


def _metadata(command: str, loaded, cfg: AnalysisConfig) -> dict:
    meta = {
        "tool": "manovaboot",
        "version": __version__,
        "command": command,
        "input_digest": loaded.digest,
        "n_rows": loaded.n_rows,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "alpha": cfg.alpha,
        "B": cfg.b,
        "methods": list(cfg.methods),
        "cell_sizes": {
            "|".join(lab): int(n) for lab, n in zip(loaded.dataset.labels, loaded.dataset.sizes)
        },
    }
    if any(t.zscore for _, t in cfg.transforms):
        meta["note"] = ZSCORE_NOTE
    return meta


def _write(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- analyze ----------------------------------------------------------------

ANALYZE_COLUMNS = ["effect", "statistic", "df", "p_chi2", "p_pbs", "p_npbs", "crit_pbs", "b_replicates", "seed"]


def analyze_document(data_path, cfg: AnalysisConfig, threads: int = 1) -> ResultDocument:
    loaded = read_table(data_path, cfg)
    cfg = loaded.config
    lay = loaded.layout
    hyps = [build_hypothesis(lay, s) for s in cfg.hypothesis_specs(lay)]
    results = run_tests(loaded.dataset, hyps, cfg.methods, cfg.b, cfg.seed, cfg.alpha, threads)
    rows = [result_row(r, cfg.analysis.value) for r in results]
    return ResultDocument(_metadata("analyze", loaded, cfg), rows)


def render_analysis(doc: ResultDocument, fmt: str) -> str:
    if fmt == "json":
        return doc.to_json()
    if fmt == "csv":
        return results_csv(doc.results, ANALYZE_COLUMNS + ["analysis"])
    methods = doc.metadata["methods"]
    headers = ["effect", "statistic", "df"] + [_method_header(m) for m in methods]
    body = [
        [r["effect"], f"{r['statistic']:.2f}", str(r["df"])] + [format_p(r[f"p_{m}"]) for m in methods]
        for r in doc.results
    ]
    lines = [text_table(headers, body)]
    if "pbs" in methods or "npbs" in methods:
        lines.append(f"B = {doc.metadata['B']}, seed = {doc.metadata['seed']}")
    if "note" in doc.metadata:
        lines.append(f"note: {doc.metadata['note']}")
    return "\n".join(lines) + "\n"


def _method_header(m: str) -> str:
    return {"chi2": "WTS p", "pbs": "PBS p", "npbs": "NPBS p"}[m]


def cmd_analyze(args) -> int:
    cfg = _apply_overrides(AnalysisConfig.load(args.config), args)
    doc = analyze_document(args.data, cfg, args.threads)
    _write(render_analysis(doc, args.format), args.output)
    return 0


# -- pairwise ---------------------------------------------------------------

def pairwise_document(data_path, cfg: AnalysisConfig, factor: str, threads: int = 1) -> ResultDocument:
    names = {f.name: f for f in cfg.factors}
    if factor not in names:
        raise SpecError(f"unknown factor {factor!r}")
    if names[factor].role is not Role.BETWEEN:
        raise SpecError(f"factor {factor!r} is not a between-subjects factor")
    levels = names[factor].levels
    if levels is not None and len(levels) > MAX_GROUPS:
        raise SpecError(f"factor {factor!r} has {len(levels)} levels; closed testing supports at most {MAX_GROUPS}")
    loaded = read_table(data_path, cfg, group_by=(factor,))
    cfg = loaded.config
    lay = loaded.layout
    levels = lay.factor(factor).levels
    if len(levels) > MAX_GROUPS:
        raise SpecError(f"factor {factor!r} has {len(levels)} levels; closed testing supports at most {MAX_GROUPS}")
    if len(levels) < 2:
        raise SpecError(f"factor {factor!r} has a single level; nothing to compare")
    family = HypothesisFamily.pairwise(levels, cfg.alpha)
    parts = intersections(family)
    tested = {}
    for idx, part in enumerate(parts):
        label = format_partition(part)
        hyp = partition_hypothesis(lay, factor, part, cfg.analysis, label)
        stream = RngStream(cfg.seed, idx + 1)
        (res,) = run_tests(loaded.dataset, [hyp], cfg.methods, cfg.b, stream, cfg.alpha, threads)
        res.seed = cfg.seed
        tested[part] = res
    decisions = {m: closure(family, lambda part, m=m: tested[part].pvalue(m)) for m in cfg.methods}
    rows = []
    for part in parts:
        row = result_row(tested[part], cfg.analysis.value)
        pair = len(part) == 1 and len(part[0]) == 2
        row["kind"] = "pairwise" if pair else "intersection"
        row["effect"] = " vs. ".join(part[0]) if pair else format_partition(part)
        for m, dec in decisions.items():
            if pair:
                e = next(e for e in dec.elementary if e.hypothesis == part[0])
                row[f"rejected_{m}"] = e.rejected
                row[f"adjusted_{m}"] = e.adjusted_p
            else:
                row[f"rejected_{m}"] = dec.intersections[part] <= cfg.alpha
        rows.append(row)
    meta = _metadata("pairwise", loaded, cfg)
    meta["factor"] = factor
    close = {
        m: {
            "alpha": dec.alpha,
            "intersections": {format_partition(k): v for k, v in dec.intersections.items()},
            "elementary": [
                {"hypothesis": list(e.hypothesis), "raw_p": e.raw_p, "adjusted_p": e.adjusted_p,
                 "rejected": e.rejected}
                for e in dec.elementary
            ],
        }
        for m, dec in decisions.items()
    }
    return ResultDocument(meta, rows, closure=close)


def render_pairwise(doc: ResultDocument, fmt: str) -> str:
    methods = doc.metadata["methods"]
    if fmt == "json":
        return doc.to_json()
    if fmt == "csv":
        cols = ["kind"] + ANALYZE_COLUMNS + [f"rejected_{m}" for m in methods] + ["analysis"]
        return results_csv(doc.results, cols)
    headers = [doc.metadata["factor"], "statistic", "df"]
    for m in methods:
        headers += [_method_header(m), "decision"]
    body = []
    for r in doc.results:
        cells = [r["effect"], f"{r['statistic']:.2f}", str(r["df"])]
        for m in methods:
            cells += [format_p(r[f"p_{m}"]), "rejected" if r[f"rejected_{m}"] else "retained"]
        body.append(cells)
    return text_table(headers, body) + f"\nclosed testing at alpha = {doc.metadata['alpha']}\n"


def cmd_pairwise(args) -> int:
    cfg = _apply_overrides(AnalysisConfig.load(args.config), args)
    doc = pairwise_document(args.data, cfg, args.factor, args.threads)
    _write(render_pairwise(doc, args.format), args.output)
    return 0


# -- simulate ---------------------------------------------------------------

def load_scenario(path: str | Path) -> SimulationScenario:
    """Scenario file (YAML)::

        name: custom
        factors: [{name: sex, levels: [M, F]}, {name: diagnosis, levels: [AD, MCI, SCC]}]
        p: 6
        cell_sizes: [12, 27, 20, 24, 30, 47]
        covariances: diagnosis      # or identity, or a list of p x p matrices
        effects: all
        nsim: 5000
        B: 1000
        alpha: 0.05
        seed: 2016
    """
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise SpecError(f"cannot read scenario {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise SpecError(f"scenario {path} must be a mapping")
    try:
        lay = layout(*(between(f["name"], f["levels"]) for f in raw["factors"]), p=int(raw["p"]))
        cov = raw.get("covariances", "identity")
        if cov == "identity":
            covs = np.stack([np.eye(lay.p)] * lay.d)
        elif cov == "diagnosis":
            covs = np.stack([fixtures.DIAGNOSIS_COVARIANCES[c[-1]] for c in lay.cells()])
        else:
            covs = np.asarray(cov, dtype=float)
        effects = raw.get("effects", "all")
        specs = () if effects == "all" else tuple(HypothesisSpec(frozenset(e)) for e in effects)
        return SimulationScenario(
            str(raw.get("name", Path(path).stem)), lay, tuple(raw["cell_sizes"]), covs,
            ErrorDistribution.parse(raw.get("dist", "normal")), specs,
            int(raw.get("nsim", 5000)), int(raw.get("B", 1000)), float(raw.get("alpha", 0.05)),
            int(raw.get("seed", 2016)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ManovaError):
            raise
        raise SpecError(f"invalid scenario {path}: {exc!r}") from None


def simulate_reports(args) -> tuple[list, list[SimulationScenario]]:
    if args.scenario == "two-way":
        base = two_way_scenario()
    elif args.scenario == "three-way":
        base = three_way_scenario()
    elif Path(args.scenario).is_file():
        base = load_scenario(args.scenario)
    else:
        raise SpecError(f"unknown scenario {args.scenario!r} (two-way, three-way, or a scenario file)")
    if args.dist == "all":
        dists = list(DIST_CHOICES.values())
    elif args.dist in DIST_CHOICES:
        dists = [DIST_CHOICES[args.dist]]
    elif args.dist is None:
        dists = [base.dist]
    else:
        raise SpecError(f"unknown distribution {args.dist!r}; choose from {sorted(DIST_CHOICES)} or all")
    changes = {}
    for key, attr in (("nsim", "nsim"), ("B", "b"), ("seed", "seed"), ("alpha", "alpha")):
        if getattr(args, key) is not None:
            changes[attr] = getattr(args, key)
    scenarios = [base.with_(dist=d, **changes) for d in dists]
    reports = [run_scenario(s, workers=args.threads) for s in scenarios]
    return reports, scenarios


def simulation_records(reports, timing: bool = False) -> list[dict]:
    out = []
    for rep in reports:
        for row in rep.rows:
            rec = {
                "scenario": rep.scenario,
                "distribution": rep.dist.value,
                "effect": row.effect,
                "method": row.method,
                "rate": row.rate,
                "mcse": row.mcse,
                "nsim": row.nsim,
            }
            if timing:
                rec["wall_time"] = row.wall_time
            out.append(rec)
    return out


def cmd_simulate(args) -> int:
    reports, scenarios = simulate_reports(args)
    s0 = scenarios[0]
    records = simulation_records(reports, args.timing)
    if args.format == "json":
        meta = {
            "tool": "manovaboot", "version": __version__, "command": "simulate",
            "scenario": s0.name, "cell_sizes": list(s0.cell_sizes), "nsim": s0.nsim, "B": s0.b,
            "alpha": s0.alpha, "seed": s0.seed, "methods": list(SIM_METHODS),
        }
        text = ResultDocument(meta, [], simulation=records).to_json()
    elif args.format == "csv":
        cols = ["scenario", "distribution", "effect", "method", "rate", "mcse", "nsim"]
        text = results_csv(records, cols + (["wall_time"] if args.timing else []))
    else:
        text = (
            f"Type-I error rates, scenario {s0.name}, n = {list(s0.cell_sizes)}, "
            f"nsim = {s0.nsim}, B = {s0.b}, alpha = {s0.alpha}, seed = {s0.seed}\n"
            + format_report(reports) + "\n"
        )
    _write(text, args.output)
    return 0


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manovaboot",
        description="Wald-type tests with parametric/nonparametric bootstrap for multivariate factorial designs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats=("text", "json", "csv")):
        p.add_argument("--data", required=True, help="CSV file with a header row")
        p.add_argument("--config", required=True, help="YAML analysis configuration")
        p.add_argument("--alpha", type=float)
        p.add_argument("--methods", help="comma-separated subset of chi2,pbs,npbs")
        p.add_argument("--B", type=int, help="bootstrap replicates")
        p.add_argument("--seed", type=int)
        p.add_argument("--output", help="write here instead of stdout")
        p.add_argument("--format", choices=formats, default="text")
        p.add_argument("--threads", type=int, default=1, help="bootstrap worker threads")

    a = sub.add_parser("analyze", help="test every configured effect")
    common(a)
    a.set_defaults(func=cmd_analyze)

    pw = sub.add_parser("pairwise", help="closed-testing pairwise comparisons of one factor")
    common(pw)
    pw.add_argument("--factor", required=True)
    pw.set_defaults(func=cmd_pairwise)

    s = sub.add_parser("simulate", help="type-I error simulation")
    s.add_argument("--scenario", default="two-way", help="two-way, three-way, or a scenario YAML file")
    s.add_argument("--dist", default=None, help="normal, laplace, chisq20, chisq15, t7, or all")
    s.add_argument("--nsim", type=int)
    s.add_argument("--B", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--output")
    s.add_argument("--format", choices=("text", "json", "csv"), default="text")
    s.add_argument("--threads", type=int, default=1, help="worker processes")
    s.add_argument("--timing", action="store_true", help="include wall times in json/csv records")
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except ManovaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
