"""Command-line front end.

Rankings are read from a UTF-8 CSV with a header holding ``id``, ``group``
(0 or 1, 1 = protected) and optionally ``score``. Reports are JSON documents;
series (bands, boundaries) are CSV.

Exit codes: 0 success / fair, 1 audit failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .audit import (
    DEFAULT_NE,
    TestConfig,
    boundary_curves,
    confidence_band,
    multi_test,
    null_z,
    required_samples,
)
from .models import (
    DomainError,
    FiniteBinomial,
    Hypergeometric,
    PopulationSpec,
    WeightedHypergeometric,
    odds_ratio_for_target,
    prefix_laws,
)
from .rerank import rerank
from .sampling import Ranking, prefix_histogram

SCHEMA = "fairtopk.report/1"


class ParseError(DomainError):
    """Malformed ranking file."""


@dataclass
class RankingFile:
    header: list[str]
    rows: list[dict[str, str]]
    digest: str
    newline: str = "\n"


def read_ranking_file(path: str | Path) -> RankingFile:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc})") from None
    reader = csv.DictReader(io.StringIO(text, newline=""))
    header = reader.fieldnames or []
    for col in ("id", "group"):
        if col not in header:
            raise ParseError(f"{path}: header must contain an '{col}' column")
    rows = list(reader)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    newline = "\r\n" if b"\r\n" in raw else "\n"
    return RankingFile(list(header), rows, hashlib.sha256(raw).hexdigest(), newline)


def ingest(path: str | Path, order_policy: str = "as_given") -> tuple[Ranking, PopulationSpec, list[int], RankingFile]:
    """Parse a ranking file.

    Returns the ranking, the pool it implies, the row order used (0-based
    indices into the file's data rows) and the parsed file.
    """
    doc = read_ranking_file(path)
    seen: dict[str, int] = {}
    groups, scores = [], []
    has_score = "score" in doc.header
    for i, row in enumerate(doc.rows, start=1):
        rid = (row.get("id") or "").strip()
        if not rid:
            raise ParseError(f"row {i}: empty id")
        if rid in seen:
            raise ParseError(f"row {i}: duplicate id {rid!r} (first seen in row {seen[rid]})")
        seen[rid] = i
        g = (row.get("group") or "").strip()
        if g not in ("0", "1"):
            raise ParseError(f"row {i}: group must be 0 or 1, got {g!r}")
        groups.append(int(g))
        if has_score:
            s = (row.get("score") or "").strip()
            if s == "":
                scores.append(None)
            else:
                try:
                    v = float(s)
                except ValueError:
                    raise ParseError(f"row {i}: score {s!r} is not a number") from None
                if math.isnan(v):
                    raise ParseError(f"row {i}: score is NaN")
                scores.append(v)
    if has_score and any(s is not None for s in scores):
        missing = [i for i, s in enumerate(scores, start=1) if s is None]
        if missing:
            raise ParseError(f"row {missing[0]}: missing score")
    if order_policy == "as_given":
        order = list(range(len(groups)))
    elif order_policy == "by_score":
        if not has_score:
            raise ParseError("ordering by score needs a 'score' column")
        missing = [i for i, s in enumerate(scores, start=1) if s is None]
        if missing:
            raise ParseError(f"row {missing[0]}: missing score")
        order = sorted(range(len(groups)), key=lambda i: (-scores[i], i))
    else:
        raise DomainError(f"unknown order policy {order_policy!r}")
    ids = [doc.rows[i]["id"].strip() for i in order]
    ranking = Ranking(tuple(groups[i] for i in order), tuple(ids))
    pop = PopulationSpec(len(groups), sum(groups))
    return ranking, pop, order, doc


def _model_from_args(args, pop: PopulationSpec | None):
    name = args.model
    if name != "binom" and args.f is not None:
        raise DomainError("--f only applies to --model binom")
    if name != "weighted" and (args.omega is not None or args.rho is not None):
        raise DomainError("--omega/--rho only apply to --model weighted")
    if name == "hyper":
        return Hypergeometric()
    if name == "binom":
        if args.f is None:
            if pop is None:
                raise DomainError("--model binom needs --f")
            return FiniteBinomial(pop.p)
        return FiniteBinomial(args.f)
    if args.omega is not None:
        return WeightedHypergeometric(args.omega)
    if args.rho is None:
        raise DomainError("--model weighted needs --omega or --rho")
    if pop is None:
        raise DomainError("--rho needs the pool sizes")
    return WeightedHypergeometric(odds_ratio_for_target(pop, args.rho))


def _model_doc(model) -> dict:
    if isinstance(model, Hypergeometric):
        return {"name": "hypergeometric"}
    if isinstance(model, FiniteBinomial):
        return {"name": "finite_binomial", "f": model.f}
    return {"name": "weighted_hypergeometric", "omega": model.omega}


def _pop_doc(pop: PopulationSpec) -> dict:
    return {"n": pop.n, "n_p": pop.n_p, "p": pop.p}


def _emit_text(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="")


def dump_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _adjusted_doc(adj) -> dict:
    return {
        "alpha_c": adj.alpha_c,
        "achieved_fwer": adj.achieved_fwer,
        "n_e_used": adj.n_e_used,
        "warning": adj.warning,
    }


def _audit_doc(report) -> dict:
    return {
        "k": report.k,
        "side": report.side,
        "alpha": report.alpha,
        "alpha_c": _adjusted_doc(report.alpha_c),
        "per_prefix_pvalues": list(report.per_prefix_pvalues),
        "z_statistic": report.z_statistic,
        "fairness_score": report.fairness_score,
        "verdict": report.verdict,
        "z_rejects": report.z_rejects,
        "first_failing_prefix": report.first_failing_prefix,
    }


def _series_csv(columns: dict[str, np.ndarray]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in zip(*columns.values()):
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else int(v) for v in row])
    return buf.getvalue()


def _config(args, k) -> TestConfig:
    return TestConfig(
        alpha=args.alpha, k=k, side=args.side, n_e=args.ne,
        cdf_mode=args.cdf_mode.replace("-", "_"), seed=args.seed, workers=args.workers,
    )


def cmd_audit(args) -> int:
    ranking, pop, _, doc = ingest(args.input, args.order.replace("-", "_"))
    model = _model_from_args(args, pop)
    cfg = _config(args, args.k)
    report = multi_test(ranking, pop, model, cfg)
    out = {
        "schema": SCHEMA,
        "command": "audit",
        "input": {"sha256": doc.digest, "rows": len(doc.rows), "order": args.order},
        "population": _pop_doc(pop),
        "model": _model_doc(model),
        "config": {**_config_doc(cfg), "k": report.k},
        "audit": _audit_doc(report),
    }
    if args.bands:
        out["band"] = _band_doc(pop, model, args.alpha)
    _emit_text(dump_report(out), args.out)
    return 0 if report.passed else 1


def _config_doc(cfg: TestConfig) -> dict:
    return {
        "alpha": cfg.alpha, "k": cfg.k, "side": cfg.side, "n_e": cfg.n_e,
        "cdf_mode": cfg.cdf_mode, "seed": cfg.seed,
    }


def _band_doc(pop, model, alpha) -> dict:
    band = confidence_band(pop, model, alpha)
    return {
        "alpha": alpha,
        "lower": band.lower.tolist(),
        "upper": band.upper.tolist(),
    }


def _pop_from_args(args) -> PopulationSpec:
    if args.n is None or args.np is None:
        raise DomainError("--n and --np are required")
    return PopulationSpec(args.n, args.np)


def cmd_alpha(args) -> int:
    pop = _pop_from_args(args)
    model = _model_from_args(args, pop)
    k = pop.n if args.k is None else args.k
    cfg = _config(args, k)
    nz = null_z(pop, model, k, cfg.n_e, cfg.seed, side=cfg.side, cdf_mode=cfg.cdf_mode, workers=cfg.workers)
    adj = nz.adjusted_alpha(cfg.alpha)
    out = {
        "schema": SCHEMA,
        "command": "alpha",
        "population": _pop_doc(pop),
        "model": _model_doc(model),
        "config": _config_doc(cfg),
        "adjusted": _adjusted_doc(adj),
    }
    _emit_text(dump_report(out), args.out)
    return 0


def cmd_rerank(args) -> int:
    if args.side == "two_sided":
        raise DomainError("rerank supports --side lower or upper")
    ranking, pop, order, doc = ingest(args.input, args.order.replace("-", "_"))
    model = _model_from_args(args, pop)
    cfg = _config(args, pop.n)
    if cfg.cdf_mode != "analytical":
        raise DomainError("rerank needs --cdf-mode analytical")
    nz = null_z(pop, model, pop.n, cfg.n_e, cfg.seed, side=cfg.side, workers=cfg.workers)
    adj = nz.adjusted_alpha(cfg.alpha)
    result = rerank(ranking, pop, model, alpha_c=adj.alpha_c, side=cfg.side)
    before = multi_test(ranking, pop, model, cfg, null=nz)
    after = multi_test(result.ranking, pop, model, cfg, null=nz)

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=doc.header, lineterminator=doc.newline)
    w.writeheader()
    for pos in result.order:
        w.writerow(doc.rows[order[pos]])
    _emit_text(buf.getvalue(), args.out)

    report = {
        "schema": SCHEMA,
        "command": "rerank",
        "input": {"sha256": doc.digest, "rows": len(doc.rows), "order": args.order},
        "population": _pop_doc(pop),
        "model": _model_doc(model),
        "config": _config_doc(cfg),
        "adjusted": _adjusted_doc(adj),
        "rerank": {
            "swap_count": result.swap_count,
            "positions_adjusted": list(result.positions_adjusted),
            "limits": list(result.plan.limits),
            "ids": list(result.ranking.ids),
        },
        "before": _audit_doc(before),
        "after": _audit_doc(after),
    }
    if args.report:
        _emit_text(dump_report(report), args.report)
    return 0


def cmd_bands(args) -> int:
    pop = _pop_from_args(args)
    model = _model_from_args(args, pop)
    band = confidence_band(pop, model, args.alpha)
    j = band.prefix
    text = _series_csv({
        "k": j,
        "x": j / pop.n,
        "lower": band.lower,
        "upper": band.upper,
        "lower_proportion": band.lower_proportion,
        "upper_proportion": band.upper_proportion,
    })
    _emit_text(text, args.out)
    return 0


def cmd_boundaries(args) -> int:
    curves = boundary_curves(args.p, args.grid)
    _emit_text(_series_csv({"x": curves.x, "upper": curves.upper, "lower": curves.lower}), args.out)
    return 0


def cmd_simulate(args) -> int:
    pop = _pop_from_args(args)
    model = _model_from_args(args, pop)
    k = pop.n if args.k is None else args.k
    hist = prefix_histogram(model, pop, k, args.ne, args.seed, workers=args.workers)
    ys = np.arange(pop.n_p + 1)
    mean = hist @ ys / args.ne
    var = hist @ (ys**2) / args.ne - mean**2
    exact = prefix_laws(model, pop, k).pmf @ ys
    out = {
        "schema": SCHEMA,
        "command": "simulate",
        "population": _pop_doc(pop),
        "model": _model_doc(model),
        "config": {"n_e": args.ne, "seed": args.seed, "k": k},
        "prefix": {
            "mean_count": mean.tolist(),
            "std_count": np.sqrt(np.maximum(var, 0.0)).tolist(),
            "exact_mean_count": exact.tolist(),
            "protected_share_at_top": float(hist[0, 1] / args.ne) if pop.n_p else 0.0,
        },
    }
    _emit_text(dump_report(out), args.out)
    return 0


def cmd_samples(args) -> int:
    n = required_samples(args.delta, args.beta)
    out = {"schema": SCHEMA, "command": "samples", "delta": args.delta, "beta": args.beta, "n_e": n}
    _emit_text(dump_report(out), args.out)
    return 0


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairtopk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", choices=["hyper", "binom", "weighted"], default="hyper")
    model.add_argument("--f", type=float, help="fairness probability (binom)")
    weights = model.add_mutually_exclusive_group()
    weights.add_argument("--omega", type=float, help="odds ratio (weighted)")
    weights.add_argument("--rho", type=float, help="target protected share at the top (weighted)")

    mc = argparse.ArgumentParser(add_help=False)
    mc.add_argument("--alpha", type=float, default=0.1)
    mc.add_argument("--k", type=_positive_int, help="number of prefixes tested (default: all)")
    mc.add_argument("--side", choices=["lower", "upper", "two_sided"], default="lower")
    mc.add_argument("--ne", type=_positive_int, default=DEFAULT_NE, help="Monte Carlo rankings")
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--cdf-mode", choices=["analytical", "empirical"], default="analytical")
    mc.add_argument("--workers", type=_positive_int, default=1)

    pool = argparse.ArgumentParser(add_help=False)
    pool.add_argument("--n", type=_positive_int, help="pool size")
    pool.add_argument("--np", type=int, help="protected candidates in the pool")

    infile = argparse.ArgumentParser(add_help=False)
    infile.add_argument("input", help="ranking CSV (columns id, group[, score])")
    infile.add_argument("--order", choices=["as-given", "by-score"], default="as-given")

    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("audit", parents=[infile, model, mc, out], help="multi-prefix fairness audit")
    p.add_argument("--bands", action="store_true", help="include the two-sided band in the report")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("alpha", parents=[pool, model, mc, out], help="calibrate alpha_c only")
    p.set_defaults(func=cmd_alpha)

    p = sub.add_parser("rerank", parents=[infile, model, mc, out], help="re-rank to pass the audit")
    p.add_argument("--report", help="where to write the JSON report")
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("bands", parents=[pool, model, out], help="two-sided band series as CSV")
    p.add_argument("--alpha", type=float, default=0.1)
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("boundaries", parents=[out], help="attainable-share envelope as CSV")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--grid", type=_positive_int, default=100)
    p.set_defaults(func=cmd_boundaries)

    p = sub.add_parser("simulate", parents=[pool, model, out], help="summary of null rankings")
    p.add_argument("--k", type=_positive_int)
    p.add_argument("--ne", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("samples", parents=[out], help="Monte Carlo size for a DKW precision")
    p.add_argument("--delta", type=float, required=True, help="precision exponent: eps = 10**-delta")
    p.add_argument("--beta", type=float, default=0.1)
    p.set_defaults(func=cmd_samples)

    p = sub.add_parser("backend", help="show the active kernel backend")
    p.set_defaults(func=lambda args: print(_backend.current()) or 0)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, OSError) as exc:
        print(f"fairtopk {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
