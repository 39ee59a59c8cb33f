"""Command-line front end: construction, verification, certificate emission.

Exit codes: 0 verified success, 2 undecided or budget exhausted, 1
precondition or usage error.  Numeric arguments are exact rationals
("num/den" or integers); no floating-point inputs exist anywhere.  Every
emitted document is schema-validated before printing.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .cantor import WitnessNotFound, a_set, stage, tn_bounds
from .certify import (
    FAILS,
    BudgetExceeded,
    StepFunction,
    certify_divergence,
    certify_membership,
    isometry_check,
    lemma_chain,
    projection_apply,
)
from .config import RunConfig, load_config
from .exact import DomainError, format_rat, parse_rat
from .intervals import QInterval
from .report import canonical_json, render_lb_figure, validate_document, write_lb_csv
from .singular import default_schedule

EXIT_OK = 0
EXIT_PRECONDITION = 1
EXIT_UNDECIDED = 2

SCHEMA_VERSION = "nowhere-lq/1"


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PRECONDITION, f"{self.prog}: error: {message}\n")


def _rat(text: str):
    try:
        return parse_rat(text)
    except (ValueError, ZeroDivisionError) as err:
        raise argparse.ArgumentTypeError(f"not an exact rational: {text!r} ({err})") from None


def _interval(text: str) -> QInterval:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"interval must be 'lo,hi', got {text!r}")
    return QInterval(_rat(parts[0]), _rat(parts[1]))


def _coeff_list(text: str) -> tuple:
    return tuple(_rat(part) for part in text.split(","))


def _q_or_inf(text: str):
    if text.strip().lower() in {"inf", "infinity", "oo"}:
        return "inf"
    return _rat(text)


def _depth_flags(parser: argparse.ArgumentParser) -> None:
    for name in ("J", "L", "D", "m", "Jg"):
        parser.add_argument(f"--{name}", type=int, default=None, help=f"depth {name} override")


def _config_for(args, config: RunConfig) -> RunConfig:
    changes = {}
    for name in ("J", "L", "D", "m", "Jg"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "p", None) is not None:
        changes["p"] = args.p
    if args.precision is not None:
        changes["precision"] = args.precision
    if args.output_dir is not None:
        changes["output_dir"] = Path(args.output_dir)
    if args.compact:
        changes["compact"] = True
    return config.replaced(**changes) if changes else config


# ---------------------------------------------------------------------------
# command handlers: (args, config) -> (document, exit code)
# ---------------------------------------------------------------------------


def _cmd_cantor_stage(args, config):
    doc = {"schema_version": SCHEMA_VERSION, "kind": "stage", **stage(args.n).to_json()}
    return doc, EXIT_OK


def _cmd_cantor_tn(args, config):
    bounds = tn_bounds(args.n)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "tn",
        "n": bounds["n"],
        "t_n": format_rat(bounds["t_n"]),
        "fast_bound": format_rat(bounds["fast_bound"]),
        "fast_bound_holds": bounds["fast_bound_holds"],
        "safe_bound": format_rat(bounds["safe_bound"]),
        "safe_bound_holds": bounds["safe_bound_holds"],
    }
    return doc, EXIT_OK


def _cmd_abuilt(args, config):
    approx = a_set(args.n, args.depth, args.stage)
    doc = {"schema_version": SCHEMA_VERSION, "kind": "abuilt", **approx.to_json()}
    return doc, EXIT_OK


def _cmd_lemma_chain(args, config):
    report = lemma_chain(args.p, args.q, args.j0, args.nmax, config.precision)
    code = EXIT_OK if report.all_safe_consistent() else EXIT_UNDECIDED
    return report.to_json(), code


def _cmd_certify_divergence(args, config):
    cert = certify_divergence(
        args.g,
        args.interval,
        args.q,
        args.target,
        depths=config.depths,
        precision=config.precision,
        sched=default_schedule(config.p),
        n_budget=args.n_budget,
    )
    return cert.to_json(), EXIT_OK


def _cmd_certify_membership(args, config):
    cert = certify_membership(
        args.g,
        depths=config.depths,
        precision=config.precision,
        sched=default_schedule(config.p),
        include_normalizer=args.include_normalizer,
    )
    code = EXIT_OK if cert.identity_exact and cert.norm.contains(1) else EXIT_UNDECIDED
    return cert.to_json(), code


def _cmd_isometry(args, config):
    report = isometry_check(
        args.coeffs,
        depths=config.depths,
        precision=config.precision,
        sched=default_schedule(config.p),
    )
    code = EXIT_OK if report.symbolic_identity and report.ratio.contains(1) else EXIT_UNDECIDED
    return report.to_json(), code


def _cmd_projection(args, config):
    ones = StepFunction.build([(QInterval(parse_rat("0"), parse_rat("1")), 1)])
    report = projection_apply(
        ones,
        args.k,
        depths=config.depths,
        precision=config.precision,
        sched=default_schedule(config.p),
    )
    code = EXIT_OK if report.delta_exact and report.contraction != FAILS else EXIT_UNDECIDED
    return report.to_json(), code


def _cmd_emit_plot_data(args, config):
    report = lemma_chain(args.p, args.q, args.j0, args.nmax, config.precision)
    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = f"p{format_rat(args.p)}_q{format_rat(args.q)}".replace("/", "-")
    csv_path = out_dir / f"lb_{tag}.csv"
    rows = write_lb_csv(report, csv_path)
    figure_path = None
    if config.figures and not args.no_figure:
        figure_path = csv_path.with_suffix(".png")
        render_lb_figure(report, figure_path)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "plot_data",
        "series": "lb",
        "rows": rows,
        "csv": str(csv_path),
        "figure": None if figure_path is None else str(figure_path),
    }
    return doc, EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nowhere-lq", description=__doc__)
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--out", default=None, help="write the JSON document here instead of stdout")
    parser.add_argument("--output-dir", default=None, help="directory for CSV/figure artifacts")
    parser.add_argument("--precision", type=int, default=None, help="working precision in bits")
    parser.add_argument("--compact", action="store_true", help="compact JSON (still canonical)")
    commands = parser.add_subparsers(dest="command", required=True)

    cantor = commands.add_parser("cantor", help="stage-set construction facts")
    cantor_sub = cantor.add_subparsers(dest="subcommand", required=True)
    stage_p = cantor_sub.add_parser("stage", help="exact stage measure and interval count")
    stage_p.add_argument("n", type=int)
    stage_p.set_defaults(handler=_cmd_cantor_stage)
    tn_p = cantor_sub.add_parser("tn", help="leftmost endpoint with both decay-bound checks")
    tn_p.add_argument("n", type=int)
    tn_p.set_defaults(handler=_cmd_cantor_tn)

    abuilt = commands.add_parser("abuilt", help="depth-truncated hole-filling level")
    abuilt.add_argument("n", type=int)
    abuilt.add_argument("--depth", type=int, required=True, help="hole-generation cap D")
    abuilt.add_argument("--stage", type=int, required=True, help="mask stage m")
    abuilt.set_defaults(handler=_cmd_abuilt)

    chain = commands.add_parser("lemma-chain", help="divergence chain, fast and safe variants")
    chain.add_argument("--p", type=_rat, required=True)
    chain.add_argument("--q", type=_rat, required=True)
    chain.add_argument("--j0", type=int, default=None)
    chain.add_argument("--nmax", type=int, default=40)
    chain.set_defaults(handler=_cmd_lemma_chain)

    certify = commands.add_parser("certify", help="emit verification certificates")
    certify_sub = certify.add_subparsers(dest="subcommand", required=True)
    div = certify_sub.add_parser("divergence", help="window divergence lower bound")
    div.add_argument("--g", type=int, required=True, help="row index k")
    div.add_argument("--interval", type=_interval, required=True, help="window lo,hi")
    div.add_argument("--q", type=_q_or_inf, required=True, help="exponent q > p, or 'inf'")
    div.add_argument("--target", type=_rat, required=True, help="bound M to certify")
    div.add_argument("--n-budget", type=int, default=2048)
    div.add_argument("--p", type=_rat, default=None)
    _depth_flags(div)
    div.set_defaults(handler=_cmd_certify_divergence)
    mem = certify_sub.add_parser("membership", help="norm-one membership certificate")
    mem.add_argument("--g", type=int, required=True, help="row index k")
    mem.add_argument("--include-normalizer", action="store_true")
    mem.add_argument("--p", type=_rat, default=None)
    _depth_flags(mem)
    mem.set_defaults(handler=_cmd_certify_membership)

    iso = commands.add_parser("isometry", help="coefficient-vector norm ratio")
    iso.add_argument("--coeffs", type=_coeff_list, required=True, help="comma-separated rationals")
    iso.add_argument("--p", type=_rat, default=None)
    _depth_flags(iso)
    iso.set_defaults(handler=_cmd_isometry)

    proj = commands.add_parser("projection", help="dual-functional projection report")
    proj.add_argument("--k", type=int, required=True, help="number of rows K")
    proj.add_argument("--p", type=_rat, default=None)
    _depth_flags(proj)
    proj.set_defaults(handler=_cmd_projection)

    emit = commands.add_parser("emit", help="plot data artifacts")
    emit_sub = emit.add_subparsers(dest="subcommand", required=True)
    plot = emit_sub.add_parser("plot-data", help="CSV (and figure) for a bound series")
    plot.add_argument("--series", choices=("lb",), required=True)
    plot.add_argument("--p", type=_rat, required=True)
    plot.add_argument("--q", type=_rat, required=True)
    plot.add_argument("--j0", type=int, default=None)
    plot.add_argument("--nmax", type=int, default=40)
    plot.add_argument("--no-figure", action="store_true")
    plot.set_defaults(handler=_cmd_emit_plot_data)

    return parser


def _emit(doc: dict, config: RunConfig, out: str | None) -> None:
    validate_document(doc)
    text = canonical_json(doc, config.compact)
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_for(args, load_config(args.config))
        doc, code = args.handler(args, config)
    except (BudgetExceeded, WitnessNotFound) as err:
        best = getattr(err, "best_bound", None)
        doc = {
            "schema_version": SCHEMA_VERSION,
            "kind": "failure",
            "reason": str(err),
            "best_bound": None if best is None else best.to_json(),
            "n_reached": getattr(err, "n_reached", 0),
        }
        _emit(doc, config, args.out)
        return EXIT_UNDECIDED
    except DomainError as err:
        print(f"nowhere-lq: error: {err}", file=sys.stderr)
        return EXIT_PRECONDITION
    _emit(doc, config, args.out)
    return code


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
