"""Command-line interface: ``hamclf {simulate,fit-predict,decompose,rate}``.

Every subcommand also accepts ``--config PATH``: a file of ``key = value``
lines (``#`` starts a comment) whose keys are the long flag names.  Flags given
on the command line override the file.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import anova, harness
from .data import CsvFormatError, read_test_csv, read_train_csv
from .estimator import HamHyperParams, fit
from .harness import ExperimentSpec, records_csv, run_experiment, summary_csv
from .lattice import Pattern, canonical, format_set, is_antichain, pattern_set
from .scenarios import Scenario


class UsageError(Exception):
    """Bad flag values; reported with exit code 2."""


# -- flag value parsers ------------------------------------------------------

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _real(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite, got {text}")
    return v


def _real_list(text: str) -> tuple:
    try:
        return tuple(_real(t) for t in text.replace(";", ",").split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of reals, got {text!r}") from None


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# -- config files ------------------------------------------------------------

def read_config(path) -> dict:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise UsageError(f"{path}:{lineno}: empty key")
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _apply_config(parser: argparse.ArgumentParser, config: dict) -> None:
    """Install config values as parser defaults so explicit flags still win."""
    actions = {a.dest: a for a in parser._actions if a.dest not in ("help", "config", "command")}
    for key, value in config.items():
        if key not in actions:
            raise UsageError(f"unknown config key {key!r}")
        act = actions[key]
        try:
            if isinstance(act, argparse._StoreTrueAction):
                conv = _bool(value)
            elif act.type is not None:
                conv = act.type(value)
            else:
                conv = value
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"config key {key!r}: {exc}") from None
        if act.choices is not None and conv not in act.choices:
            raise UsageError(f"config key {key!r}: invalid choice {value!r}")
        parser.set_defaults(**{key: conv})
        act.required = False


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="hamclf", description=__doc__.splitlines()[0], formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    sim = sub.add_parser("simulate", formatter_class=fmt,
                         help="repeated experiments on a simulation setting")
    sim.add_argument("--setting", type=int, choices=(1, 2, 3), required=True)
    sim.add_argument("--n", type=_positive_int, required=True, help="training sample size")
    sim.add_argument("--repeats", type=_positive_int, default=100)
    sim.add_argument("--m", type=_positive_int, default=1000, help="test sample size")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--methods", default="ham,oracle,cc,zi,mi",
                     help="comma-separated subset of ham, oracle, cc, zi, mi")
    sim.add_argument("--out", default=None,
                     help="results CSV; the summary goes to <stem>_summary.csv (default: stdout)")
    sim.add_argument("--threshold-scale", type=_real, default=1 / 16)
    sim.add_argument("--workers", type=_positive_int, default=1, help="worker processes")
    sim.add_argument("--timing", action="store_true",
                     help="record wall times (output is then no longer byte-reproducible)")

    fp = sub.add_parser("fit-predict", formatter_class=fmt, help="fit HAM on a CSV and predict another")
    fp.add_argument("--train", required=True, help="CSV with header x1,...,xd,y; missing cells empty or NA")
    fp.add_argument("--test", required=True, help="CSV with header x1,...,xd, fully observed")
    fp.add_argument("--gamma", type=_real_list, default=None, help="tail exponents, one per feature (default all 1)")
    fp.add_argument("--beta", type=_real, default=1.0)
    fp.add_argument("--alpha", type=_real, default=1.0)
    fp.add_argument("--threshold-scale", type=_real, default=1 / 16)
    fp.add_argument("--out", default=None, help="predictions CSV (default: stdout)")

    dec = sub.add_parser("decompose", formatter_class=fmt,
                         help="exact anova decomposition of a finite distribution")
    src = dec.add_mutually_exclusive_group()
    src.add_argument("--dist", default=None, help="distribution JSON")
    src.add_argument("--setting", type=int, choices=(1, 2, 3), default=None,
                     help="discretise a simulation setting instead of reading --dist")
    dec.add_argument("--grid-m", type=_positive_int, default=50, help="grid points per axis for --setting")
    dec.add_argument("--summary-only", action="store_true", help="omit the per-atom component values")
    dec.add_argument("--out", default=None, help="output JSON (default: stdout)")

    rate = sub.add_parser("rate", formatter_class=fmt, help="evaluate the minimax rate formula")
    rate.add_argument("--omega", required=True, help="antichain, e.g. 0110,0001")
    rate.add_argument("--counts", required=True,
                      help="available-case counts: pattern=count pairs or integers aligned with --omega")
    rate.add_argument("--gamma", type=_real_list, default=None)
    rate.add_argument("--beta", type=_real, default=1.0)
    rate.add_argument("--alpha", type=_real, default=1.0)

    for p in (sim, fp, dec, rate):
        p.add_argument("--config", default=None, help="key = value file; flags override it")
    return parser


def parse_args(argv: list[str]):
    parser = build_parser()
    # Find the subcommand and a --config path without triggering required-flag errors.
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if known.config is not None and argv and argv[0] in _subparsers(parser):
        _apply_config(_subparsers(parser)[argv[0]], read_config(known.config))
    return parser.parse_args(argv)


def _subparsers(parser) -> dict:
    for act in parser._actions:
        if isinstance(act, argparse._SubParsersAction):
            return act.choices
    return {}


# -- commands ----------------------------------------------------------------

def _write(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_simulate(args) -> int:
    try:
        methods = harness.normalise_methods(args.methods.split(","))
        hyper = HamHyperParams(threshold_scale=args.threshold_scale)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    spec = ExperimentSpec(Scenario.from_number(args.setting), args.n, args.m, args.repeats,
                          methods, args.seed, hyper)
    records = run_experiment(spec, workers=args.workers)
    results = records_csv(records, include_timing=args.timing)
    summary = summary_csv(spec, records)
    if args.out is None:
        sys.stdout.write(results)
        sys.stderr.write(summary)
    else:
        out = Path(args.out)
        out.write_text(results)
        out.with_name(out.stem + "_summary.csv").write_text(summary)
        sys.stdout.write(summary)
    return 0


def _diagnostics_table(model) -> str:
    lines = [f"omega_hat = {{{format_set(model.omega_hat, sep=', ')}}}",
             f"{'pattern':<{max(8, model.d)}}  {'n':>7}  {'k':>7}  {'tau':>10}  {'sigma_hat_sq':>12}  selected"]
    for row in model.diagnostics():
        tau = "NA" if math.isnan(row["tau"]) else f"{row['tau']:.6f}"
        sig = "NA" if math.isnan(row["sigma_hat_sq"]) else f"{row['sigma_hat_sq']:.6f}"
        lines.append(f"{row['pattern']:<{max(8, model.d)}}  {row['n']:>7}  {row['k']:>7}  {tau:>10}  {sig:>12}  "
                     f"{'yes' if row['selected'] else ('active' if row['active'] else '')}")
    for note in model.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def cmd_fit_predict(args) -> int:
    try:
        hyper = HamHyperParams(gamma=args.gamma, beta=args.beta, alpha=args.alpha,
                               threshold_scale=args.threshold_scale)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    train = read_train_csv(args.train)
    X_test = read_test_csv(args.test, train.d)
    if args.gamma is not None and len(args.gamma) != train.d:
        raise UsageError(f"--gamma has {len(args.gamma)} entries, training data has d={train.d}")
    model = fit(train, hyper)
    eta = model.decision_function(X_test)
    lines = ["row,label,eta_hat"]
    for i, e in enumerate(eta, start=1):
        lines.append(f"{i},{int(e >= 0.5)},{harness._fmt(float(e))}")
    _write(args.out, "\n".join(lines) + "\n")
    table = _diagnostics_table(model)
    (sys.stderr if args.out is None else sys.stdout).write(table)
    return 0


def decomposition_report(dist: anova.FiniteDistribution, include_components: bool = True) -> dict:
    dec = anova.decompose(dist)
    recon = anova.reconstruct(dec)
    err = float(abs(recon - dist.eta).max()) if dist.n_atoms else 0.0
    sig = {}
    for w in dec.patterns():
        try:
            sig[str(w)] = anova.sigma_sq(dist, dec, w)
        except anova.PatternUnobservable:
            sig[str(w)] = None
    out = {"d": dist.d, "n_atoms": dist.n_atoms, "patterns": [str(w) for w in dec.patterns()]}
    if include_components:
        out["components"] = {str(w): [float(v) for v in dec[w]] for w in dec.patterns()}
    out["sigma_sq"] = sig
    out["sigma_sq_basis"] = "conditional" if dist.conditional else "marginal"
    out["reconstruction_max_error"] = err
    return out


def cmd_decompose(args) -> int:
    if args.dist is None and args.setting is None:
        raise UsageError("one of --dist or --setting is required")
    if args.dist is not None:
        try:
            dist = anova.FiniteDistribution.load(args.dist)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{args.dist}: invalid JSON: {exc}") from None
    else:
        if args.grid_m < 2:
            raise UsageError("--grid-m must be at least 2")
        dist = Scenario.from_number(args.setting).to_finite_distribution(args.grid_m)
    report = decomposition_report(dist, include_components=not args.summary_only)
    _write(args.out, json.dumps(report, indent=1) + "\n")
    return 0


def _parse_omega(text: str) -> list:
    items = [t.strip() for t in text.replace("|", ",").split(",") if t.strip()]
    try:
        pats = [Pattern.parse(t) for t in items]
        ps = pattern_set(pats)
    except ValueError as exc:
        raise UsageError(f"--omega: {exc}") from None
    if not is_antichain(ps):
        raise UsageError("--omega must be an antichain (no pattern may lie below another)")
    return pats


def _parse_counts(text: str, omega: list) -> dict:
    items = [t.strip() for t in text.split(",") if t.strip()]
    try:
        if items and all("=" in t for t in items):
            out = {}
            for t in items:
                k, v = t.split("=", 1)
                out[Pattern.parse(k.strip())] = int(v)
            return out
        if len(items) != len(omega):
            raise UsageError(f"--counts has {len(items)} entries, --omega has {len(omega)}")
        return {w: int(v) for w, v in zip(omega, items)}
    except ValueError as exc:
        raise UsageError(f"--counts: {exc}") from None


def cmd_rate(args) -> int:
    omega = _parse_omega(args.omega)
    counts = _parse_counts(args.counts, omega)
    try:
        rep = harness.minimax_rate(omega, counts, args.gamma, args.beta, args.alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"R = {rep.rate!r}")
    for w in canonical(pattern_set(omega)):
        n_w = counts.get(w, 0)
        term = rep.terms.get(w)
        print(f"term {w} n={n_w} {'unobserved' if term is None else repr(term)}")
    print(f"unobserved = {'yes' if rep.unobserved_flag else 'no'}")
    if rep.empty:
        print("note: empty antichain")
    return 0


COMMANDS = {"simulate": cmd_simulate, "fit-predict": cmd_fit_predict,
            "decompose": cmd_decompose, "rate": cmd_rate}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"hamclf: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hamclf {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (CsvFormatError, ValueError, OSError) as exc:
        print(f"hamclf {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
