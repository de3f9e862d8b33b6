"""Command-line front end (``asl`` / ``python -m adaptive_support``).

Exit status: 0 on success, 2 for usage or domain errors, 3 when an exact
computation is refused because the class is too large.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import sys
import warnings

import numpy as np

from . import bounds as B
from . import harness as H
from .classes import greedy_star_packing, parse_class
from .driver import adaptive_trial, default_rule
from .errors import CapabilityRefusal, DomainError, UnsupportedBound
from .signal import NormalStream, trial_seed_sequences
from .slrt import DEFAULT_ETA
from .strategies import write_trace

EXIT_OK, EXIT_USAGE, EXIT_REFUSED = 0, 2, 3

CONFIG_KEYS = {"class", "procedure", "mu", "mu_grid", "m", "epsilon", "delta", "eta", "trials",
               "seed", "support_selection", "output"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise DomainError(message)


# ------------------------------------------------------------------ helpers

def _floats(text: str) -> list:
    """``"a,b,c"`` or ``"start:stop:step"`` (inclusive stop) as a list of floats."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise DomainError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(x) for x in parts)
        if not step > 0 or stop < start:
            raise DomainError(f"bad range {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise DomainError(f"expected comma-separated numbers, got {text!r}") from None


def _supports(text: str) -> tuple:
    try:
        return tuple(tuple(int(i) for i in part.split(",")) for part in text.split(";") if part)
    except ValueError:
        raise DomainError(f"supports must look like '1,2,3;4,5,6', got {text!r}") from None


def load_config(path: str) -> dict:
    """Read a JSON run description, rejecting keys outside the documented set."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise DomainError("config must be a JSON object")
    unknown = sorted(set(doc) - CONFIG_KEYS)
    if unknown:
        raise DomainError(f"unknown config keys: {', '.join(unknown)}")
    if "epsilon" in doc and "delta" in doc:
        raise DomainError("give either epsilon or delta, not both")
    if "mu" in doc and "mu_grid" in doc:
        raise DomainError("give either mu or mu_grid, not both")
    return doc


def _merged(args) -> dict:
    """File values overridden by any flag that was given explicitly."""
    conf = load_config(args.config) if getattr(args, "config", None) else {}
    flags = {"class": args.cls, "procedure": args.procedure, "mu": args.mu, "m": args.m,
             "eta": args.eta, "trials": args.trials, "seed": args.seed,
             "support_selection": args.support_selection, "output": args.output}
    if args.mu_grid is not None:
        flags["mu_grid"] = _floats(args.mu_grid)
        conf.pop("mu", None)
    if args.mu is not None:
        conf.pop("mu_grid", None)
    target = args.eps if args.eps is not None else args.delta
    if target is not None:
        conf.pop("epsilon", None)
        conf.pop("delta", None)
        flags["epsilon"] = target
    for key, value in flags.items():
        if value is not None:
            conf[key] = value
    return conf


def _experiment(conf: dict, args) -> H.ExperimentConfig:
    if "class" not in conf:
        raise DomainError("a class is required (--class or the config key 'class')")
    spec = parse_class(conf["class"])
    grid = conf.get("mu_grid")
    if isinstance(grid, str):
        grid = _floats(grid)
    target = conf.get("epsilon", conf.get("delta", 0.1))
    return H.ExperimentConfig(
        spec=spec,
        procedure=conf.get("procedure", H.ADAPTIVE),
        mu=None if conf.get("mu") is None else float(conf["mu"]),
        mu_grid=None if grid is None else tuple(float(x) for x in grid),
        m=None if conf.get("m") is None else float(conf["m"]),
        target=float(target),
        metric=args.metric,
        eta=float(conf.get("eta", DEFAULT_ETA)),
        trials=int(conf.get("trials", 100)),
        base_seed=int(conf.get("seed", 0)),
        support_selection=conf.get("support_selection", H.UNIFORM),
        supports=_supports(args.supports) if args.supports else (),
        budget_matched=args.budget_matched,
    )


@contextlib.contextmanager
def _sink(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        try:
            fh = open(path, "w", newline="")
        except OSError as exc:
            raise DomainError(f"cannot write {path}: {exc}") from None
        with fh:
            yield fh


# ----------------------------------------------------------------- commands

def cmd_bounds(args) -> int:
    spec = parse_class(args.cls)
    target = args.eps if args.eps is not None else args.delta
    if target is None:
        raise DomainError("bounds needs --eps (or --delta)")
    metric = args.metric or (B.HAMMING if spec.kind == "sset" else B.PROB_ERROR)
    query = B.BoundQuery(spec, float(spec.n if args.m is None else args.m), target, metric,
                         args.direction, args.include_empty, args.greedy_packing)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            result = B.compute_bound(query)
        except UnsupportedBound as exc:
            ref = f" (nearest available result: {exc.reference})" if exc.reference else ""
            raise DomainError(f"{exc}{ref}") from None
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.json:
        print(json.dumps(result.as_dict(), indent=2))
        return EXIT_OK
    print(f"class: {spec.text()}")
    print(f"direction: {args.direction}  metric: {metric}  m: {query.m:g}  target: {target:g}")
    print(f"formula: {result.formula_id}")
    for name, value in result.terms:
        print(f"  {name:<28s} {value:.6f}")
    for note in result.notes:
        print(f"  note: {note}")
    print(f"mu^2 = {result.mu_squared!r}")
    print(f"mu   = {result.mu_threshold:.4f}  ({result.mu_threshold!r})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    conf = _merged(args)
    cfg = _experiment(conf, args)
    if cfg.mu_grid is not None:
        rows = [H.run_trials(cfg, mu, _target(cfg, mu), args.workers, args.timing)
                for mu in cfg.mu_grid]
    else:
        if cfg.mu is None:
            raise DomainError("simulate needs mu (or mu_grid)")
        rows = [H.run_trials(cfg, cfg.mu, _target(cfg, cfg.mu), args.workers, args.timing)]
    with _sink(conf.get("output")) as fh:
        H.write_summaries(rows, fh)
    return EXIT_OK


def _target(cfg, mu):
    if cfg.budget_matched and cfg.procedure == H.ADAPTIVE:
        return H.matched_target(cfg, mu)
    return cfg.target


def cmd_sweep(args) -> int:
    conf = _merged(args)
    procs = [H.ADAPTIVE, H.NONADAPTIVE] if conf.get("procedure") == "both" else [None]
    rows = []
    for proc in procs:
        if proc is not None:
            conf["procedure"] = proc
        cfg = _experiment(conf, args)
        curve = H.phase_sweep(cfg, args.workers, args.timing)
        rows.extend(curve)
        print(f"{cfg.procedure}: threshold_at({args.level:g}) = {H.threshold_at(curve, args.level)}",
              file=sys.stderr)
    with _sink(conf.get("output")) as fh:
        H.write_summaries(rows, fh)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    gammas = _floats(args.gammas)
    rows = H.slrt_calibration(args.mu, args.alpha, args.beta, gammas, args.trials, args.seed)
    with _sink(args.output) as fh:
        H.write_calibration(rows, fh)
    return EXIT_OK


def cmd_pack_stars(args) -> int:
    stars = greedy_star_packing(args.p, args.s)
    with _sink(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["star", "center", "leaves"])
        for i, st in enumerate(stars, 1):
            w.writerow([i, st.center, " ".join(str(v) for v in st.leaves)])
    bound = B.star_packing_bound(args.p, args.s, greedy=False)
    print(f"stars: {len(stars)}", file=sys.stderr)
    print(f"lower bound p(p-1-s)/(2s) = {bound:g}", file=sys.stderr)
    return EXIT_OK


def cmd_scaling(args) -> int:
    specs = [parse_class(c) for c in args.cls]
    rows = B.scaling_table(specs, args.m)
    with _sink(args.output) as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return EXIT_OK


def cmd_trace(args) -> int:
    spec = parse_class(args.cls)
    ss_support, ss_strategy, ss_noise = trial_seed_sequences(args.seed, 0, 3)
    from .classes import sample_member

    support = _supports(args.support)[0] if args.support else sample_member(
        spec, np.random.default_rng(ss_support))
    rule = default_rule(spec, args.eps, args.metric or B.PROB_ERROR)
    res = adaptive_trial(spec, support, args.mu, rule, eta=args.eta, m=args.m,
                         strategy_rng=np.random.default_rng(ss_strategy),
                         noise=NormalStream(np.random.default_rng(ss_noise)), keep_trace=True)
    with _sink(args.output) as fh:
        write_trace(res.trace, fh)
    print(f"support: {list(support)}", file=sys.stderr)
    print(f"estimate: {list(res.estimate)}  hamming: {res.hamming}  "
          f"precision: {res.total_precision:.6g}  truncated: {res.truncated}", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------------- parser

def _add_run_flags(p):
    p.add_argument("--config", help="JSON file with run settings")
    p.add_argument("--class", dest="cls", help="class string, e.g. sset:n=1000,s=10")
    p.add_argument("--procedure", help="adaptive | nonadaptive (sweep also accepts both)")
    p.add_argument("--mu", type=float)
    p.add_argument("--mu-grid", help="comma list or start:stop:step")
    p.add_argument("--m", type=float, help="precision budget (default n)")
    p.add_argument("--eps", type=float, help="error target (epsilon or delta)")
    p.add_argument("--delta", type=float, help="alias of --eps")
    p.add_argument("--metric", choices=[B.HAMMING, B.PROB_ERROR])
    p.add_argument("--eta", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--support-selection", choices=[H.UNIFORM, H.FIXED, H.CORNERS])
    p.add_argument("--supports", help="fixed supports, e.g. '1,2,3;4,5,6'")
    p.add_argument("--budget-matched", action="store_true",
                   help="pick the adaptive target so its sufficient magnitude equals mu")
    p.add_argument("--workers", type=int, help="worker processes (default: cores, capped by ASL_THREADS)")
    p.add_argument("--timing", action="store_true", help="record wall_ms (otherwise 0)")
    p.add_argument("--output", help="CSV path, '-' for stdout (default)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="asl", description="Adaptive support recovery toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bounds", help="closed-form magnitude thresholds")
    p.add_argument("--class", dest="cls", required=True)
    p.add_argument("--m", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--direction", choices=[B.SUFFICIENT, B.NONADAPTIVE, B.ADAPTIVE],
                   default=B.SUFFICIENT)
    p.add_argument("--metric", choices=[B.HAMMING, B.PROB_ERROR])
    p.add_argument("--include-empty", action="store_true")
    p.add_argument("--greedy-packing", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="Monte Carlo trials at one mu (or each grid mu)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="phase-transition sweep over a mu grid")
    _add_run_flags(p)
    p.add_argument("--level", type=float, default=0.5, help="error level for threshold_at")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="SLRT error rates and precision over a Gamma grid")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gammas", required=True, help="decreasing comma list")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("pack-stars", help="greedy edge-disjoint star packing")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_pack_stars)

    p = sub.add_parser("scaling", help="order-of-magnitude scaling laws per class")
    p.add_argument("--class", dest="cls", action="append", required=True)
    p.add_argument("--m", type=float)
    p.add_argument("--output")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("trace", help="query trace of one adaptive trial")
    p.add_argument("--class", dest="cls", required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--metric", choices=[B.HAMMING, B.PROB_ERROR])
    p.add_argument("--m", type=float)
    p.add_argument("--eta", type=float, default=DEFAULT_ETA)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--support", help="explicit support, e.g. '3,4,5'")
    p.add_argument("--output")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CapabilityRefusal as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
