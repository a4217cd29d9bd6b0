"""Command-line entry point: ``chainfrac <subcommand> --config PATH --out DIR``.

Exit status 0 on success, 1 on a domain error (including failed axiom
checks), 2 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .axioms import validate_axioms
from .config import parse_config
from .continuum import crack_predictor_f, estimate_inf_h
from .discrete import ChainState, minimize_hn
from .effective import build_effective, effective_table
from .errors import AxiomViolation, ChainFracError, ConfigError
from .gamma_dev import build_competitors, first_order_lower_bound, splitting_identity_check
from .io import write_csv, write_json
from .sweep import run_sweep

log = logging.getLogger("chainfrac")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser():
    p = _Parser(prog="chainfrac", description="Atomistic chain energies, effective potentials and their limits.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "effective": "tabulate the effective potential J0 and its convex envelope",
        "minimize": "minimize the discrete energy at one chain size",
        "continuum-min": "estimate the infimum of the continuum energy",
        "predict-cracks": "evaluate the crack predictor F and its argmax set",
        "competitors": "build slope-capped competitors for a discrete minimizer",
        "sweep": "n-sweep with first-order diagnostics",
        "validate-axioms": "check the structural hypotheses on the potentials",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text, description=text)
        sp.add_argument("--config", required=True, metavar="PATH", help="experiment config (JSON)")
        sp.add_argument("--out", metavar="DIR", help="output directory (default: config 'output' or .)")
        sp.add_argument("--jobs", type=int, default=1, metavar="N", help="worker threads for multi-start search")
    return p


def _effective(cfg, strict=True):
    return build_effective(cfg.model(), cfg.search_params(), strict=strict)


def _checked_effective(cfg):
    """Effective profile after the axiom checks; AxiomViolation carries the report on failure."""
    model = cfg.model()
    eff = build_effective(model, cfg.search_params(), strict=False)
    report = validate_axioms(model, eff)
    if not report.passed:
        raise AxiomViolation("axiom validation failed", report)
    return eff


def _minimize(cfg, eff, jobs, n=None):
    ell, t0, t1 = cfg.lengths(eff.gamma)
    load = cfg.build_load(eff.gamma, ell)
    n = n or cfg.chain_n()
    pred = crack_predictor_f(load)
    opts = cfg.minimize_opts(crack_sites=tuple(pred.endpoints()), jobs=jobs)
    rep = minimize_hn(ChainState.affine(n, ell, t0, t1), cfg.model(), load, opts, gamma=eff.gamma)
    return rep, load


def cmd_effective(cfg, out, jobs):
    eff = _effective(cfg)
    t = effective_table(eff)
    cols = ("z", "j0", "j0_star_star", "splitter_b")
    write_csv(out / "effective.csv", cols, zip(*(t[c] for c in cols)))
    write_json(out / "effective_profile.json", eff.to_json())
    print(f"gamma={eff.gamma!r} J0(gamma)={eff.j0_at_gamma!r} gamma_c={eff.gamma_c!r}")


def cmd_minimize(cfg, out, jobs):
    eff = _checked_effective(cfg)
    rep, _ = _minimize(cfg, eff, jobs)
    write_csv(out / "minimize.csv", ("i", "x_i", "u_i", "slope_i"), rep.state.to_rows())
    write_json(out / "minimize_report.json", rep.to_dict())
    print(f"n={rep.state.n} energy={rep.energy!r} reason={rep.reason} start={rep.start}")


def cmd_continuum_min(cfg, out, jobs):
    eff = _effective(cfg)
    ell, _, _ = cfg.lengths(eff.gamma)
    res = estimate_inf_h(eff, cfg.build_load(eff.gamma, ell), ell, cfg.inf_h_opts())
    write_json(out / "continuum_min.json", res.to_json())
    print(f"inf_h={res.value!r}")


def cmd_predict_cracks(cfg, out, jobs):
    eff = _effective(cfg)
    ell, _, _ = cfg.lengths(eff.gamma)
    load = cfg.build_load(eff.gamma, ell)
    profile = estimate_inf_h(eff, load, ell, cfg.inf_h_opts()).profile if load.depends_on_u else None
    pred = crack_predictor_f(load, profile)
    write_csv(out / "cracks.csv", ("x", "F"), zip(pred.x, pred.F))
    write_json(out / "cracks_M.json", pred.to_json())
    print(f"max_F={pred.max_f!r} M={pred.M}")


def cmd_competitors(cfg, out, jobs):
    eff = _checked_effective(cfg)
    rep, load = _minimize(cfg, eff, jobs)
    model = cfg.model()
    pair = build_competitors(rep.state, eff.gamma)
    lb = first_order_lower_bound(rep.state, model, eff, load, pair)
    doc = {"n": rep.state.n, "energy": rep.energy, "competitors": pair.to_dict(),
           "identity_violation": splitting_identity_check(rep.state, model, eff), "lower_bound": lb.to_dict()}
    write_json(out / "competitors.json", doc)
    print(f"closeness={pair.closeness!r} slack={lb.slack!r}")


def cmd_sweep(cfg, out, jobs):
    eff = _checked_effective(cfg)
    res = run_sweep(cfg, eff, jobs=jobs)
    cols = res.columns() or ["n", "energy", "h1n"] + [f"count_eps_{e:g}" for e in cfg.eps_list] + [
        "excess_sq", "min_slope", "identity_violation", "lb_slack"]
    write_csv(out / "sweep.csv", cols, ([r[c] for c in cols] for r in res.rows))
    write_json(out / "sweep_summary.json", res.summary)
    v = res.summary["verdicts"]
    print(f"rows={v['rows']} degenerate_first_order_limit={v['degenerate_first_order_limit']}")


def cmd_validate_axioms(cfg, out, jobs):
    model = cfg.model()
    eff = build_effective(model, cfg.search_params(), strict=False)
    report = validate_axioms(model, eff)
    write_json(out / "axioms.json", report.to_dict())
    print(report.summary())
    if not report.passed:
        raise AxiomViolation("axiom validation failed", None)


COMMANDS = {
    "effective": cmd_effective, "minimize": cmd_minimize, "continuum-min": cmd_continuum_min,
    "predict-cracks": cmd_predict_cracks, "competitors": cmd_competitors, "sweep": cmd_sweep,
    "validate-axioms": cmd_validate_axioms,
}


def _setup_logging():
    level = LOG_LEVELS.get(os.environ.get("CHAINFRAC_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.setLevel(level)


def dispatch(argv=None):
    """Run one subcommand; returns the exit status."""
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    if args.jobs < 1:
        print("chainfrac: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    out = Path(args.out or cfg.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    np.seterr(all="ignore")
    try:
        COMMANDS[args.command](cfg, out, args.jobs)
    except AxiomViolation as exc:
        if exc.report is not None:
            print(exc.report.summary())
            write_json(out / "axioms.json", exc.report.to_dict())
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    except ChainFracError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
