"""Command-line interface.

Exit codes: 0 success, 2 bad input or configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import rng as rngmod
from .errors import HomLCError, InputError
from .evaluation import body_error, dx2, hellinger_sq_mc, log_density
from .geometry import body_from_dict
from .io import (BODY_SCHEMA, load_model, read_json, read_matrix, save_model,
                 truth_from_dict, validate, write_csv, write_json)
from .pipeline import FitConfig, SimConfig, fit, simulate
from .sampling import GeneratorFamily, sample_density

log = logging.getLogger("homlc")


def cmd_fit(args):
    config = FitConfig.from_dict(read_json(args.config))
    data = read_matrix(args.data)
    model = fit(config, data)
    save_model(model, args.out)
    log.info("fitted %d knots on %d rows", model.generator.breakpoints.size, data.shape[0])


def cmd_density(args):
    model = load_model(args.model)
    pts = read_matrix(args.points, expected_cols=model.p)
    ld = np.atleast_1d(log_density(model, pts))
    write_csv(args.out, ["log_density"], [[v] for v in ld])


def cmd_sample(args):
    body = body_from_dict(validate(read_json(args.body), BODY_SCHEMA))
    if args.mu:
        mu = read_matrix(args.mu).reshape(-1)
    else:
        mu = np.zeros(body.p)
    if args.family == "unif":
        family = GeneratorFamily.unif(args.radius if args.radius else float(body.p))
    else:
        family = GeneratorFamily(args.family)
    X = sample_density(family, body, mu, args.n, rngmod.substream(args.seed, rngmod.DATA))
    write_csv(args.out, None, X.tolist())


def cmd_simulate(args):
    cfg = SimConfig.from_dict(read_json(args.config))
    if args.workers:
        cfg.workers = args.workers
    rows = simulate(cfg, out_path=args.out)
    failed = sum(1 for r in rows if r["error"])
    log.info("%d replicates, %d failed", len(rows), failed)


def cmd_eval(args):
    model = load_model(args.model)
    truth = truth_from_dict(read_json(args.truth))
    if truth.p != model.p:
        raise InputError("model and truth dimensions differ")
    data = read_matrix(args.data, expected_cols=model.p)
    d = dx2(model, truth, data)
    h, se = hellinger_sq_mc(model, truth, args.mc, rngmod.substream(args.seed, rngmod.HELLINGER))
    out = {"dx2": d.value if np.isfinite(d.value) else None, "out_of_support": d.out_of_support,
           "hell2": h, "hell2_se": se, "n_mc": args.mc, "seed": args.seed}
    if model.meta.get("mode") in ("scatter", "hull"):
        out["body_err"] = body_error(model.body, truth.body, 2000,
                                     rngmod.derived_seed(args.seed, rngmod.BODY_ERROR))
    write_json(args.out, out)


def build_parser():
    ap = argparse.ArgumentParser(prog="homlc",
                                 description="Homothetic log-concave density estimation.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model to a CSV sample")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("density", help="evaluate log-density of a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("sample", help="draw from a named family on a body")
    p.add_argument("--family", required=True, choices=["gauss", "unif", "exp"])
    p.add_argument("--body", required=True)
    p.add_argument("--mu")
    p.add_argument("--radius", type=float, help="support radius for unif (default p)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("simulate", help="run a simulation grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="score a model against a known truth")
    p.add_argument("--model", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mc", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except HomLCError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
