# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


from retas import logger
from retas.core.estimation import mle_fixed_background
from retas.core.report import load_fit, write_decluster
from retas.core.runconfig import open_session
from retas.core.smoother import DeclusterMode, decluster
from retas.helpers import DataError
from retas.plugins.fit import read_catalog


def register(subparsers):
    parser = subparsers.add_parser("decluster", help="main-shock and parent probabilities from a fit")
    parser.add_argument("catalog", help="catalog CSV used for the fit")
    parser.add_argument("report", help="report.json written by the fit command")
    parser.add_argument("--mode", choices=("smoothed", "filtered", "etas"), default="smoothed",
                        help="etas refits with kappa = 1 (unless the fit already has it) and smooths")
    parser.add_argument("--threshold", type=float, default=0.5)
    parser.add_argument("--columns", default=None, help="column map, e.g. time=origintime,x=lon")
    return parser


def run(args) -> None:
    session = open_session("decluster", args)
    catalog = read_catalog(session, args)
    fit = load_fit(args.report)
    if fit.n != catalog.n:
        raise DataError(f"Fit report covers {fit.n} events but the catalog has {catalog.n}")

    params = fit.params
    mode = DeclusterMode.SMOOTHED if args.mode == "etas" else DeclusterMode(args.mode)
    if args.mode == "etas" and params.kappa != 1.0:
        mle = mle_fixed_background(catalog, fit.nu, params.with_values(kappa=1.0),
                                   session.run.optimizer_config(), fix_kappa=True)
        logger.info(f"ETAS refit with kappa = 1: loglik={mle.loglik:.4f} ({mle.evaluations} evaluations).")
        params = mle.params

    result = decluster(catalog, params, fit.nu, mode)
    write_decluster(result, catalog, session.out_dir, threshold=args.threshold, mode=args.mode)
    logger.info(
        f"{result.mainshock_count(args.threshold)} of {catalog.n} events have main-shock "
        f"probability above {args.threshold:g}."
    )
