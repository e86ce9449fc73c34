# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


from retas import logger
from retas.core.catalog import load_catalog
from retas.core.estimation import fit_fixed_background, semiparametric_fit, telescoping_init
from retas.core.likelihood import ParametricBackground
from retas.core.report import write_fit
from retas.core.runconfig import Session, open_session
from retas.helpers import ConfigError
from retas.plugins import parse_columns, parse_zeta


def register(subparsers):
    parser = subparsers.add_parser("fit", help="fit the RETAS model to a catalog")
    parser.add_argument("catalog", help="catalog CSV (time,x,y,magnitude)")
    parser.add_argument("--zeta", default=None, help="bandwidth multiplier (first value of a list is used)")
    parser.add_argument("--mode", choices=("retas", "etas"), default="retas",
                        help="etas fixes kappa at 1")
    parser.add_argument("--columns", default=None, help="column map, e.g. time=origintime,x=lon")
    return parser


def read_catalog(session: Session, args):
    kwargs = session.run.catalog_kwargs()
    if getattr(args, "columns", None):
        kwargs["columns"] = parse_columns(args.columns)
    return load_catalog(args.catalog, **kwargs)


def run(args) -> None:
    session = open_session("fit", args)
    run_cfg = session.run
    catalog = read_catalog(session, args)
    fit_cfg = run_cfg.fit_config(fix_kappa=args.mode == "etas" or None)

    if run_cfg.fit.background == "parametric":
        if not (run_cfg.fit.means and run_cfg.fit.variances):
            raise ConfigError("A parametric background needs fit.means and fit.variances")
        nu = ParametricBackground(*run_cfg.fit.means, *run_cfg.fit.variances, window=catalog.window)
        report = fit_fixed_background(catalog, nu, fit_cfg.init or telescoping_init(catalog), fit_cfg)
    else:
        zeta = parse_zeta(args.zeta)[0] if args.zeta else float(run_cfg.kde.zeta[0])
        report = semiparametric_fit(catalog, zeta, fit_cfg)

    write_fit(report, catalog, session.out_dir, grid_size=run_cfg.kde.grid_size)
    logger.info(
        f"Fit finished: loglik={report.loglik:.4f}, AICc={report.aicc:.4f}, "
        f"main shocks={report.pct_mainshocks:.2f}%, converged={report.converged}."
    )
