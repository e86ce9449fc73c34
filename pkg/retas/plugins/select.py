# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import pandas as pd

from retas import logger
from retas.core.estimation import select_smoothing
from retas.core.report import write_fit
from retas.core.runconfig import open_session
from retas.helpers import PARAM_NAMES, NumericalError, utils
from retas.plugins import parse_zeta
from retas.plugins.fit import read_catalog


def register(subparsers):
    parser = subparsers.add_parser("select", help="choose the bandwidth multiplier by AICc")
    parser.add_argument("catalog", help="catalog CSV (time,x,y,magnitude)")
    parser.add_argument("--zeta", default=None, help="comma-separated multipliers, e.g. 0.5,1,1.5")
    parser.add_argument("--mode", choices=("retas", "etas"), default="retas")
    parser.add_argument("--columns", default=None, help="column map, e.g. time=origintime,x=lon")
    return parser


def run(args) -> None:
    session = open_session("select", args)
    run_cfg = session.run
    catalog = read_catalog(session, args)
    grid = parse_zeta(args.zeta) if args.zeta else [float(z) for z in run_cfg.kde.zeta]
    fit_cfg = run_cfg.fit_config(fix_kappa=args.mode == "etas" or None)

    selection = select_smoothing(catalog, grid, fit_cfg, workers=session.threads)
    rows = []
    for zeta in sorted(selection.reports):
        report = selection.reports[zeta]
        write_fit(report, catalog, session.out_dir, stem=f"report_zeta_{zeta:g}",
                  grid_size=run_cfg.kde.grid_size)
        rows.append({
            "zeta": zeta,
            **report.params.to_dict(),
            "productivity": report.productivity,
            "pct": report.pct_mainshocks,
            "loglik": report.loglik,
            "dof": report.dof_kde,
            "aicc": report.aicc,
            "converged": report.converged,
        })
    table = pd.DataFrame(rows, columns=["zeta", *PARAM_NAMES, "productivity", "pct",
                                        "loglik", "dof", "aicc", "converged"])
    utils.write_csv(table, session.out_dir / "aicc.csv")
    utils.write_json(
        {"best_zeta": selection.best_zeta, "grid": grid, "failed": selection.failed},
        session.out_dir / "selection.json",
    )
    if selection.best_zeta is None:
        raise NumericalError("Every smoothing multiplier failed")
    logger.info(f"Selected zeta={selection.best_zeta:g}.")
