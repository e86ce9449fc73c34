# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


from dataclasses import replace

from retas import logger
from retas.core.runconfig import open_session
from retas.core.simulator import simulate_batch, write_simulation


def register(subparsers):
    parser = subparsers.add_parser("simulate", help="simulate RETAS catalogs with true branching labels")
    parser.add_argument("--replicates", type=int, default=None, help="number of catalogs (numbered files)")
    parser.add_argument("--kappa", type=float, default=None,
                        help="renewal shape; sets beta = 1/kappa as in the declustering design")
    return parser


def run(args) -> None:
    session = open_session("simulate", args)
    cfg = session.run.sim_config(session.seed)
    if args.kappa is not None:
        cfg = replace(cfg, params=cfg.params.with_values(kappa=args.kappa, beta=1.0 / args.kappa))
    replicates = args.replicates or session.run.simulation.replicates

    width = len(str(replicates))
    for k, sim in enumerate(simulate_batch(cfg, replicates)):
        stem = "catalog" if replicates == 1 else f"catalog_{k + 1:0{width}d}"
        catalog_path, _ = write_simulation(sim, session.out_dir, stem)
        logger.info(
            f"Wrote {catalog_path.name}: {sim.catalog.n} events, "
            f"{int(sim.is_mainshock.sum())} main shocks."
        )
