# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


from dataclasses import replace

from retas import logger
from retas.core.evaluation import StudyDecluster, run_study
from retas.core.runconfig import open_session


def register(subparsers):
    parser = subparsers.add_parser("evaluate", help="run a simulation study (estimates, AUC, accuracy)")
    parser.add_argument("--replicates", type=int, default=None)
    parser.add_argument("--mode", action="append", choices=[m.value for m in StudyDecluster],
                        help="decluster mode to score; repeat for several")
    return parser


def run(args) -> None:
    session = open_session("evaluate", args)
    study = session.run.study_config(session.seed)
    if args.replicates:
        study = replace(study, replicates=args.replicates)
    if args.mode:
        study = replace(study, decluster_modes=tuple(args.mode))

    result = run_study(study, workers=session.threads)
    result.write(session.out_dir)
    logger.info(f"Study written to {session.out_dir} ({result.failures} failed replicates).")
