# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import json
import sys
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import psutil

from retas import __version__, config, logger
from retas.core.dir import ensure_dirs
from retas.core.estimation import Algorithm, FitConfig, OptimizerConfig
from retas.core.evaluation import FitMode, StudyConfig, StudyDecluster
from retas.core.simulator import STUDY_GAMMA, STUDY_PARAMS, SimConfig
from retas.helpers import (PARAM_NAMES, BandwidthMatrix, ConfigError, DomainError,
                           MagnitudeParams, RetasParams, SpatialWindow, utils)


def _check_keys(cls, data, path: str) -> dict:
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Configuration section '{path}' must be an object")
    allowed = {f.name for f in fields(cls)}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"Unknown configuration key: {path}.{key}" if path else
                              f"Unknown configuration key: {key}")
    return data


def _params(data, path: str) -> Optional[RetasParams]:
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ConfigError(f"'{path}' must be an object of parameter values")
    for key in data:
        if key not in PARAM_NAMES:
            raise ConfigError(f"Unknown configuration key: {path}.{key}")
    missing = [name for name in PARAM_NAMES if name not in data]
    if missing:
        raise ConfigError(f"'{path}' is missing {', '.join(missing)}")
    try:
        params = RetasParams.from_dict(data)
        params.check()
    except (DomainError, TypeError, ValueError) as ex:
        raise ConfigError(f"Invalid '{path}': {ex}") from ex
    return params


def _window(data, path: str) -> Optional[SpatialWindow]:
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ConfigError(f"'{path}' must be an object")
    allowed = {"kind", "x_min", "x_max", "y_min", "y_max"}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"Unknown configuration key: {path}.{key}")
    try:
        return SpatialWindow.from_dict(data)
    except (DomainError, KeyError, ValueError) as ex:
        raise ConfigError(f"Invalid '{path}': {ex}") from ex


@dataclass
class ModelSection:
    params: Optional[dict] = None
    init: Optional[dict] = None
    fix_kappa: bool = False


@dataclass
class KdeSection:
    h: Optional[dict] = None
    zeta: list = field(default_factory=lambda: [1.0])
    extra_params: int = 8
    grid_size: int = 100


@dataclass
class OptimizerSection:
    algorithm: str = Algorithm.NELDER_MEAD.value
    max_evals: int = 4000
    x_tol: float = 1e-6
    f_tol: float = 1e-8
    polish: bool = True


@dataclass
class FitSection:
    tol: float = config.TOLERANCE
    max_iter: int = config.MAX_ITER
    min_iter: int = 2
    background: str = "kde"
    means: Optional[list] = None
    variances: Optional[list] = None


@dataclass
class SimulationSection:
    params: Optional[dict] = None
    gamma: float = STUDY_GAMMA
    m0: float = 0.0
    bg_means: list = field(default_factory=lambda: [0.0, 0.0])
    bg_vars: list = field(default_factory=lambda: [0.05, 0.10])
    T: float = 250.0
    window: Optional[dict] = None
    replicates: int = 1
    max_events: int = config.MAX_EVENTS


@dataclass
class StudySection:
    fit_mode: str = FitMode.KNOWN.value
    zeta: float = 1.5
    zeta_grid: list = field(default_factory=lambda: [0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
    decluster_modes: list = field(default_factory=list)
    replicates: int = 100
    trim_frac: float = 0.05


@dataclass
class CatalogSection:
    columns: Optional[dict] = None
    m0: Optional[float] = None
    window: Optional[dict] = None
    origin: Optional[str] = None
    end: Optional[object] = None


@dataclass
class RunConfig:
    """A JSON run configuration; unknown keys at any level are rejected."""

    model: ModelSection = field(default_factory=ModelSection)
    kde: KdeSection = field(default_factory=KdeSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    fit: FitSection = field(default_factory=FitSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    study: StudySection = field(default_factory=StudySection)
    catalog: CatalogSection = field(default_factory=CatalogSection)
    seed: Optional[int] = None
    threads: Optional[int] = None
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = _check_keys(cls, data, "")
        if "raw" in data:
            raise ConfigError("Unknown configuration key: raw")
        sections = {}
        for f in fields(cls):
            if f.name in ("seed", "threads", "raw"):
                continue
            section_cls = f.default_factory
            sections[f.name] = section_cls(**_check_keys(section_cls, data.get(f.name), f.name))
        run = cls(**sections, seed=data.get("seed"), threads=data.get("threads"), raw=data)
        run.validate()
        return run

    def validate(self) -> None:
        # building every derived object surfaces bad values with their key path
        self.init_params()
        self.true_params()
        self.bandwidth()
        self.fit_config()
        self.sim_config(0)
        self.study_config(0)
        self.catalog_window()
        if self.fit.background not in ("kde", "parametric"):
            raise ConfigError(f"fit.background must be 'kde' or 'parametric', got {self.fit.background!r}")
        if any(not float(z) > 0 for z in self.kde.zeta):
            raise ConfigError("kde.zeta entries must be positive")

    def init_params(self) -> Optional[RetasParams]:
        return _params(self.model.init, "model.init")

    def true_params(self) -> Optional[RetasParams]:
        return _params(self.model.params, "model.params")

    def bandwidth(self) -> Optional[BandwidthMatrix]:
        h = self.kde.h
        if h is None:
            return None
        _check_keys(BandwidthMatrix, h, "kde.h")
        try:
            return BandwidthMatrix(float(h["h11"]), float(h["h12"]), float(h["h22"]))
        except (KeyError, DomainError, TypeError, ValueError) as ex:
            raise ConfigError(f"Invalid 'kde.h': {ex}") from ex

    def optimizer_config(self) -> OptimizerConfig:
        try:
            return OptimizerConfig(**self.optimizer.__dict__)
        except (DomainError, ValueError) as ex:
            raise ConfigError(f"Invalid 'optimizer': {ex}") from ex

    def fit_config(self, fix_kappa: Optional[bool] = None) -> FitConfig:
        if not (self.fit.tol > 0 and self.fit.max_iter >= 1):
            raise ConfigError("fit.tol must be positive and fit.max_iter at least 1")
        return FitConfig(
            optimizer=self.optimizer_config(),
            h=self.bandwidth(),
            tol=float(self.fit.tol),
            max_iter=int(self.fit.max_iter),
            min_iter=int(self.fit.min_iter),
            extra_params=int(self.kde.extra_params),
            fix_kappa=self.model.fix_kappa if fix_kappa is None else fix_kappa,
            init=self.init_params(),
        )

    def sim_config(self, seed: int) -> SimConfig:
        sim = self.simulation
        try:
            return SimConfig(
                params=_params(sim.params, "simulation.params") or STUDY_PARAMS,
                mag=MagnitudeParams(gamma=float(sim.gamma), m0=float(sim.m0)),
                bg_means=tuple(float(v) for v in sim.bg_means),
                bg_vars=tuple(float(v) for v in sim.bg_vars),
                T=float(sim.T),
                seed=int(seed),
                window=_window(sim.window, "simulation.window") or SpatialWindow.whole_plane(),
                max_events=int(sim.max_events),
            )
        except DomainError as ex:
            raise ConfigError(f"Invalid 'simulation': {ex}") from ex

    def study_config(self, seed: int) -> StudyConfig:
        st = self.study
        try:
            return StudyConfig(
                sim=self.sim_config(seed),
                fit_mode=FitMode(st.fit_mode),
                zeta=float(st.zeta),
                zeta_grid=tuple(float(z) for z in st.zeta_grid),
                decluster_modes=tuple(StudyDecluster(m) for m in st.decluster_modes),
                replicates=int(st.replicates),
                trim_frac=float(st.trim_frac),
                fit=self.fit_config(),
            )
        except (DomainError, ValueError) as ex:
            raise ConfigError(f"Invalid 'study': {ex}") from ex

    def catalog_window(self) -> Optional[SpatialWindow]:
        return _window(self.catalog.window, "catalog.window")

    def catalog_kwargs(self) -> dict:
        origin = None
        if self.catalog.origin:
            try:
                origin = datetime.fromisoformat(self.catalog.origin)
            except ValueError as ex:
                raise ConfigError(f"Invalid 'catalog.origin': {ex}") from ex
        return {
            "m0": self.catalog.m0,
            "window": self.catalog_window(),
            "origin": origin,
            "end": self.catalog.end,
            "columns": self.catalog.columns,
        }


def load_run_config(path: Optional[str | Path]) -> RunConfig:
    if path is None:
        return RunConfig.from_dict({})
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as file:
            data = json.load(file)
    except OSError as ex:
        raise ConfigError(f"Cannot read configuration {path}: {ex}") from ex
    except json.JSONDecodeError as ex:
        raise ConfigError(f"Configuration {path} is not valid JSON: {ex}") from ex
    return RunConfig.from_dict(data)


@dataclass
class Session:
    command: str
    run: RunConfig
    seed: int
    threads: int
    out_dir: Path


def open_session(command: str, args) -> Session:
    """Resolve seed, threads and output directory, then write provenance.json."""
    run = load_run_config(getattr(args, "config", None))
    seed = next(v for v in (getattr(args, "seed", None), run.seed, config.SEED) if v is not None)
    threads = utils.resolve_threads(getattr(args, "threads", None) or run.threads, config.THREADS)
    out_dir, = ensure_dirs(getattr(args, "out", None) or config.OUT_DIR)
    utils.write_json(
        {
            "command": command,
            "argv": sys.argv[1:],
            "config_sha256": utils.sha256(run.raw),
            "seed": seed,
            "threads": threads,
            "version": __version__,
            "started_utc": datetime.now(timezone.utc).isoformat(),
            "cpu_count": psutil.cpu_count(),
        },
        out_dir / "provenance.json",
    )
    logger.info(f"{command}: seed={seed}, threads={threads}, output in {out_dir}.")
    return Session(command, run, int(seed), threads, out_dir)
