# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd

from retas import __version__
from retas.core.catalog import Catalog
from retas.core.estimation import FitReport
from retas.core.evaluation import cluster_report
from retas.core.kde import WeightedKde
from retas.core.likelihood import (BackgroundIntensity, ConstantBackground, KdeBackground,
                                   ParametricBackground)
from retas.core.smoother import DeclusterResult, most_probable_labels
from retas.helpers import BandwidthMatrix, DataError, RetasParams, SpatialWindow, utils

REPORT_SCHEMA = 1
KDE_FILE = "kde.csv"


def _grid_axes(catalog: Catalog, size: int) -> tuple[np.ndarray, np.ndarray]:
    w = catalog.window
    if w.is_whole_plane:
        pad_x = 0.05 * max(np.ptp(catalog.x), 1e-6)
        pad_y = 0.05 * max(np.ptp(catalog.y), 1e-6)
        return (np.linspace(catalog.x.min() - pad_x, catalog.x.max() + pad_x, size),
                np.linspace(catalog.y.min() - pad_y, catalog.y.max() + pad_y, size))
    return np.linspace(w.x_min, w.x_max, size), np.linspace(w.y_min, w.y_max, size)


def write_fit(report: FitReport, catalog: Catalog, out_dir: str | Path,
              stem: str = "report", grid_size: int = 100) -> list[Path]:
    """Report JSON, per-event main-shock probabilities, the KDE and a ν̂ grid."""
    out_dir = Path(out_dir)
    data = report.to_dict()
    data.update({"schema": REPORT_SCHEMA, "version": __version__, "n": catalog.n,
                 "catalog": catalog.to_dict()})
    written = []
    nu = report.nu
    if isinstance(nu, KdeBackground):
        kde = nu.kde
        kde_path = out_dir / (KDE_FILE if stem == "report" else f"{stem}_{KDE_FILE}")
        written.append(utils.write_csv(
            pd.DataFrame({"x": kde.points[:, 0], "y": kde.points[:, 1], "weight": kde.weights}),
            kde_path,
        ))
        data["background"] = {"kind": "kde", "h": kde.h.to_dict(), "file": kde_path.name}
        xs, ys = _grid_axes(catalog, grid_size)
        gx, gy = np.meshgrid(xs, ys)
        written.append(utils.write_csv(
            pd.DataFrame({"x": gx.ravel(), "y": gy.ravel(), "nu": kde.grid(xs, ys).ravel()}),
            out_dir / f"{stem}_nu_grid.csv",
        ))
    elif nu is not None:
        data["background"] = nu.to_dict()

    if report.declustered is not None:
        written.append(utils.write_csv(
            pd.DataFrame({"index": np.arange(1, catalog.n + 1), "value": report.declustered.omega}),
            out_dir / f"{stem}_omega.csv",
        ))
    written.insert(0, utils.write_json(data, out_dir / f"{stem}.json"))
    return written


class LoadedFit(NamedTuple):
    params: RetasParams
    nu: BackgroundIntensity
    n: int
    data: dict


def load_fit(path: str | Path) -> LoadedFit:
    """Rebuild parameters and background from a report written by `write_fit`."""
    path = Path(path)
    try:
        data = utils.read_json(path)
    except (OSError, ValueError) as ex:
        raise DataError(f"Cannot read fit report {path}: {ex}") from ex
    if data.get("schema") != REPORT_SCHEMA:
        raise DataError(f"Unsupported fit report schema in {path}: {data.get('schema')!r}")
    params = RetasParams.from_dict(data["params"])
    bg = data.get("background") or {}
    kind = bg.get("kind")
    if kind == "kde":
        frame = pd.read_csv(path.parent / bg["file"])
        h = BandwidthMatrix(**bg["h"])
        nu = KdeBackground(WeightedKde(frame[["x", "y"]].to_numpy(), frame["weight"].to_numpy(), h))
    elif kind == "parametric":
        nu = ParametricBackground(*bg["means"], *bg["variances"],
                                  window=SpatialWindow.from_dict(bg.get("window")))
    elif kind == "constant":
        nu = ConstantBackground(bg["level"])
    else:
        raise DataError(f"Fit report {path} has no usable background description")
    return LoadedFit(params, nu, int(data["n"]), data)


def write_decluster(result: DeclusterResult, catalog: Catalog, out_dir: str | Path,
                    threshold: float = 0.5, bins: int = 20, mode: Optional[str] = None) -> list[Path]:
    out_dir = Path(out_dir)
    n = catalog.n
    index = np.arange(1, n + 1)
    rows, cols, probs = result.pi_entries()
    q_rows, q_cols = np.nonzero(result.q > 0)
    counts, edges = np.histogram(result.omega, bins=bins, range=(0.0, 1.0))
    labels = most_probable_labels(result)
    written = [
        utils.write_csv(pd.DataFrame({"index": index, "value": result.omega}), out_dir / "omega.csv"),
        utils.write_csv(pd.DataFrame({"i": rows + 1, "j": cols + 1, "value": probs}), out_dir / "pi.csv"),
        utils.write_csv(pd.DataFrame({"i": q_rows + 1, "j": q_cols + 1, "value": result.q[q_rows, q_cols]}),
                        out_dir / "q.csv"),
        utils.write_csv(pd.DataFrame({"index": index, "label": labels}), out_dir / "labels.csv"),
        utils.write_csv(cluster_report(result, catalog), out_dir / "clusters.csv"),
        utils.write_csv(pd.DataFrame({"lower": edges[:-1], "upper": edges[1:], "count": counts}),
                        out_dir / "omega_histogram.csv"),
        utils.write_json(
            {
                "mode": mode or result.mode.value,
                "n": n,
                "expected_mainshocks": result.expected_mainshocks(),
                "threshold": threshold,
                "mainshocks_above_threshold": result.mainshock_count(threshold),
                "map_mainshocks": int(np.sum(labels == 0)),
            },
            out_dir / "decluster.json",
        ),
    ]
    return written
