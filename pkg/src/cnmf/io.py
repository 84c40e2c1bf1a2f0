"""On-disk formats: CSV matrices, model directories, instance directories, reports.

Matrix CSV is plain comma-separated numeric rows with no header; a leading
``# rows=N cols=T`` comment line is tolerated and ignored (shape comes from
the data). Values are written with ``repr`` so files round-trip exactly and
re-running a command overwrites byte-identically.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .core import CnmfModel, as_matrix
from .report import FitReport
from .synth import GroundTruth, NoiseSpec

__all__ = [
    "read_matrix_csv",
    "write_matrix_csv",
    "write_model",
    "read_model",
    "write_ground_truth",
    "write_report",
]


def write_matrix_csv(path, m) -> None:
    m = as_matrix(m)
    lines = [",".join(repr(float(v)) for v in row) for row in m]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)


def write_model(directory, model: CnmfModel) -> None:
    """Write ``H.csv`` and ``W_1.csv`` .. ``W_L.csv`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(directory / "H.csv", model.h)
    for lag in range(model.n_lags):
        write_matrix_csv(directory / f"W_{lag + 1}.csv", model.w[lag])


def read_model(directory) -> CnmfModel:
    directory = Path(directory)
    h = read_matrix_csv(directory / "H.csv")
    paths = sorted(
        directory.glob("W_*.csv"), key=lambda p: int(p.stem.split("_")[1])
    )
    if not paths:
        raise FileNotFoundError(f"no W_*.csv files in {directory}")
    w = np.stack([read_matrix_csv(p) for p in paths])
    return CnmfModel(w, h)


def write_ground_truth(
    directory,
    gt: GroundTruth,
    noisy: np.ndarray | None = None,
    noise: NoiseSpec | None = None,
) -> None:
    """Serialize an instance: X.csv, H.csv, W_*.csv and meta.json.

    When a noisy observation is supplied it lands in ``X_noisy.csv`` next to
    the exact data, with the noise description recorded in the metadata.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(directory / "X.csv", gt.x)
    write_model(directory, gt.model)
    meta = {
        "config": asdict(gt.config),
        "seed": gt.config.seed,
        "anchors": {"t": list(gt.t_anchors), "s": list(gt.s_anchors)},
        "delta": gt.delta,
    }
    if noisy is not None:
        write_matrix_csv(directory / "X_noisy.csv", noisy)
        if noise is not None:
            meta["noise"] = asdict(noise)
    (directory / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n"
    )


def write_report(path, report: FitReport) -> None:
    Path(path).write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n"
    )
