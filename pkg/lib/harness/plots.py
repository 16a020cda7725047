from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

# fixed ids and no timestamp so the same data gives the same file
plt.rcParams["svg.hashsalt"] = "sigma-family"
SVG_METADATA = {"Date": None}


def _save(fig, path: Path) -> Optional[Path]:
    try:
        fig.savefig(path, format="svg", metadata=SVG_METADATA)
    except (OSError, ValueError) as e:
        logger.warning("could not write plot %s: %s", path, e)
        return None
    finally:
        plt.close(fig)
    logger.info("wrote plot %s", path)
    return path


def scatter_plot(path: Path, samples: np.ndarray, reference: Optional[np.ndarray] = None, title: str = "") -> Optional[Path]:
    """2D scatter of generated samples, optionally over reference data."""
    if samples.shape[1] != 2:
        logger.debug("skipping scatter plot for d=%d", samples.shape[1])
        return None

    fig, ax = plt.subplots(figsize=(6, 6))
    if reference is not None:
        ax.scatter(reference[:, 0], reference[:, 1], s=2, c="lightgray", label="data")
    ax.scatter(samples[:, 0], samples[:, 1], s=2, c="tab:blue", label="samples")
    ax.set_title(title)
    ax.set_aspect("equal")
    ax.legend(loc="upper right")
    return _save(fig, path)


def grid_plot(path: Path, grid: np.ndarray, title: str = "") -> Optional[Path]:
    """Decoded interpolation grid of shape (n, n, 2), one polyline per row."""
    if grid.shape[-1] != 2:
        return None

    fig, ax = plt.subplots(figsize=(6, 6))
    for i, row in enumerate(grid):
        ax.plot(row[:, 0], row[:, 1], marker="o", markersize=2, linewidth=0.8, color=plt.cm.viridis(i / max(len(grid) - 1, 1)))
    ax.set_title(title)
    ax.set_aspect("equal")
    return _save(fig, path)


def line_plot(path: Path, x: np.ndarray, y: np.ndarray, xlabel: str, ylabel: str, title: str = "", log_y: bool = False) -> Optional[Path]:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, y, marker="o")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if log_y:
        ax.set_yscale("log")
    ax.set_title(title)
    return _save(fig, path)
