"""Statistics of moment fields, relative error norms, and CSV output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fv import MomentField, StructuredGrid

__all__ = [
    "FieldStatistics",
    "expectation",
    "variance",
    "field_statistics",
    "relative_errors",
    "write_csv",
]

_COMPONENTS_1D = ("rho", "mx", "E")
_COMPONENTS_2D = ("rho", "mx", "my", "E")


@dataclass
class FieldStatistics:
    """Per-cell expected value and variance of every conserved component."""

    grid: StructuredGrid
    mean: np.ndarray
    variance: np.ndarray
    clamped: int = 0

    @property
    def n_components(self) -> int:
        return self.mean.shape[-1]


def expectation(field: MomentField) -> np.ndarray:
    """Element-weighted sum of the zeroth coefficients, shape (cells..., d)."""
    weights = field.basis.element_weights
    return np.einsum("...ld,l->...d", field.coeffs[..., 0, :], weights)


def variance(field: MomentField) -> np.ndarray:
    """Total variance over the random variable, shape (cells..., d).

    Per element the local variance is the sum of squared higher coefficients;
    the element means contribute their spread around the global mean.
    """
    weights = field.basis.element_weights
    mean = expectation(field)
    local = np.sum(field.coeffs[..., 1:, :] ** 2, axis=-2)
    spread = (field.coeffs[..., 0, :] - mean[..., None, :]) ** 2
    return np.einsum("...ld,l->...d", local + spread, weights)


def field_statistics(field: MomentField) -> FieldStatistics:
    mean = expectation(field)
    var = variance(field)
    negative = int(np.count_nonzero(var < 0.0))
    if negative:
        var = np.maximum(var, 0.0)
    return FieldStatistics(grid=field.grid, mean=mean, variance=var, clamped=negative)


def _window_mask(grid: StructuredGrid, window) -> np.ndarray:
    if window is None:
        return np.ones(grid.shape, dtype=bool)
    mask = np.ones(grid.shape, dtype=bool)
    for axis, bounds in enumerate(window):
        if bounds is None:
            continue
        lo, hi = bounds
        centers = grid.cell_centers(axis)
        axis_mask = (centers >= lo) & (centers <= hi)
        shape = [1] * grid.ndim
        shape[axis] = -1
        mask &= axis_mask.reshape(shape)
    return mask


def _weighted_l2(values: np.ndarray, grid: StructuredGrid, mask: np.ndarray) -> np.ndarray:
    sq = values**2 * mask[..., None]
    return np.sqrt(grid.cell_volume * np.sum(sq, axis=tuple(range(grid.ndim))))


def relative_errors(
    computed: FieldStatistics,
    reference: FieldStatistics,
    window=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Cell-volume-weighted relative L2 errors of mean and variance.

    Returns one value per conserved component; ``window`` restricts the norm
    to cells whose centers lie in the given per-axis (lo, hi) boxes.
    """
    if computed.grid.shape != reference.grid.shape:
        raise ValueError("statistics live on different grids")
    grid = computed.grid
    mask = _window_mask(grid, window)
    err_e = _weighted_l2(computed.mean - reference.mean, grid, mask)
    norm_e = _weighted_l2(reference.mean, grid, mask)
    err_v = _weighted_l2(computed.variance - reference.variance, grid, mask)
    norm_v = _weighted_l2(reference.variance, grid, mask)
    if np.any(norm_e == 0.0) or np.any(norm_v == 0.0):
        raise ValueError("reference norm vanishes; relative error undefined")
    return err_e / norm_e, err_v / norm_v


def _column_names(ndim: int, n_components: int) -> list:
    coords = ["x", "y"][:ndim]
    labels = _COMPONENTS_1D if n_components == 3 else _COMPONENTS_2D
    cols = list(coords)
    for name in labels:
        cols += [f"E_{name}", f"Var_{name}"]
    return cols


def write_csv(stats: FieldStatistics, path) -> None:
    """One row per cell (row-major cell order), 17 significant digits."""
    grid = stats.grid
    cols = _column_names(grid.ndim, stats.n_components)
    centers = [grid.cell_centers(axis) for axis in range(grid.ndim)]
    try:
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for idx in np.ndindex(grid.shape):
                row = [centers[axis][idx[axis]] for axis in range(grid.ndim)]
                for comp in range(stats.n_components):
                    row.append(stats.mean[idx + (comp,)])
                    row.append(stats.variance[idx + (comp,)])
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing statistics to {path}: {exc}") from exc
