"""Composite midpoint quadrature on refined tensor grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QuadSpec", "midpoint_axes", "tensor_points"]


@dataclass(frozen=True)
class QuadSpec:
    """Quadrature control: r sub-cells per axis per grid cell, optional
    diagonal-exclusion radius rho for singular integrands."""

    r: int = 1
    rho: float = 0.0

    def __post_init__(self):
        if int(self.r) < 1:
            raise ValueError("refinement factor r must be an integer >= 1")
        if self.rho < 0:
            raise ValueError("exclusion radius rho must be >= 0")
        object.__setattr__(self, "r", int(self.r))


def midpoint_axes(upper, base_cells, r: int):
    """Per-axis midpoints and widths for a midpoint rule on [0, upper].

    Axis i is split into ceil(r * base_cells_i * upper_i_fraction) equal
    sub-intervals, where the caller supplies base_cells for the full axis.
    Returns (mids, widths): lists of 1-d arrays.
    """
    mids, widths = [], []
    for up, nb in zip(upper, base_cells):
        m = max(1, int(np.ceil(r * nb)))
        if up <= 0:
            mids.append(np.zeros(0))
            widths.append(0.0)
            continue
        h = up / m
        mids.append((np.arange(m) + 0.5) * h)
        widths.append(h)
    return mids, widths


def tensor_points(axes) -> np.ndarray:
    """Flattened tensor-product points, shape (prod m_i, d), C-order."""
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)
