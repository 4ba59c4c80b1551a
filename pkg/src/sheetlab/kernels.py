"""Donsker and Kac-Stroock kernel families and their primitive processes.

A Donsker kernel takes the value n^{d/2} Z_k on the cube {y : ny in [k-1, k)}
for i.i.d. standardized innovations Z_k; a Kac-Stroock kernel is
n^{d/2} (prod x_i)^{(d-1)/2} (-1)^{N(x)} for a Poisson point count N of
intensity n.  The primitive zeta_n(x) = int_{[0,x]} theta_n(y) dy of either
family approximates the Brownian sheet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, as_point
from .quadrature import QuadSpec, midpoint_axes
from .rng import RngStream

__all__ = [
    "DonskerField",
    "PoissonField",
    "INNOVATION_LAWS",
    "sample_donsker",
    "donsker_eval",
    "sample_kac_stroock",
    "kac_stroock_eval",
    "zeta",
]

INNOVATION_LAWS = ("standard-normal", "rademacher", "centered-uniform")

# refuse to materialize innovation arrays beyond this many entries by default
DEFAULT_MAX_CELLS = 50_000_000


class BudgetExceededError(RuntimeError):
    """Raised when a sampling request would exceed the memory budget."""


@dataclass
class DonskerField:
    """One realization of a Donsker kernel on D = [0, T]."""

    n: int
    T: tuple
    Z: np.ndarray
    law: str = "standard-normal"

    @property
    def d(self) -> int:
        return len(self.T)

    @property
    def cells_per_axis(self) -> tuple:
        return self.Z.shape

    def to_dict(self) -> dict:
        return {
            "family": "donsker",
            "n": self.n,
            "T": list(self.T),
            "law": self.law,
            "Z": self.Z.ravel().tolist(),
            "shape": list(self.Z.shape),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DonskerField":
        Z = np.array(data["Z"], dtype=float).reshape(data["shape"])
        return cls(n=int(data["n"]), T=tuple(data["T"]), Z=Z, law=data["law"])


@dataclass
class PoissonField:
    """One realization of a Kac-Stroock kernel: Poisson points of intensity n on D."""

    n: float
    grid: GridSpec
    points: np.ndarray  # shape (count, d)

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def T(self) -> tuple:
        return self.grid.T

    def to_dict(self) -> dict:
        return {
            "family": "kac-stroock",
            "n": self.n,
            "grid": self.grid.to_dict(),
            "points": self.points.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PoissonField":
        grid = GridSpec.from_dict(data["grid"])
        pts = np.array(data["points"], dtype=float).reshape(-1, grid.d)
        return cls(n=float(data["n"]), grid=grid, points=pts)


def _draw_innovations(rng: np.random.Generator, law: str, shape) -> np.ndarray:
    if law == "standard-normal":
        return rng.standard_normal(shape)
    if law == "rademacher":
        return rng.integers(0, 2, size=shape) * 2.0 - 1.0
    if law == "centered-uniform":
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=shape)
    raise ValueError(f"unsupported innovation law {law!r}; choose one of {INNOVATION_LAWS}")


def sample_donsker(
    grid: GridSpec,
    n: int,
    law: str = "standard-normal",
    rng: RngStream | None = None,
    max_cells: int = DEFAULT_MAX_CELLS,
) -> DonskerField:
    """Draw i.i.d. innovations for every multi-index covering D at scale 1/n."""
    if n < 1:
        raise ValueError("Donsker scale n must be >= 1")
    shape = tuple(int(np.ceil(n * t)) for t in grid.T)
    total = int(np.prod(shape))
    if total > max_cells:
        raise BudgetExceededError(
            f"Donsker field would need {total} innovations (> budget {max_cells})"
        )
    gen = rng.generator() if rng is not None else np.random.default_rng()
    Z = _draw_innovations(gen, law, shape)
    return DonskerField(n=int(n), T=grid.T, Z=Z, law=law)


def donsker_eval(f: DonskerField, x) -> float:
    """Kernel value n^{d/2} Z_k at the unique k with nx in [k-1, k)."""
    p = as_point(x)
    if p.size != f.d:
        raise ValueError("dimension mismatch")
    idx = []
    for i in range(f.d):
        if p[i] < 0 or p[i] > f.T[i]:
            raise ValueError(f"coordinate {p[i]} outside [0, {f.T[i]}]")
        # last cell closed at T_i (grid boundary convention)
        idx.append(min(int(np.floor(f.n * p[i])), f.Z.shape[i] - 1))
    return float(f.n ** (f.d / 2.0) * f.Z[tuple(idx)])


def sample_kac_stroock(grid: GridSpec, n: float, rng: RngStream | None = None) -> PoissonField:
    """Homogeneous Poisson point process of intensity n on D."""
    if n <= 0:
        raise ValueError("Kac-Stroock intensity n must be positive")
    gen = rng.generator() if rng is not None else np.random.default_rng()
    volume = float(np.prod(grid.T))
    count = int(gen.poisson(n * volume))
    pts = gen.uniform(0.0, 1.0, size=(count, grid.d)) * np.asarray(grid.T)
    return PoissonField(n=float(n), grid=grid, points=pts)


def _ks_prefactor_exponent(d: int) -> float:
    return (d - 1) / 2.0


def kac_stroock_eval(f: PoissonField, x) -> float:
    """Kernel value n^{d/2} (prod x_i)^{(d-1)/2} (-1)^{N(x)}."""
    p = as_point(x)
    if p.size != f.d:
        raise ValueError("dimension mismatch")
    for i in range(f.d):
        if p[i] < 0 or p[i] > f.T[i]:
            raise ValueError(f"coordinate {p[i]} outside [0, {f.T[i]}]")
    expo = _ks_prefactor_exponent(f.d)
    pref = 1.0 if expo == 0.0 else float(np.prod(p)) ** expo
    count = int(np.sum(np.all(f.points <= p, axis=1))) if f.points.size else 0
    return float(f.n ** (f.d / 2.0) * pref * (-1) ** count)


def ks_sign_grid(points: np.ndarray, mid_axes) -> np.ndarray:
    """(-1)^{N(y)} on the tensor grid of midpoints, via cumulative counting."""
    shape = tuple(len(m) for m in mid_axes)
    counts = np.zeros(shape, dtype=np.int64)
    if points.size:
        idx = []
        keep = np.ones(points.shape[0], dtype=bool)
        for i, mids in enumerate(mid_axes):
            j = np.searchsorted(mids, points[:, i], side="left")
            keep &= j < len(mids)
            idx.append(j)
        if np.any(keep):
            sel = tuple(j[keep] for j in idx)
            np.add.at(counts, sel, 1)
        for axis in range(len(mid_axes)):
            np.cumsum(counts, axis=axis, out=counts)
    return 1.0 - 2.0 * (counts & 1)


def ks_values_on_grid(f: PoissonField, mid_axes) -> np.ndarray:
    """Kernel values theta_n on the tensor grid of midpoints."""
    signs = ks_sign_grid(f.points, mid_axes)
    expo = _ks_prefactor_exponent(f.d)
    if expo == 0.0:
        pref = 1.0
    else:
        vecs = [np.power(m, expo) for m in mid_axes]
        pref = vecs[0]
        for v in vecs[1:]:
            pref = np.multiply.outer(pref, v)
    return f.n ** (f.d / 2.0) * pref * signs


def _donsker_overlaps(f: DonskerField, x: np.ndarray):
    """Per-axis lengths of cell_j intersected with [0, x_i]."""
    out = []
    for i in range(f.d):
        j = np.arange(f.Z.shape[i])
        lo = j / f.n
        hi = (j + 1) / f.n
        out.append(np.clip(np.minimum(x[i], hi) - lo, 0.0, None))
    return out


def zeta(f, x, quad: QuadSpec = QuadSpec()) -> float:
    """Primitive process zeta_n(x) = int_{[0,x]} theta_n(y) dy.

    Donsker fields integrate exactly (piecewise-constant kernel); Kac-Stroock
    fields use the composite midpoint rule on the field's grid refined r-fold
    per axis, restricted to [0, x].
    """
    p = as_point(x)
    if p.size != f.d:
        raise ValueError("dimension mismatch")
    if np.any(p < 0) or np.any(p > np.asarray(f.T)):
        raise ValueError("x outside D")
    if isinstance(f, DonskerField):
        v = f.Z
        for o in _donsker_overlaps(f, p):
            v = np.tensordot(v, o, axes=([0], [0]))
        return float(f.n ** (f.d / 2.0) * v)
    if isinstance(f, PoissonField):
        if quad.r < 1:
            raise ValueError("Kac-Stroock zeta needs quadrature resolution r >= 1")
        base = [nb * (p[i] / t if t > 0 else 0) for i, (nb, t) in enumerate(zip(f.grid.N, f.grid.T))]
        mids, widths = midpoint_axes(p, base, quad.r)
        if any(len(m) == 0 for m in mids):
            return 0.0
        vals = ks_values_on_grid(f, mids)
        return float(vals.sum() * np.prod(widths))
    raise TypeError(f"unsupported kernel field type {type(f)!r}")
