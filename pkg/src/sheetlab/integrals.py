"""Random-field integrals X_n(x) = int_D f(x,y) theta_n(y) dy and their Wiener limits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grid import GridField, GridSpec, as_point
from .kernels import DonskerField, PoissonField, ks_values_on_grid
from .quadrature import QuadSpec, tensor_points
from .sheet import SheetSample

__all__ = [
    "Integrand",
    "indicator_integrand",
    "restrict",
    "integrate_against_kernel",
    "integrate_restricted",
    "limit_field",
    "DonskerIntegrator",
    "KacStroockIntegrator",
    "SheetIntegrator",
]


@dataclass
class Integrand:
    """Deterministic integrand f(x, y).

    evaluator(x, Y) takes x of shape (d,) and Y of shape (m, d) and returns
    the m values f(x, y_j).  cell_integral, when supplied, takes (x, edges)
    with per-axis edge arrays and returns the tensor of exact integrals of
    f(x, .) over the tensor-product cells; the Donsker path then integrates
    exactly.  singular-diagonal integrands are finite for x != y and require
    a positive exclusion radius in quadrature.
    """

    evaluator: Callable
    smoothness: str = "smooth"
    cell_integral: Optional[Callable] = None
    # optional batched forms used to precompute weight matrices for many x at once
    pair_matrix: Optional[Callable] = None  # (xs (n,d), Y (m,d)) -> (n, m)
    pair_cell_integral: Optional[Callable] = None  # (xs (n,d), edges) -> (n, ncells)

    @property
    def singular(self) -> bool:
        return self.smoothness == "singular-diagonal"


def indicator_integrand() -> Integrand:
    """f(x, y) = I_{[0,x]}(y), for which X_n reduces to zeta_n."""

    def ev(x, Y):
        return np.all(Y <= np.asarray(x), axis=1).astype(float)

    def ci(x, edges):
        xs = np.asarray(x, dtype=float)
        lens = []
        for i, e in enumerate(edges):
            ec = np.clip(e, 0.0, xs[i])
            lens.append(np.diff(ec))
        out = lens[0]
        for v in lens[1:]:
            out = np.multiply.outer(out, v)
        return out

    return Integrand(evaluator=ev, cell_integral=ci)


def restrict(f: Integrand, x) -> Integrand:
    """Indicator-wrapped integrand I_{[0,x]}(y) f(., y)."""
    xr = as_point(x)

    def ev(xx, Y):
        inside = np.all(Y <= xr, axis=1)
        vals = np.zeros(Y.shape[0])
        if np.any(inside):
            vals[inside] = f.evaluator(xx, Y[inside])
        return vals

    ci = None
    if f.cell_integral is not None:

        def ci(xx, edges):
            clipped = [np.clip(e, 0.0, xr[i]) for i, e in enumerate(edges)]
            return f.cell_integral(xx, clipped)

    return Integrand(evaluator=ev, smoothness=f.smoothness, cell_integral=ci)


def _exclusion_mask(x, Y, rho: float) -> np.ndarray:
    return np.linalg.norm(Y - np.asarray(x), axis=1) > rho


def _eval_matrix(f: Integrand, xs: np.ndarray, Y: np.ndarray, rho: float) -> np.ndarray:
    """f(x_i, y_j) as an (npts, m) matrix, zeroed inside the exclusion ball."""
    if f.pair_matrix is not None:
        F = np.asarray(f.pair_matrix(xs, Y), dtype=float)
    else:
        F = np.empty((xs.shape[0], Y.shape[0]))
        for i, x in enumerate(xs):
            F[i] = f.evaluator(x, Y)
    if f.singular:
        d2 = np.zeros((xs.shape[0], Y.shape[0]))
        for i in range(xs.shape[1]):
            d2 += (xs[:, i : i + 1] - Y[None, :, i]) ** 2
        F = np.where(d2 > rho**2, F, 0.0)
    return F


def _refined_axes(edges, r: int):
    """Split each cell [e_j, e_{j+1}] into r equal sub-cells per axis.

    Returns (mids, widths) per axis; widths are arrays matching mids.
    """
    mids, widths = [], []
    for e in edges:
        lo = np.repeat(e[:-1], r)
        w = np.repeat(np.diff(e) / r, r)
        offs = np.tile(np.arange(r) + 0.5, len(e) - 1)
        mids.append(lo + offs * w)
        widths.append(w)
    return mids, widths


class DonskerIntegrator:
    """Precomputed quadrature weights for X_n(x) = n^{d/2} sum_k Z_k w_k(x).

    w_k(x) = int_{cell_k cap D} f(x, y) dy, evaluated once per x and reused
    across kernel realizations.
    """

    def __init__(self, f: Integrand, xs, n: int, T, quad: QuadSpec = QuadSpec()):
        self.n = int(n)
        self.T = tuple(T)
        self.d = len(self.T)
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        self.xs = xs
        shape = tuple(int(np.ceil(self.n * t)) for t in self.T)
        self.cell_shape = shape
        edges = [np.minimum(np.arange(k + 1) / self.n, t) for k, t in zip(shape, self.T)]
        ncells = int(np.prod(shape))
        W = np.empty((xs.shape[0], ncells))
        if f.pair_cell_integral is not None:
            W = np.asarray(f.pair_cell_integral(xs, edges)).reshape(xs.shape[0], ncells)
        elif f.cell_integral is not None:
            for i, x in enumerate(xs):
                W[i] = np.asarray(f.cell_integral(x, edges)).ravel()
        else:
            if f.singular and quad.rho <= 0:
                raise ValueError("singular integrand requires exclusion radius rho > 0")
            mids, widths = _refined_axes(edges, quad.r)
            pts = tensor_points(mids)
            wt = widths[0]
            for v in widths[1:]:
                wt = np.multiply.outer(wt, v)
            wt = wt.ravel()
            sub_shape = tuple(len(m) for m in mids)
            for i, x in enumerate(xs):
                vals = f.evaluator(x, pts)
                if f.singular:
                    vals = vals * _exclusion_mask(x, pts, quad.rho)
                contrib = (vals * wt).reshape(sub_shape)
                # aggregate r^d sub-cells back onto Donsker cells
                for axis in range(self.d):
                    new = list(contrib.shape)
                    new[axis : axis + 1] = [shape[axis], quad.r]
                    contrib = contrib.reshape(new).sum(axis=axis + 1)
                W[i] = contrib.ravel()
        self.weights = W

    def apply(self, field: DonskerField) -> np.ndarray:
        if field.n != self.n or field.Z.shape != self.cell_shape:
            raise ValueError("kernel field does not match precomputed weights")
        return self.n ** (self.d / 2.0) * (self.weights @ field.Z.ravel())

    def apply_innovations(self, Z: np.ndarray) -> np.ndarray:
        """Batch apply: Z of shape (M, ncells) -> values of shape (M, npts)."""
        return self.n ** (self.d / 2.0) * (Z @ self.weights.T)

    def second_moment(self) -> np.ndarray:
        """Exact E[X_n(x)^2] = n^d sum_k w_k(x)^2 (unit-variance innovations)."""
        return self.n ** self.d * np.sum(self.weights**2, axis=1)


class KacStroockIntegrator:
    """Precomputed midpoint rule for Kac-Stroock integrals.

    The integration grid is the field's grid refined r-fold per axis with a
    floor of ceil(n T_i) base cells, so the rule resolves the sign staircase
    at the noise scale.
    """

    def __init__(self, f: Integrand, xs, grid: GridSpec, n: float, quad: QuadSpec = QuadSpec()):
        if f.singular and quad.rho <= 0:
            raise ValueError("singular integrand requires exclusion radius rho > 0")
        self.grid = grid
        self.n = float(n)
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        self.xs = xs
        base = [max(nb, int(np.ceil(self.n * t))) for nb, t in zip(grid.N, grid.T)]
        self.mids = [
            (np.arange(quad.r * nb) + 0.5) * (t / (quad.r * nb))
            for nb, t in zip(base, grid.T)
        ]
        self.cell_vol = float(
            np.prod([t / (quad.r * nb) for nb, t in zip(base, grid.T)])
        )
        pts = tensor_points(self.mids)
        self.fmat = _eval_matrix(f, xs, pts, quad.rho)

    def apply(self, field: PoissonField) -> np.ndarray:
        theta = ks_values_on_grid(field, self.mids).ravel()
        return self.fmat @ theta * self.cell_vol


class SheetIntegrator:
    """Precomputed cell-center values for Wiener integrals int_D f(x,y) W(dy)."""

    def __init__(self, f: Integrand, xs, grid: GridSpec, quad: QuadSpec = QuadSpec()):
        self.grid = grid
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        self.xs = xs
        centers = grid.cell_centers()
        edges = [grid.axis_nodes(k) for k in range(grid.d)]
        if f.pair_cell_integral is not None:
            F = np.asarray(f.pair_cell_integral(xs, edges))
            F = F.reshape(xs.shape[0], centers.shape[0]) / grid.cell_volume
        elif f.cell_integral is not None:
            F = np.empty((xs.shape[0], centers.shape[0]))
            for i, x in enumerate(xs):
                F[i] = np.asarray(f.cell_integral(x, edges)).ravel() / grid.cell_volume
        else:
            if f.singular and quad.rho <= 0:
                raise ValueError("singular integrand requires exclusion radius rho > 0")
            F = _eval_matrix(f, xs, centers, quad.rho)
        self.fmat = F

    def apply(self, sheet: SheetSample) -> np.ndarray:
        if sheet.grid.cell_shape != self.grid.cell_shape:
            raise ValueError("sheet grid does not match precomputed integrand values")
        return self.fmat @ sheet.cell_increments.ravel()

    def apply_increments(self, incr: np.ndarray) -> np.ndarray:
        """Batch apply: incr of shape (M, ncells) -> values of shape (M, npts)."""
        return incr @ self.fmat.T

    def discrete_l2sq(self) -> np.ndarray:
        """Discrete ||f(x,.)||_2^2 = sum f^2 * cellvol, the limit variance."""
        return np.sum(self.fmat**2, axis=1) * self.grid.cell_volume


def integrate_against_kernel(f: Integrand, k, xs, quad: QuadSpec = QuadSpec()) -> np.ndarray:
    """X_n at the points xs for one kernel realization."""
    if isinstance(k, DonskerField):
        return DonskerIntegrator(f, xs, k.n, k.T, quad).apply(k)
    if isinstance(k, PoissonField):
        return KacStroockIntegrator(f, xs, k.grid, k.n, quad).apply(k)
    raise TypeError(f"unsupported kernel field type {type(k)!r}")


def integrate_restricted(f: Integrand, k, x, quad: QuadSpec = QuadSpec()) -> float:
    """int_{[0,x]} f(x,y) theta_n(y) dy via the indicator-wrapped integrand."""
    return float(integrate_against_kernel(restrict(f, x), k, [as_point(x)], quad)[0])


def limit_field(f: Integrand, sheet: SheetSample, xs, quad: QuadSpec = QuadSpec()) -> np.ndarray:
    """Wiener-integral field X(x) = int_D f(x,y) W(dy) at the points xs."""
    return SheetIntegrator(f, xs, sheet.grid, quad).apply(sheet)


def field_on_grid(values: np.ndarray, grid: GridSpec) -> GridField:
    """Package values computed at all grid nodes (C-order) as a GridField."""
    return GridField(grid, np.asarray(values, dtype=float).reshape(grid.node_shape))
