"""Rectangular parameter domain D = [0, T] in R^d: grids, partial order, box increments."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridSpec",
    "GridField",
    "leq",
    "rectangle_increment",
    "as_point",
]

_NODE_TOL = 1e-9


def as_point(x) -> np.ndarray:
    """Coerce a lattice point to a float array of shape (d,)."""
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1:
        raise ValueError(f"lattice point must be one-dimensional, got shape {p.shape}")
    return p


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on D = [0, T_1] x ... x [0, T_d].

    Nodes along axis i sit at j * T_i / N_i, j = 0..N_i; cells are half-open
    [node, next) except the last cell of each axis, which is closed at T_i,
    so every point of D lies in exactly one cell.
    """

    d: int
    T: tuple = (1.0,)
    N: tuple = (1,)

    def __post_init__(self):
        T = tuple(float(t) for t in np.atleast_1d(self.T))
        N = tuple(int(n) for n in np.atleast_1d(self.N))
        if len(T) == 1 and self.d > 1:
            T = T * self.d
        if len(N) == 1 and self.d > 1:
            N = N * self.d
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "N", N)
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if len(self.T) != self.d or len(self.N) != self.d:
            raise ValueError("T and N must have length d")
        if any(t <= 0 for t in self.T):
            raise ValueError("all axis lengths T_i must be positive")
        if any(n < 1 for n in self.N):
            raise ValueError("all cell counts N_i must be >= 1")

    @property
    def cell_volume(self) -> float:
        return float(np.prod([t / n for t, n in zip(self.T, self.N)]))

    @property
    def node_shape(self) -> tuple:
        return tuple(n + 1 for n in self.N)

    @property
    def cell_shape(self) -> tuple:
        return tuple(self.N)

    def axis_nodes(self, i: int) -> np.ndarray:
        # derive coordinates from integer indices, never by accumulation
        return np.arange(self.N[i] + 1) * (self.T[i] / self.N[i])

    def axis_cell_centers(self, i: int) -> np.ndarray:
        return (np.arange(self.N[i]) + 0.5) * (self.T[i] / self.N[i])

    def node_coords(self, index) -> np.ndarray:
        idx = tuple(int(j) for j in index)
        return np.array([j * t / n for j, t, n in zip(idx, self.T, self.N)])

    def node_index(self, x) -> tuple:
        """Map a grid-aligned point to its node multi-index; raise if off-grid."""
        p = self.point_in_domain(x)
        idx = []
        for i in range(self.d):
            h = self.T[i] / self.N[i]
            j = int(round(p[i] / h))
            if abs(p[i] - j * h) > _NODE_TOL * max(1.0, self.T[i]):
                raise ValueError(f"coordinate {p[i]} is not a grid node on axis {i}")
            idx.append(j)
        return tuple(idx)

    def cell_index(self, x) -> tuple:
        """Cell containing x: half-open cells, last cell closed at T_i."""
        p = self.point_in_domain(x)
        idx = []
        for i in range(self.d):
            h = self.T[i] / self.N[i]
            idx.append(min(int(p[i] / h), self.N[i] - 1))
        return tuple(idx)

    def point_in_domain(self, x) -> np.ndarray:
        p = as_point(x)
        if p.size != self.d:
            raise ValueError(f"expected {self.d} coordinates, got {p.size}")
        for i in range(self.d):
            if p[i] < -_NODE_TOL or p[i] > self.T[i] + _NODE_TOL:
                raise ValueError(f"coordinate {p[i]} outside [0, {self.T[i]}] on axis {i}")
        return np.clip(p, 0.0, self.T)

    def cell_centers(self) -> np.ndarray:
        """All cell centers, shape (prod N, d), in C-order of the cell lattice."""
        axes = [self.axis_cell_centers(i) for i in range(self.d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def node_points(self) -> np.ndarray:
        """All grid nodes, shape (prod (N+1), d), in C-order of the node lattice."""
        axes = [self.axis_nodes(i) for i in range(self.d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def to_dict(self) -> dict:
        return {"d": self.d, "T": list(self.T), "N": list(self.N)}

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        return cls(d=int(data["d"]), T=tuple(data["T"]), N=tuple(data["N"]))


@dataclass
class GridField:
    """Real values attached to the nodes of a grid."""

    grid: GridSpec
    values: np.ndarray = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.node_shape:
            if v.size == int(np.prod(self.grid.node_shape)):
                v = v.reshape(self.grid.node_shape)
            else:
                raise ValueError(
                    f"values shape {v.shape} incompatible with node shape {self.grid.node_shape}"
                )
        self.values = v

    @classmethod
    def zeros(cls, grid: GridSpec) -> "GridField":
        return cls(grid, np.zeros(grid.node_shape))

    def at(self, x) -> float:
        return float(self.values[self.grid.node_index(x)])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def leq(x, z) -> bool:
    """Componentwise partial order x <= z on D."""
    a, b = as_point(x), as_point(z)
    if a.size != b.size:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")
    return bool(np.all(a <= b))


def rectangle_increment(F: GridField, x, z) -> float:
    """Alternating-sign increment of F over the box [x, z].

    Sum over corners eps in {0,1}^d of (-1)^(d - sum eps) * F(x + eps*(z - x)).
    Both x and z must be grid nodes with x <= z.
    """
    grid = F.grid
    ix = np.array(grid.node_index(x))
    iz = np.array(grid.node_index(z))
    if np.any(ix > iz):
        raise ValueError("rectangle_increment requires x <= z componentwise")
    total = 0.0
    for eps in itertools.product((0, 1), repeat=grid.d):
        corner = tuple(np.where(np.array(eps) == 1, iz, ix))
        sign = (-1) ** (grid.d - sum(eps))
        total += sign * F.values[corner]
    return float(total)
