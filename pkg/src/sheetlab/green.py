"""Dirichlet Green function on the unit cube (0,1)^d, d in {2,3}.

Two independent evaluators: the sine eigenfunction series
K(x,y) = sum_k e_k(x) e_k(y) / lambda_k with lambda_k = pi^2 |k|^2 and
e_k(x) = prod sqrt(2) sin(k_i pi x_i), and a walk-on-spheres Monte Carlo
estimator based on K(x,y) = G(x,y) - E^x[G(B_tau, y)] with the free-space
kernel G.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from .grid import GridField, GridSpec, as_point
from .integrals import Integrand
from .quadrature import QuadSpec, tensor_points
from .rng import RngStream

__all__ = [
    "GreenSeries",
    "WosConfig",
    "HolderEstimate",
    "green_eval",
    "green_mc_estimate",
    "green_tail_estimate",
    "green_l2_norm",
    "lambda_sup",
    "poincare_constant",
    "k_apply",
    "holder_probe",
    "green_integrand",
    "free_space_green",
]


@dataclass(frozen=True)
class GreenSeries:
    """Truncated eigenfunction expansion: modes k in {1..kmax}^d."""

    d: int
    kmax: int = 0

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError("Green function supported for d in {2, 3}")
        if self.kmax == 0:
            object.__setattr__(self, "kmax", 64 if self.d == 2 else 32)
        if self.kmax < 1:
            raise ValueError("kmax must be >= 1")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.kmax + 1)


@dataclass(frozen=True)
class WosConfig:
    """Walk-on-spheres controls: walk count, capture tolerance, step cap."""

    walks: int = 100_000
    delta: float = 1e-4
    max_steps: int = 10_000

    def __post_init__(self):
        if self.delta <= 0 or self.delta >= 0.5:
            raise ValueError("capture tolerance delta must lie in (0, 0.5)")
        if self.walks < 1 or self.max_steps < 1:
            raise ValueError("walks and max_steps must be positive")


@dataclass
class HolderEstimate:
    """Log-log regression of ||K(x,.) - K(z,.)||_alpha against |x - z|."""

    alpha: float
    distances: np.ndarray
    norms: np.ndarray
    beta: float
    r_squared: float


@lru_cache(maxsize=16)
def _lam_tensor(d: int, kmax: int) -> np.ndarray:
    k = np.arange(1, kmax + 1, dtype=float)
    grids = np.meshgrid(*([k] * d), indexing="ij")
    return np.pi**2 * sum(g**2 for g in grids)


def _sine_matrix(pts: np.ndarray, kmax: int) -> np.ndarray:
    """V[j, k] = sqrt(2) sin((k+1) pi x_j) for arbitrary coordinates."""
    k = np.arange(1, kmax + 1)
    return np.sqrt(2.0) * np.sin(np.outer(pts, k) * np.pi)


def _coef_tensor(gs: GreenSeries, x: np.ndarray, power: int = 1) -> np.ndarray:
    """e_k(x) / lambda_k^power as a mode tensor."""
    vecs = [_sine_matrix(np.array([x[i]]), gs.kmax)[0] for i in range(gs.d)]
    out = vecs[0]
    for v in vecs[1:]:
        out = np.multiply.outer(out, v)
    return out / _lam_tensor(gs.d, gs.kmax) ** power


def _contract(coef: np.ndarray, mats) -> np.ndarray:
    """Contract a mode tensor with one matrix (pts_i, kmax) per axis."""
    out = coef
    for V in mats:
        out = np.tensordot(out, V, axes=([0], [1]))
    return out


def green_eval(gs: GreenSeries, x, y) -> float:
    """Series value sum_{k <= kmax} lambda_k^{-1} e_k(x) e_k(y)."""
    xp, yp = as_point(x), as_point(y)
    # symmetric per-axis products keep green_eval(x, y) == green_eval(y, x) exactly
    out = 1.0 / _lam_tensor(gs.d, gs.kmax)
    for i in range(gs.d):
        axis = _sine_matrix(np.array([xp[i]]), gs.kmax)[0] * _sine_matrix(
            np.array([yp[i]]), gs.kmax
        )[0]
        out = np.tensordot(out, axis, axes=([0], [0]))
    return float(out)


def green_values(gs: GreenSeries, x, Y: np.ndarray) -> np.ndarray:
    """K(x, y_j) for arbitrary points Y of shape (m, d)."""
    xp = as_point(x)
    coef = _coef_tensor(gs, xp)
    mats = [_sine_matrix(Y[:, i], gs.kmax) for i in range(gs.d)]
    if gs.d == 2:
        return np.einsum("ja,ab,jb->j", mats[0], coef, mats[1])
    return np.einsum("ja,jb,jc,abc->j", mats[0], mats[1], mats[2], coef)


def green_on_axes(gs: GreenSeries, x, axes) -> np.ndarray:
    """K(x, .) on a tensor grid given by per-axis coordinate arrays."""
    coef = _coef_tensor(gs, as_point(x))
    return _contract(coef, [_sine_matrix(np.asarray(a), gs.kmax) for a in axes])


def free_space_green(d: int, r) -> np.ndarray:
    """Free-space kernel of -Laplace: -(2 pi)^{-1} log r in 2-d, (4 pi r)^{-1} in 3-d."""
    r = np.asarray(r, dtype=float)
    if d == 2:
        return -np.log(r) / (2.0 * np.pi)
    if d == 3:
        return 1.0 / (4.0 * np.pi * r)
    raise ValueError("free-space kernel supported for d in {2, 3}")


def _distance_to_boundary(pos: np.ndarray) -> np.ndarray:
    return np.minimum(pos.min(axis=1), (1.0 - pos).min(axis=1))


def _project_to_face(pos: np.ndarray) -> np.ndarray:
    """Snap each point to the nearest face of the unit cube."""
    out = pos.copy()
    d = pos.shape[1]
    dist = np.concatenate([pos, 1.0 - pos], axis=1)  # (walks, 2d)
    face = np.argmin(dist, axis=1)
    for i in range(d):
        out[face == i, i] = 0.0
        out[face == d + i, i] = 1.0
    return out


def walk_on_spheres_exit(x, cfg: WosConfig, rng: RngStream) -> np.ndarray:
    """Brownian exit points from (0,1)^d via walk-on-spheres, shape (walks, d)."""
    xp = as_point(x)
    d = xp.size
    gen = rng.generator()
    pos = np.tile(xp, (cfg.walks, 1))
    for _ in range(cfg.max_steps):
        r = _distance_to_boundary(pos)
        active = r >= cfg.delta
        if not np.any(active):
            break
        dirs = gen.standard_normal((int(active.sum()), d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pos[active] += r[active, None] * dirs
    return _project_to_face(pos)


def green_mc_estimate(x, y, cfg: WosConfig = WosConfig(), rng: RngStream | None = None):
    """Monte Carlo estimate of K(x,y) = G(x,y) - E^x[G(B_tau, y)].

    Returns (estimate, standard_error).
    """
    xp, yp = as_point(x), as_point(y)
    d = xp.size
    if np.allclose(xp, yp):
        raise ValueError("free-space kernel is singular at x = y")
    if np.any(xp <= 0) or np.any(xp >= 1):
        raise ValueError("walk-on-spheres start point must be interior")
    if rng is None:
        rng = RngStream(0)
    exits = walk_on_spheres_exit(xp, cfg, rng)
    g_exit = free_space_green(d, np.linalg.norm(exits - yp, axis=1))
    est = float(free_space_green(d, float(np.linalg.norm(xp - yp))) - g_exit.mean())
    se = float(g_exit.std(ddof=1) / np.sqrt(cfg.walks))
    return est, se


def green_tail_estimate(gs: GreenSeries, x, y, factor: int = 4) -> float:
    """Empirical series-tail bound: twice the kmax-to-(factor*kmax) delta."""
    fine = GreenSeries(gs.d, factor * gs.kmax)
    return 2.0 * abs(green_eval(fine, x, y) - green_eval(gs, x, y))


def green_l2_norm(gs: GreenSeries, x) -> float:
    """||K(x,.)||_2 via Parseval: sqrt(sum lambda_k^{-2} e_k(x)^2)."""
    xp = as_point(x)
    vecs = [_sine_matrix(np.array([xp[i]]), gs.kmax)[0] ** 2 for i in range(gs.d)]
    out = vecs[0]
    for v in vecs[1:]:
        out = np.multiply.outer(out, v)
    return float(np.sqrt(np.sum(out / _lam_tensor(gs.d, gs.kmax) ** 2)))


def green_l2_norm_on_axes(gs: GreenSeries, axes) -> np.ndarray:
    """||K(x,.)||_2 on a tensor grid of x points, one axis array per dimension."""
    lam2 = _lam_tensor(gs.d, gs.kmax) ** 2
    mats = [_sine_matrix(np.asarray(a), gs.kmax) ** 2 for a in axes]
    return np.sqrt(_contract(1.0 / lam2, mats))


def lambda_sup(gs: GreenSeries, grid: GridSpec) -> float:
    """Grid maximum of ||K(x,.)||_2 (a lower bound of the true supremum)."""
    if grid.d != gs.d:
        raise ValueError("grid dimension must match the series dimension")
    axes = [grid.axis_nodes(i) for i in range(grid.d)]
    return float(np.max(green_l2_norm_on_axes(gs, axes)))


def poincare_constant(gs: GreenSeries) -> float:
    """Largest a with <int K phi, phi> >= a ||int K phi||_2^2: the minimal eigenvalue d pi^2."""
    return gs.d * np.pi**2


def _interior_sine_basis(N: int, kmax: int) -> np.ndarray:
    """V[j, k] = sqrt(2) sin((k+1) pi j / N) on interior nodes j = 1..N-1."""
    j = np.arange(1, N) / N
    return _sine_matrix(j, kmax)


def grid_sine_coefficients(gs: GreenSeries, phi: GridField) -> np.ndarray:
    """Discrete sine coefficients of a boundary-vanishing grid field."""
    grid = phi.grid
    if grid.d != gs.d:
        raise ValueError("grid dimension must match the series dimension")
    if any(abs(t - 1.0) > 1e-12 for t in grid.T):
        raise ValueError("sine expansion requires the unit cube T = (1,...,1)")
    kuse = min(gs.kmax, min(grid.N) - 1)
    if kuse < 1:
        raise ValueError("grid too coarse for any sine mode")
    inner = phi.values[tuple(slice(1, -1) for _ in range(grid.d))]
    coef = inner
    for i in range(grid.d):
        V = _interior_sine_basis(grid.N[i], kuse)
        coef = np.tensordot(coef, V / grid.N[i], axes=([0], [0]))
    return coef


def sine_synthesis(coef: np.ndarray, grid: GridSpec) -> GridField:
    """Evaluate a sine-coefficient tensor at the grid nodes (zero boundary)."""
    kuse = coef.shape[0]
    out = coef
    for i in range(grid.d):
        V = _interior_sine_basis(grid.N[i], kuse)
        out = np.tensordot(out, V, axes=([0], [1]))
    vals = np.zeros(grid.node_shape)
    vals[tuple(slice(1, -1) for _ in range(grid.d))] = out
    return GridField(grid, vals)


def k_apply(gs: GreenSeries, phi: GridField) -> GridField:
    """Spectral solve u = int_D K(.,y) phi(y) dy: divide sine coefficients by lambda_k."""
    coef = grid_sine_coefficients(gs, phi)
    kuse = coef.shape[0]
    lam = _lam_tensor(gs.d, kuse)
    return sine_synthesis(coef / lam, phi.grid)


def green_integrand(gs: GreenSeries, rho: float = 1e-3) -> Integrand:
    """The Green kernel K(x, .) as a singular-diagonal integrand.

    Carries an exact cell-integral oracle built from the sine antiderivatives,
    so Donsker integration against it is exact for the truncated series.
    """

    def ev(x, Y):
        return green_values(gs, x, Y)

    def sine_cell_integrals(edges):
        k = np.arange(1, gs.kmax + 1)
        mats = []
        for e in edges:
            e = np.asarray(e, dtype=float)
            # int_a^b sqrt(2) sin(k pi y) dy = sqrt(2) (cos(k pi a) - cos(k pi b)) / (k pi)
            C = np.sqrt(2.0) * np.cos(np.outer(e, k) * np.pi) / (k * np.pi)
            mats.append(C[:-1] - C[1:])  # (ncells, kmax)
        return mats

    def ci(x, edges):
        return _contract(_coef_tensor(gs, as_point(x)), sine_cell_integrals(edges))

    def _flat_modes(mats) -> np.ndarray:
        """Row-wise tensor product of per-axis (m, kmax) matrices -> (m, kmax^d)."""
        out = mats[0]
        for M in mats[1:]:
            out = (out[:, :, None] * M[:, None, :]).reshape(out.shape[0], -1)
        return out

    def x_mode_matrix(xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        A = _flat_modes([_sine_matrix(xs[:, i], gs.kmax) for i in range(gs.d)])
        return A / _lam_tensor(gs.d, gs.kmax).ravel()

    def pm(xs, Y, chunk: int = 8192):
        A = x_mode_matrix(xs)
        Y = np.asarray(Y, dtype=float)
        out = np.empty((A.shape[0], Y.shape[0]))
        for lo in range(0, Y.shape[0], chunk):
            block = Y[lo : lo + chunk]
            B = _flat_modes([_sine_matrix(block[:, i], gs.kmax) for i in range(gs.d)])
            out[:, lo : lo + chunk] = A @ B.T
        return out

    def pci(xs, edges):
        A = x_mode_matrix(xs)
        mats = sine_cell_integrals(edges)
        out = A.reshape(A.shape[0], *([gs.kmax] * gs.d))
        for S in mats:
            out = np.tensordot(out, S, axes=([1], [1]))
        return out.reshape(A.shape[0], -1)

    return Integrand(
        evaluator=ev,
        smoothness="singular-diagonal",
        cell_integral=ci,
        pair_matrix=pm,
        pair_cell_integral=pci,
    )


def _alpha_window_check(d: int, alpha: float) -> None:
    if d == 2 and alpha <= 2:
        warnings.warn(f"alpha={alpha} outside the proven window alpha > 2 for d=2")
    if d == 3 and not (2 < alpha < 2.25):
        warnings.warn(f"alpha={alpha} outside the proven window 2 < alpha < 9/4 for d=3")


def holder_probe(
    gs: GreenSeries, alpha: float, pairs, quad: QuadSpec = QuadSpec(r=256, rho=1e-3)
) -> HolderEstimate:
    """Estimate beta in ||K(x,.) - K(z,.)||_alpha <= C |x-z|^beta by log-log regression."""
    _alpha_window_check(gs.d, alpha)
    if quad.rho <= 0:
        raise ValueError("holder_probe requires a positive exclusion radius")
    mids = [(np.arange(quad.r) + 0.5) / quad.r] * gs.d
    vol = (1.0 / quad.r) ** gs.d
    pts = tensor_points(mids)
    dists, norms = [], []
    for x, z in pairs:
        xp, zp = as_point(x), as_point(z)
        dist = float(np.linalg.norm(xp - zp))
        if dist == 0.0:
            continue
        kx = green_on_axes(gs, xp, mids).ravel()
        kz = green_on_axes(gs, zp, mids).ravel()
        mask = (np.linalg.norm(pts - xp, axis=1) > quad.rho) & (
            np.linalg.norm(pts - zp, axis=1) > quad.rho
        )
        norm = float(np.sum(np.abs(kx - kz)[mask] ** alpha * vol) ** (1.0 / alpha))
        dists.append(dist)
        norms.append(norm)
    if len(set(np.round(np.log(dists), 12))) < 3:
        raise ValueError("holder_probe needs pairs at >= 3 distinct distances")
    res = stats.linregress(np.log(dists), np.log(norms))
    return HolderEstimate(
        alpha=alpha,
        distances=np.array(dists),
        norms=np.array(norms),
        beta=float(res.slope),
        r_squared=float(res.rvalue**2),
    )
