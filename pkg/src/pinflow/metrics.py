"""Comparison metrics between particle ensembles and density fields: kernel
deposits of empirical measures, a spectral negative-Sobolev distance for weak
convergence, and a slow exact 1-Wasserstein oracle for tiny grids."""

from __future__ import annotations

import numpy as np

from .fields import Grid2D, ScalarField
from .spectral import grad, poisson_solve


def deposit_empirical(positions, grid: Grid2D, bandwidth: float) -> ScalarField:
    """Kernel deposit of the empirical measure (1/N) sum_i delta_{x_i}:
    a periodic (minimal-image) Gaussian of the given bandwidth per particle,
    each normalized to unit discrete mass, averaged over particles.

    Accepts an (N, 2) array or any object with a `positions` attribute."""
    pos = np.asarray(getattr(positions, "positions", positions), dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise ValueError("positions must have shape (N, 2)")
    if bandwidth < 2.0 * max(grid.hx, grid.hy):
        raise ValueError(f"bandwidth {bandwidth:g} under-resolves the grid "
                         f"(needs >= {2.0 * max(grid.hx, grid.hy):g})")
    ax, ay = grid.axes()
    # minimal-image separations, (N, nx) and (N, ny)
    dx = ax[None, :] - pos[:, 0:1]
    dx -= grid.Lx * np.round(dx / grid.Lx)
    dy = ay[None, :] - pos[:, 1:2]
    dy -= grid.Ly * np.round(dy / grid.Ly)
    gx = np.exp(-0.5 * (dx / bandwidth)**2)
    gy = np.exp(-0.5 * (dy / bandwidth)**2)
    # per-particle normalization to exact unit mass on the grid
    norm = (gx.sum(axis=1) * gy.sum(axis=1)) * grid.cell_area
    gx = gx / norm[:, None]
    dep = np.einsum("ki,kj->ij", gx, gy) / len(pos)
    return ScalarField(grid, dep)


def hminus1_distance(m1: ScalarField, m2: ScalarField) -> float:
    """Spectral negative-Sobolev distance || grad Lap^{-1} (m1 - m2) ||_2
    on the periodic box, after mean subtraction."""
    if m1.grid != m2.grid:
        raise ValueError("fields must share a grid")
    diff = m1.data - m2.data
    psi = poisson_solve(ScalarField(m1.grid, diff - diff.mean()))
    return grad(psi).l2()


def wasserstein1_exact(m1: ScalarField, m2: ScalarField,
                       max_cells: int = 256) -> float:
    """Exact 1-Wasserstein distance between two probability densities on a
    tiny periodic grid, by linear programming over the full transport plan.
    Validation oracle only: cost grows with the fourth power of the cell
    count."""
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    if m1.grid != m2.grid:
        raise ValueError("fields must share a grid")
    g = m1.grid
    n = g.nx * g.ny
    if n > max_cells:
        raise ValueError(f"{n} cells exceeds the oracle limit {max_cells}")
    a = (m1.data / m1.data.sum()).ravel()
    b = (m2.data / m2.data.sum()).ravel()
    pts = g.points().reshape(n, 2)
    d = pts[:, None, :] - pts[None, :, :]
    d[..., 0] -= g.Lx * np.round(d[..., 0] / g.Lx)
    d[..., 1] -= g.Ly * np.round(d[..., 1] / g.Ly)
    cost = np.hypot(d[..., 0], d[..., 1]).ravel()

    rows, cols, vals = [], [], []
    for i in range(n):               # row marginals: sum_j f[i, j] = a_i
        rows.extend([i] * n)
        cols.extend(range(i * n, (i + 1) * n))
        vals.extend([1.0] * n)
    # column marginals: sum_i f[i, j] = b_j.  The last one is implied by the
    # others (both marginal sets sum to 1) and keeping it makes the system
    # rank-deficient, which trips the solver's infeasibility check under
    # rounding; drop it.
    for j in range(n - 1):
        rows.extend([n + j] * n)
        cols.extend(range(j, n * n, n))
        vals.extend([1.0] * n)
    A = coo_matrix((vals, (rows, cols)), shape=(2 * n - 1, n * n))
    # presolve misclassifies plans with very small marginal entries (for
    # example Gaussian tails around 1e-20) as infeasible, so skip it
    res = linprog(cost, A_eq=A, b_eq=np.concatenate([a, b[:-1]]),
                  bounds=(0, None), method="highs",
                  options={"presolve": False})
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)
