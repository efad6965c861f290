"""Discrete N-vortex dynamics: mixed-flow ODE and Langevin SDE.

All vortices carry degree +1. The pair interaction uses the log kernel with
force (1/N) sum_{j != i} (x_i - x_j)/|x_i - x_j|^2; near-coincident pairs are
Plummer-regularized at radius r_soft and reported, since same-sign vortices
repel and a true near-collision indicates a too-large time step.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .flow import Params, mixedflow_apply
from .pinning import PinningLandscape

R_SOFT = 1e-6


class NearCollisionError(RuntimeError):
    def __init__(self, i, j, dist, t=None):
        self.pair = (int(i), int(j))
        self.dist = float(dist)
        self.t = t
        super().__init__(f"near-collision of vortices {i}, {j} at distance {dist:.3e}"
                         + ("" if t is None else f" (t={t:g})"))


@dataclass
class VortexEnsemble:
    positions: np.ndarray  # (N, 2)
    params: Params = field(default_factory=Params)
    landscape: PinningLandscape | None = None
    seed: int = 0
    step_index: int = 0
    interacting: bool = True  # False: independent particles (single-vortex physics)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError("positions must have shape (N, 2)")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        self.positions = pos

    @property
    def n(self) -> int:
        return len(self.positions)


def _pair_r2(pos: np.ndarray):
    # squared pair distances via the Gram matrix: r2_ij = |x_i|^2 + |x_j|^2
    # - 2 x_i . x_j, avoiding the (N, N, 2) difference tensor
    sq = (pos**2).sum(axis=1)
    r2 = sq[:, None] + sq[None, :] - 2.0 * (pos @ pos.T)
    np.maximum(r2, 0.0, out=r2)
    np.fill_diagonal(r2, np.inf)
    return r2


def interaction_forces(ens: VortexEnsemble) -> np.ndarray:
    """(1/N) sum_{j != i} (x_i - x_j)/(r^2 + r_soft^2) for all i at once.

    Written as two matrix products with the weight matrix w = 1/(r^2 +
    r_soft^2): sum_j w_ij (x_i - x_j) = (sum_j w_ij) x_i - w x."""
    pos = ens.positions
    if ens.n == 1 or not ens.interacting:
        return np.zeros((ens.n, 2))
    r2 = _pair_r2(pos)
    rmin2 = r2.min()
    if rmin2 < R_SOFT**2:
        i, j = np.unravel_index(np.argmin(r2), r2.shape)
        warnings.warn(f"near-collision of vortices {i}, {j} at distance "
                      f"{np.sqrt(rmin2):.3e}", RuntimeWarning)
    w = 1.0 / (r2 + R_SOFT**2)
    np.fill_diagonal(w, 0.0)
    return (w.sum(axis=1)[:, None] * pos - w @ pos) / ens.n


def interaction_force(ens: VortexEnsemble, i: int) -> np.ndarray:
    return interaction_forces(ens)[i]


def nearest_pair(ens: VortexEnsemble):
    if ens.n < 2:
        return None
    r2 = _pair_r2(ens.positions)
    i, j = np.unravel_index(np.argmin(r2), r2.shape)
    return int(i), int(j), float(np.sqrt(r2[i, j]))


def _raw_drift(pos: np.ndarray, ens: VortexEnsemble) -> np.ndarray:
    work = replace(ens, positions=pos)
    g = interaction_forces(work)
    if ens.landscape is not None:
        g = g - ens.landscape.grad_h(pos)
    g = g + ens.params.force_at(pos)
    return mixedflow_apply(ens.params.alpha, ens.params.beta, g)


def drift(ens: VortexEnsemble) -> np.ndarray:
    """Full right-hand side (alpha I - beta J)(interaction - grad h + F)."""
    return _raw_drift(ens.positions, ens)


def _check_collision(ens: VortexEnsemble, t=None):
    if not ens.interacting:
        return
    np_pair = nearest_pair(ens)
    if np_pair is not None and np_pair[2] < R_SOFT:
        raise NearCollisionError(np_pair[0], np_pair[1], np_pair[2], t)


def step_deterministic(ens: VortexEnsemble, dt: float, scheme: str = "rk4") -> VortexEnsemble:
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = ens.positions
    if scheme == "euler":
        xn = x + dt * _raw_drift(x, ens)
    elif scheme == "rk4":
        k1 = _raw_drift(x, ens)
        k2 = _raw_drift(x + 0.5 * dt * k1, ens)
        k3 = _raw_drift(x + 0.5 * dt * k2, ens)
        k4 = _raw_drift(x + dt * k3, ens)
        xn = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    out = replace(ens, positions=xn, step_index=ens.step_index + 1)
    _check_collision(out)
    return out


def _noise(seed: int, step_index: int, n: int) -> np.ndarray:
    # counter-based stream keyed by (seed, step); particle index = array slot.
    bg = np.random.Philox(key=np.array([seed, step_index], dtype=np.uint64))
    return np.random.Generator(bg).standard_normal((n, 2))


def step_langevin(ens: VortexEnsemble, dt: float) -> VortexEnsemble:
    """One Euler-Maruyama step of the mixed-flow Langevin system.

    Left-multiplying the SDE by (alpha I - beta J) rotates the Brownian
    increments by an orthogonal matrix, so the noise stays standard with
    covariance 2 T dt per particle.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    T = ens.params.temperature
    xn = ens.positions + dt * _raw_drift(ens.positions, ens)
    if T > 0:
        xn = xn + np.sqrt(2.0 * T * dt) * _noise(ens.seed, ens.step_index, ens.n)
    out = replace(ens, positions=xn, step_index=ens.step_index + 1)
    _check_collision(out)
    return out


def interaction_energy(pos: np.ndarray) -> float:
    """W_N = -sum_{i != j} log|x_i - x_j| (ordered pairs)."""
    if len(pos) < 2:
        return 0.0
    r2 = _pair_r2(pos)
    mask = np.isfinite(r2)
    return float(-0.5 * np.log(r2[mask]).sum())


def dissipation_energy(ens: VortexEnsemble) -> float:
    """(1/N) W_N + 2 sum_i h(x_i): non-increasing along the parabolic flow."""
    e = interaction_energy(ens.positions) / ens.n
    if ens.landscape is not None:
        e += 2.0 * float(ens.landscape.h(ens.positions).sum())
    return e


@dataclass
class Trajectory:
    times: np.ndarray
    snapshots: np.ndarray       # (M, N, 2)
    energy: np.ndarray          # W_N / N^2 per snapshot
    center_of_mass: np.ndarray  # (M, 2)
    mean_displacement: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0) and len(self.times) > 1:
            raise ValueError("times must be strictly increasing")

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,i,x,y\n")
            for t, snap in zip(self.times, self.snapshots):
                for i, (x, y) in enumerate(snap):
                    fh.write(f"{t:.17g},{i},{x:.17g},{y:.17g}\n")


def simulate(ens: VortexEnsemble, t_end: float, dt: float, record_every: int = 1,
             scheme: str = "rk4") -> Trajectory:
    """Advance to t_end, recording every record_every-th step (plus t=0)."""
    nsteps = int(round(t_end / dt)) if t_end > 0 else 0
    times = [0.0]
    snaps = [ens.positions.copy()]
    x0 = ens.positions.copy()
    cur = ens
    stochastic = ens.params.temperature > 0
    for k in range(nsteps):
        try:
            if stochastic:
                cur = step_langevin(cur, dt)
            else:
                cur = step_deterministic(cur, dt, scheme)
        except NearCollisionError as exc:
            exc.t = (k + 1) * dt
            raise
        if (k + 1) % record_every == 0 or k + 1 == nsteps:
            times.append((k + 1) * dt)
            snaps.append(cur.positions.copy())
    snaps = np.array(snaps)
    n2 = ens.n**2
    energy = np.array([interaction_energy(s) / n2 for s in snaps])
    com = snaps.mean(axis=1)
    disp = np.array([np.linalg.norm(s - x0, axis=1).mean() for s in snaps])
    return Trajectory(np.array(times), snaps, energy, com, disp)


def sample_blob(center, radius: float, n: int, seed: int) -> np.ndarray:
    """Gaussian blob with standard deviation radius/2 per coordinate."""
    rng = np.random.default_rng(seed)
    return np.asarray(center, dtype=float) + (radius / 2.0) * rng.standard_normal((n, 2))


def initial_positions_from_json(text: str) -> np.ndarray:
    spec = json.loads(text)
    if "points" in spec:
        return np.asarray(spec["points"], dtype=float)
    if "blob" in spec:
        b = spec["blob"]
        return sample_blob(b["center"], b["radius"], b["N"], b.get("seed", 0))
    raise ValueError("initial conditions need 'points' or 'blob'")
