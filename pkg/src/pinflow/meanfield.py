"""Mean-field PDE families in vorticity form, velocity reconstruction, and
time stepping.

Four variants are evolved on a periodic grid:

  incompressible   d_t m = div((aI - bJ)(grad h - F + 2 s v^perp) m),
                   curl v = m, div v = 0
  compressible     the same transport for m (with 2 s lam v^perp), coupled to
                   d_t d = (1/a) Lap d - (1/a) div(d grad h)
                         + div((aI - bJ)(grad^perp h - F^perp - 2 s lam v) a_w m),
                   curl v = m, div(a_w v) = d
  degenerate       d_t v = -(F^perp + 2 v) curl v  (v itself is evolved)
  lake             d_t m = div((F^perp + 2 s v) m), curl v = m, div(a_w v) = 0

Here s is params.interaction_scale (1 reproduces the equations above; the
harness sets pi to match the log-kernel particle normalization). Transport
terms are formed in real space from dealiased factors and differentiated
spectrally, so the discrete mass is conserved to round-off.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .elliptic import elliptic_solve_weighted
from .fields import Grid2D, ScalarField, VectorField, constant_field
from .flow import Params, j_apply, mixedflow_apply
from .pinning import PinningLandscape
from .spectral import (curl, dealias, div, freespace_grad_inv_laplacian, grad,
                       laplacian, perp_grad, poisson_solve)

VARIANTS = ("incompressible", "compressible", "degenerate", "lake")
POSITIVITY_TOL = 1e-8


class CFLError(RuntimeError):
    pass


class NaNAbort(RuntimeError):
    def __init__(self, step):
        self.step = step
        super().__init__(f"non-finite field values detected at step {step}")


def reconstruct_velocity(m: ScalarField, d: ScalarField | None = None,
                         a: ScalarField | None = None,
                         mode: str = "periodic") -> VectorField:
    """Solve curl v = m - mean, div(a v) = d - mean for v.

    With a == 1 this is v = grad^perp Lap^{-1} m + grad Lap^{-1} d. The
    freespace mode uses the plane kernel (compact support required) and only
    supports unit weight.
    """
    g = m.grid
    if mode == "freespace":
        if a is not None and np.abs(a.data - 1.0).max() > 1e-14:
            raise ValueError("freespace reconstruction requires unit weight")
        v = j_apply(freespace_grad_inv_laplacian(m).data)
        if d is not None and np.abs(d.data).max() > 0:
            v = v + freespace_grad_inv_laplacian(d).data
        return VectorField(g, v)
    if a is None or np.abs(a.data - 1.0).max() < 1e-14:
        v = perp_grad(poisson_solve(m)).data
        if d is not None and np.abs(d.data).max() > 0:
            v = v + grad(poisson_solve(d)).data
        return VectorField(g, v)
    # v = a^{-1} grad^perp (div a^{-1} grad)^{-1} m + grad (div a grad)^{-1} d
    psi = elliptic_solve_weighted(m, a, form="div_ainv_grad")
    v = perp_grad(psi).data / a.data[..., None]
    if d is not None and np.abs(d.data).max() > 0:
        phi = elliptic_solve_weighted(d, a, form="div_a_grad")
        v = v + grad(phi).data
    return VectorField(g, v)


@dataclass
class MeanFieldState:
    variant: str
    grid: Grid2D
    m: ScalarField | None = None
    d: ScalarField | None = None
    v: VectorField | None = None
    params: Params = field(default_factory=Params)
    landscape: PinningLandscape | None = None
    mode: str = "periodic"  # velocity reconstruction: periodic | freespace
    time: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "degenerate":
            if self.v is None:
                raise ValueError("degenerate variant evolves v")
        elif self.m is None:
            raise ValueError(f"variant {self.variant!r} evolves m")
        if self.variant == "compressible" and self.d is None:
            self.d = constant_field(self.grid, 0.0)

    # cached landscape samples on the grid
    def _pin(self):
        if getattr(self, "_pin_cache", None) is None:
            g = self.grid
            if self.landscape is None:
                gh = np.zeros(g.shape + (2,))
                aw = np.ones(g.shape)
            else:
                pts = g.points()
                gh = self.landscape.grad_h(pts)
                aw = self.landscape.weight(pts)
            object.__setattr__(self, "_pin_cache", (gh, aw))
        return self._pin_cache

    def force_field(self) -> np.ndarray:
        return self.params.force_at(self.grid.points())

    def velocity(self) -> VectorField:
        if self.variant == "degenerate":
            return self.v
        gh, aw = self._pin()
        g = self.grid
        a = None
        if self.variant in ("compressible", "lake") and self.landscape is not None:
            a = ScalarField(g, aw)
        d = self.d if self.variant == "compressible" else None
        return reconstruct_velocity(self.m, d=d, a=a, mode=self.mode)

    def vorticity(self) -> ScalarField:
        if self.variant == "degenerate":
            return curl(self.v)
        return self.m


@dataclass
class MeanFieldRHS:
    dm: np.ndarray | None = None
    dd: np.ndarray | None = None
    dv: np.ndarray | None = None


def _dealias2(g: Grid2D, arr: np.ndarray) -> np.ndarray:
    return dealias(ScalarField(g, arr)).data


def _div_spectral(g: Grid2D, ux: np.ndarray, uy: np.ndarray) -> np.ndarray:
    return div(VectorField(g, np.stack([ux, uy], axis=-1))).data


def transport_field(state: MeanFieldState, v: VectorField | None = None) -> np.ndarray:
    """The vector field inside the divergence of the m-equation:
    (aI - bJ)(grad h - F + 2 s_eff v^perp); s_eff includes lam for the
    compressible variant. For the lake variant the corresponding field is
    -(F^perp + 2 s v)."""
    p = state.params
    gh, _ = state._pin()
    F = state.force_field()
    if v is None:
        v = state.velocity()
    if state.variant == "lake":
        return j_apply(F) + 2.0 * p.interaction_scale * v.data
    s = p.interaction_scale * (p.lam if state.variant == "compressible" else 1.0)
    G = gh - F + 2.0 * s * j_apply(v.data)
    return mixedflow_apply(p.alpha, p.beta, G)


def mean_field_rhs(state: MeanFieldState) -> MeanFieldRHS:
    g = state.grid
    p = state.params
    if state.variant == "degenerate":
        w = curl(state.v).data
        F = state.force_field()
        wd = _dealias2(g, w)
        vx = _dealias2(g, state.v.data[..., 0])
        vy = _dealias2(g, state.v.data[..., 1])
        Fp = j_apply(F)
        s = p.interaction_scale
        dv = -np.stack([(Fp[..., 0] + 2 * s * vx) * wd,
                        (Fp[..., 1] + 2 * s * vy) * wd], axis=-1)
        return MeanFieldRHS(dv=dv)

    v = state.velocity()
    X = transport_field(state, v)
    md = _dealias2(g, state.m.data)
    Xx = _dealias2(g, X[..., 0])
    Xy = _dealias2(g, X[..., 1])
    dm = _div_spectral(g, Xx * md, Xy * md)
    if state.variant != "compressible":
        return MeanFieldRHS(dm=dm)

    gh, aw = state._pin()
    F = state.force_field()
    ia = 1.0 / p.alpha
    dd_lin = ia * laplacian(state.d).data
    ddta = _dealias2(g, state.d.data)
    dd_lin -= ia * _div_spectral(g, ddta * gh[..., 0], ddta * gh[..., 1])
    s = p.interaction_scale * p.lam
    G = j_apply(gh) - j_apply(F) - 2.0 * s * v.data
    Y = mixedflow_apply(p.alpha, p.beta, G)
    src = np.stack([_dealias2(g, Y[..., 0]) * aw * md,
                    _dealias2(g, Y[..., 1]) * aw * md], axis=-1)
    dd = dd_lin + _div_spectral(g, src[..., 0], src[..., 1])
    return MeanFieldRHS(dm=dm, dd=dd)


def add_viscosity(rhs: MeanFieldRHS, state: MeanFieldState, T: float) -> MeanFieldRHS:
    """Add the thermal Laplacian T*Lap to every evolved field."""
    if T < 0:
        raise ValueError("T must be >= 0")
    if T == 0:
        return rhs
    out = MeanFieldRHS(dm=rhs.dm, dd=rhs.dd, dv=rhs.dv)
    if rhs.dm is not None:
        out.dm = rhs.dm + T * laplacian(state.m).data
    if rhs.dd is not None:
        out.dd = rhs.dd + T * laplacian(state.d).data
    if rhs.dv is not None:
        g = state.grid
        out.dv = rhs.dv + T * np.stack(
            [laplacian(state.v.component(0)).data,
             laplacian(state.v.component(1)).data], axis=-1)
    return out


def _pack(state: MeanFieldState) -> list[np.ndarray]:
    if state.variant == "degenerate":
        return [state.v.data.copy()]
    out = [state.m.data.copy()]
    if state.variant == "compressible":
        out.append(state.d.data.copy())
    return out


def _unpack(state: MeanFieldState, arrs) -> MeanFieldState:
    if state.variant == "degenerate":
        new = replace(state, v=VectorField(state.grid, arrs[0]))
    elif state.variant == "compressible":
        new = replace(state, m=ScalarField(state.grid, arrs[0]),
                      d=ScalarField(state.grid, arrs[1]))
    else:
        new = replace(state, m=ScalarField(state.grid, arrs[0]))
    new._pin_cache = getattr(state, "_pin_cache", None)
    return new


def _rhs_arrays(state: MeanFieldState, viscosity: float) -> list[np.ndarray]:
    rhs = add_viscosity(mean_field_rhs(state), state, viscosity)
    if state.variant == "degenerate":
        return [rhs.dv]
    out = [rhs.dm]
    if state.variant == "compressible":
        out.append(rhs.dd)
    return out


def cfl_limit(state: MeanFieldState, viscosity: float = 0.0) -> float:
    g = state.grid
    h = min(g.hx, g.hy)
    if state.variant == "degenerate":
        vmax = np.abs(state.v.data).max() * 2 + np.abs(j_apply(state.force_field())).max()
        speed = max(vmax, 1e-12)
    else:
        speed = max(np.abs(transport_field(state)).max(), 1e-12)
    lim = 0.4 * h / speed
    if viscosity > 0:
        lim = min(lim, 0.2 * h**2 / viscosity)
    if state.variant == "compressible":
        lim = min(lim, 0.2 * h**2 * state.params.alpha)
    return lim


def step(state: MeanFieldState, dt: float, scheme: str = "ssprk3",
         viscosity: float = 0.0, check_cfl: bool = True) -> MeanFieldState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if check_cfl:
        lim = cfl_limit(state, viscosity)
        if dt > lim:
            raise CFLError(f"dt={dt:g} exceeds CFL limit {lim:g}")
    u0 = _pack(state)
    try:
        un = _stages(state, u0, dt, scheme, viscosity)
    except ValueError as exc:
        if "finite" in str(exc):
            raise NaNAbort(step=int(round(state.time / dt)) + 1) from None
        raise
    for arr in un:
        if not np.all(np.isfinite(arr)):
            raise NaNAbort(step=int(round(state.time / dt)) + 1)
    out = _unpack(state, un)
    out.time = state.time + dt
    return out


def _stages(state: MeanFieldState, u0, dt: float, scheme: str,
            viscosity: float) -> list[np.ndarray]:
    if scheme == "ssprk3":
        k1 = _rhs_arrays(state, viscosity)
        s1 = _unpack(state, [u + dt * k for u, k in zip(u0, k1)])
        k2 = _rhs_arrays(s1, viscosity)
        s2 = _unpack(state, [0.75 * u + 0.25 * (w + dt * k)
                             for u, w, k in zip(u0, _pack(s1), k2)])
        k3 = _rhs_arrays(s2, viscosity)
        un = [u / 3.0 + (2.0 / 3.0) * (w + dt * k)
              for u, w, k in zip(u0, _pack(s2), k3)]
    elif scheme == "rk4":
        k1 = _rhs_arrays(state, viscosity)
        k2 = _rhs_arrays(_unpack(state, [u + 0.5 * dt * k for u, k in zip(u0, k1)]), viscosity)
        k3 = _rhs_arrays(_unpack(state, [u + 0.5 * dt * k for u, k in zip(u0, k2)]), viscosity)
        k4 = _rhs_arrays(_unpack(state, [u + dt * k for u, k in zip(u0, k3)]), viscosity)
        un = [u + (dt / 6.0) * (a + 2 * b + 2 * c + d)
              for u, a, b, c, d in zip(u0, k1, k2, k3, k4)]
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return un


def evolve(state: MeanFieldState, dt: float, t_end: float, scheme: str = "ssprk3",
           viscosity: float = 0.0, monitor=None) -> MeanFieldState:
    """Repeated stepping to t_end; monitors positivity of m and reports
    (warns) if min m drops below -POSITIVITY_TOL."""
    nsteps = int(round(t_end / dt))
    cur = state
    worst = 0.0
    for k in range(nsteps):
        try:
            # the CFL check needs a full velocity reconstruction; validate
            # the step size against the initial state once, then recheck
            # periodically instead of every step
            cur = step(cur, dt, scheme=scheme, viscosity=viscosity,
                       check_cfl=(k % 16 == 0))
        except NaNAbort:
            raise NaNAbort(k + 1)
        if cur.m is not None:
            worst = min(worst, float(cur.m.data.min()))
        if monitor is not None:
            monitor(k + 1, cur)
    if worst < -POSITIVITY_TOL:
        warnings.warn(f"vorticity positivity violated: min m = {worst:.3e}",
                      RuntimeWarning)
    return cur


def pressure_of(state: MeanFieldState) -> ScalarField:
    """Diagnostic pressure: solve div(a grad p) = div(a * d_t v transport part)
    is never needed; we report the Lagrange-multiplier pressure of the lake /
    incompressible form, p = Lap^{-1} div(X m) with X the transport field."""
    g = state.grid
    X = transport_field(state)
    md = state.vorticity().data
    rhs = _div_spectral(g, X[..., 0] * md, X[..., 1] * md)
    return poisson_solve(ScalarField(g, rhs))


def upwind_div(grid: Grid2D, U: np.ndarray, m: np.ndarray) -> np.ndarray:
    """First-order finite-volume div(U m) with donor-cell upwind fluxes.

    Fallback path for sharp-front runs; U face values by averaging the
    neighboring cells."""
    hx, hy = grid.hx, grid.hy
    uxf = 0.5 * (U[..., 0] + np.roll(U[..., 0], -1, axis=0))   # face i+1/2
    uyf = 0.5 * (U[..., 1] + np.roll(U[..., 1], -1, axis=1))
    mR = np.roll(m, -1, axis=0)
    fx = np.where(uxf > 0, uxf * m, uxf * mR)
    mU = np.roll(m, -1, axis=1)
    fy = np.where(uyf > 0, uyf * m, uyf * mU)
    return (fx - np.roll(fx, 1, axis=0)) / hx + (fy - np.roll(fy, 1, axis=1)) / hy
