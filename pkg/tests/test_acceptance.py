"""Top-level acceptance suite: one test per release criterion, with pinned
tolerances. Each test is self-contained and states its oracle inline.

Criterion 3 contains a sub-assertion that fails by a finite, reproducible
margin: the advertised zero-force stationary density e^{-h/T} of the mixed
(part-rotational) cell flow is not what the dynamics produces — the actual
stationary density is e^{-alpha h/T}, because the rotational component
carries no flux along grad h. The assertion is kept as stated so the
discrepancy stays visible; the module tests pin the measured behavior.
"""

import json

import numpy as np
import pytest

from pinflow import glfield as gf
from pinflow import homog
from pinflow.cli import cli_main
from pinflow.fields import Grid2D, ScalarField, constant_field, sample_scalar
from pinflow.flow import Params, j_apply, mixedflow_apply
from pinflow.meanfield import MeanFieldState, evolve, transport_field
from pinflow.particles import (VortexEnsemble, interaction_energy,
                               sample_blob, simulate)
from pinflow.pinning import PinningLandscape, washboard
from pinflow.experiments import ExperimentSpec, run_convergence

SQ2 = 1.0 / np.sqrt(2.0)


def test_criterion_01_washboard_exact_sliding_law():
    # 1D cosine cell potential with unit depinning threshold: above
    # threshold the period integral gives |V| = sqrt(F^2 - 1)
    land = washboard()
    for F in (1.5, 2.0, 3.0):
        V = homog.cell_velocity_deterministic(land, (F, 0.0))
        exact = np.sqrt(F * F - 1.0)
        assert abs(V[0] - exact) <= 1e-3 * exact, F
        assert abs(V[1]) <= 1e-6


def test_criterion_02_depinning_threshold_and_exponent():
    # critical force 1 and square-root onset V ~ (F - Fc)^(1/2)
    rep = homog.depinning_scan(washboard(), (1.0, 0.0), f_max=2.0)
    assert abs(rep.f_critical - 1.0) <= 1e-4
    assert abs(rep.exponent - 0.5) <= 0.05


def test_criterion_03_zero_force_gibbs_stationarity():
    land = PinningLandscape(kind="eggbox", amplitude=0.3)
    g = homog.cell_grid(128)
    h = land.cell_h(g.points())
    gibbs = np.exp(-h / 0.2)
    gibbs /= gibbs.mean()

    # zero-force velocity vanishes
    V = homog.cell_velocity_viscous(land, (0.0, 0.0), 0.2)
    assert np.hypot(*V) <= 1e-10

    # pure gradient flow: stationary density is e^{-h/T}/Z
    mu = homog.viscous_invariant_measure(land, (0.0, 0.0), 0.2,
                                         alpha=1.0, beta=0.0)
    assert np.abs(mu.density - gibbs).max() / gibbs.max() <= 1e-6

    # mixed flow: asserted to match the same Gibbs density.  This fails by
    # a finite margin (the true stationary density is e^{-alpha h/T}/Z, and
    # the gap below converges to 0.335 under grid refinement); kept as an
    # honest record of the advertised-vs-actual behavior.
    mu = homog.viscous_invariant_measure(land, (0.0, 0.0), 0.2,
                                         alpha=SQ2, beta=SQ2)
    assert np.abs(mu.density - gibbs).max() / gibbs.max() <= 1e-6


def test_criterion_04_arrhenius_slope_and_quadrature_crosscheck():
    # activated creep for the 1D cosine: slope of log(|V| T / |F|) against
    # 1/T equals -osc h = -2A within 10%
    A = 0.5
    land = PinningLandscape(kind="cosine1d", amplitude=A)
    rep = homog.arrhenius_scan(land, (0.008, 0.0),
                               [0.08, 0.1, 0.125, 0.16, 0.2, 0.25])
    assert rep.barrier == pytest.approx(2 * A)
    assert rep.relative_gap <= 0.10

    # cross-check the solver against direct 1D quadrature of the tilted
    # periodic problem, pointwise over the temperature sweep: 1e-4 absolute
    # (the velocities themselves are exponentially small) plus a relative
    # guard so the bound stays meaningful at every temperature
    for T0 in (0.08, 0.125, 0.2, 0.25):
        V = homog.cell_velocity_viscous(land, (0.008, 0.0), T0, n=128)
        Vref, _ = homog.tilted_periodic_velocity(
            lambda x: A * np.cos(2 * np.pi * x), 0.008, T0, n=8192)
        assert abs(V[0] - Vref) <= 1e-4
        assert abs(V[0] - Vref) <= 5e-3 * abs(Vref)


def test_criterion_05_langevin_matches_fokker_planck():
    # 64 independent replicas of the single-particle Langevin dynamics in a
    # tilted cosine potential, 1e5 steps each; the long-time mean velocity
    # must match the stationary-measure velocity within 3 standard errors
    A, F, T0 = 0.2, 0.3, 0.2
    land = PinningLandscape(kind="cosine1d", amplitude=A, eta=1.0)
    Vfp = homog.cell_velocity_viscous(land, (F, 0.0), T0, n=128)

    n_rep, nsteps, dt = 64, 100_000, 1e-3
    t_end = nsteps * dt
    rng = np.random.default_rng(2024)
    ens = VortexEnsemble(rng.random((n_rep, 2)),
                         params=Params(temperature=T0,
                                       applied_force=(F, 0.0)),
                         landscape=land, seed=7, interacting=False)
    traj = simulate(ens, t_end, dt, record_every=nsteps)
    disp = traj.snapshots[-1] - traj.snapshots[0]
    v_rep = disp / t_end                       # per-replica mean velocity
    v_mc = v_rep.mean(axis=0)
    se = v_rep.std(axis=0, ddof=1) / np.sqrt(n_rep)
    assert abs(v_mc[0] - Vfp[0]) <= 3 * se[0]
    assert abs(v_mc[1] - Vfp[1]) <= 3 * max(se[1], 1e-12)


@pytest.mark.parametrize("variant,alpha,beta",
                         [("incompressible", 1.0, 0.0), ("lake", 0.0, 1.0)])
def test_criterion_06_mean_field_limit(variant, alpha, beta):
    # deposited N-particle vorticity vs the matching PDE at t = 0.5: the
    # weak-norm distance must drop by >= 1.5x per 4x in N
    spec = ExperimentSpec(kind="converge",
                          config={"variant": variant,
                                  "alpha": alpha, "beta": beta},
                          sweeps={"N": [256, 1024, 4096]})
    _, report = run_convergence(spec)
    assert report["distances"] == sorted(report["distances"], reverse=True)
    assert all(r >= 1.5 for r in report["ratios"]), report["ratios"]


def test_criterion_07_conservation_suite():
    unit = Grid2D(64, 64, 1.0, 1.0, x0=0.0, y0=0.0)

    # (a) PDE mass conservation and positivity floor
    land = PinningLandscape(kind="cosine1d", amplitude=0.3, eta=0.2)
    pts = unit.points()
    blob = np.exp(-((pts[..., 0] - 0.5)**2 + (pts[..., 1] - 0.5)**2)
                  / (2 * 0.12**2))
    m0 = ScalarField(unit, blob / (blob.sum() * unit.cell_area))
    st = MeanFieldState("incompressible", unit, m=m0, landscape=land,
                        params=Params(applied_force=(0.4, 0.0)))
    mass0 = st.m.integral()
    out = evolve(st, 1e-3, 0.2, viscosity=0.02)
    assert abs(out.m.integral() - mass0) <= 1e-12 * abs(mass0)
    st2 = MeanFieldState("incompressible", unit, m=m0,
                         params=Params(applied_force=(0.3, 0.0)))
    assert evolve(st2, 2e-3, 0.3).m.data.min() >= -1e-6

    # (b) lake (conservative) energy drift per unit time
    g = Grid2D(64, 64, 1.0, 1.0, x0=0.0, y0=0.0)
    land2 = PinningLandscape(kind="eggbox", amplitude=0.2, eta=0.5)
    m1 = sample_scalar(g, lambda x, y: 1.0 + 0.3 * np.sin(2 * np.pi * x)
                       * np.cos(2 * np.pi * y))
    lake = MeanFieldState("lake", g, m=m1, landscape=land2)

    def energy(state):
        v = state.velocity()
        _, aw = state._pin()
        return float((aw * (v.data**2).sum(axis=-1)).sum() * g.cell_area)

    e0 = energy(lake)
    t_end = 0.2
    out = evolve(lake, 1e-3, t_end)
    assert abs(energy(out) - e0) / (abs(e0) * t_end) <= 1e-5

    # (c) conservative particle interaction-energy drift per unit time
    rng = np.random.default_rng(6)
    pos = 0.5 * rng.standard_normal((10, 2))
    ens = VortexEnsemble(pos, params=Params(alpha=0.0, beta=1.0))
    traj = simulate(ens, 1.0, 1e-3, record_every=1000)
    w0 = interaction_energy(traj.snapshots[0])
    w1 = interaction_energy(traj.snapshots[-1])
    assert abs(w1 - w0) <= 1e-6 * abs(w0)

    # (d) observed time-stepping order >= 2.9 on a smooth problem
    g32 = Grid2D(32, 32, 1.0, 1.0, x0=0.0, y0=0.0)
    ms = sample_scalar(g32, lambda x, y: 1.0 + 0.4 * np.sin(2 * np.pi * x)
                       * np.sin(2 * np.pi * y))
    params = Params(alpha=0.8, beta=0.6, applied_force=(0.5, 0.2))

    def run(dt):
        s = MeanFieldState("incompressible", g32, m=ms, params=params)
        return evolve(s, dt, 0.2).m.data

    ref = run(0.2 / 512)
    errs = [np.abs(run(0.2 / n) - ref).max() for n in (16, 32, 64)]
    order = min(np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2]))
    assert order >= 2.9


def test_criterion_08_vorticity_disk_integral():
    # single +1 vortex at eps = 0.01: the vorticity integral over a disk of
    # radius 0.1 equals 2 pi within 2%
    g = Grid2D(1024, 1024, 2.0, 2.0)
    cfg = gf.SyntheticVortexConfig(centers=((0.0, 0.0),), degrees=(1,),
                                   epsilon=0.01)
    u = gf.synthesize_field(cfg, g)
    _, mu = gf.supercurrent_and_vorticity(u)
    I = gf.disk_integral(mu, (0.0, 0.0), 0.1)
    assert abs(I - 2 * np.pi) <= 0.02 * 2 * np.pi


@pytest.mark.parametrize("aval", [1.0, 0.8])
def test_criterion_09_self_interaction_energy_slope(aval):
    # E(eps) for a single unit-degree vortex grows like pi a(x0) |log eps|;
    # the grid keeps a fixed 4 cells per eps so the core discretization
    # error cancels in the fitted slope
    eps_sweep = (1e-2, 3e-3, 1e-3)
    E = []
    for eps in eps_sweep:
        n = 2 * int(round(2.0 / eps))
        g = Grid2D(n, n, 1.0, 1.0)
        cfg = gf.SyntheticVortexConfig(centers=((0.0, 0.0),), degrees=(1,),
                                       epsilon=eps)
        u = gf.synthesize_field(cfg, g)
        rep = gf.modulated_energy(
            u, None, 1.0, lambda p, A=aval: A * np.ones(p.shape[:-1]),
            R=0.2, epsilon=eps)
        E.append(rep.energy)
    slope = np.polyfit(np.abs(np.log(eps_sweep)), E, 1)[0]
    assert abs(slope - np.pi * aval) <= 0.02 * np.pi * aval


def test_criterion_10_initial_layer_concentration():
    # gradient descent on a Morse cell potential collects >= 99% of the
    # per-cell mass within 0.05 of the well by t = 20, and the PDE mass
    # fraction matches a tracer pushforward within 1%
    land = PinningLandscape(kind="eggbox", amplitude=1.0 / (2.0 * np.pi))
    g = homog.cell_grid(128)
    drift = homog.cell_layer_drift(land, (0.0, 0.0), kappa=0.0, grid=g)
    umax = (np.abs(drift.data[..., 0]).max()
            + np.abs(drift.data[..., 1]).max())
    dt = 0.8 * min(g.hx, g.hy) / umax
    m = homog.cell_layer_step(constant_field(g, 1.0), drift, dt, 20.0)
    pts = g.points()
    near_well = np.hypot(pts[..., 0] - 0.5, pts[..., 1] - 0.5) <= 0.05
    frac = (m.data * near_well).sum() * g.cell_area
    assert frac >= 0.99
    y0 = np.random.default_rng(0).random((10000, 2))
    yT = homog.push_tracers(land, (0.0, 0.0), y0, 20.0, 0.01, kappa=0.0)
    frac_tr = float((np.hypot(yT[:, 0] - 0.5, yT[:, 1] - 0.5) <= 0.05).mean())
    assert abs(frac - frac_tr) <= 0.01


def test_criterion_11_algebraic_identities():
    # (alpha I + beta J)(alpha I - beta J) = I on the admissible circle
    rng = np.random.default_rng(3)
    for theta in rng.uniform(0.0, 2 * np.pi, 16):
        a, b = np.cos(theta), np.sin(theta)
        G = rng.standard_normal((5, 2))
        back = a * mixedflow_apply(a, b, G) + b * j_apply(mixedflow_apply(a, b, G))
        assert np.abs(back - G).max() <= 1e-14 * max(1.0, np.abs(G).max())

    # per-cell layer drift equals the frozen-coefficient transport field of
    # the mean-field equation on random inputs
    from pinflow.fields import VectorField
    land = PinningLandscape(kind="eggbox", amplitude=0.4, eta=1.0)
    g = homog.cell_grid(32)
    v0 = rng.standard_normal(g.shape + (2,))
    F = (0.3, -0.1)
    drift = homog.cell_layer_drift(land, F, alpha=SQ2, beta=SQ2,
                                   kappa=0.7, v0=v0, grid=g)
    state = MeanFieldState("incompressible", g, m=constant_field(g, 1.0),
                           params=Params(alpha=SQ2, beta=SQ2,
                                         applied_force=F,
                                         interaction_scale=0.7),
                           landscape=land)
    tf = transport_field(state, v=VectorField(g, v0))
    assert np.abs(drift.data + tf).max() <= 1e-12


def test_criterion_12_deterministic_artifacts(tmp_path):
    # fixed config+seed must give byte-identical CSV output on repeated
    # runs and across 1, 4, and 8 workers
    cfg = {"landscape": {"kind": "cosine1d", "amplitude": -1.0 / (2 * np.pi)},
           "f_values": [0.0, 0.5, 1.2, 1.5, 2.0],
           "report_critical": False}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    blobs = []
    for label, workers in (("r1", 1), ("r2", 1), ("w4", 4), ("w8", 8)):
        out = tmp_path / label
        rc = cli_main(["curve", "--config", str(cfg_path),
                       "--out", str(out), "--seed", "7",
                       "--threads", str(workers)])
        assert rc == 0
        blobs.append((out / "curve.csv").read_bytes())
    assert all(b == blobs[0] for b in blobs[1:])
