"""Command-line entry point.

Subcommands: particles, meanfield, homog, glfield, converge, curve, layer.
Each takes --config <path.json> and --out <dir>; --seed, --threads and
--verbose override config values. Exit codes: 0 success, 1 unknown
subcommand / usage error, 2 config validation error, 3 numerical failure
(with failure.json written to the output directory).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .experiments import (ExperimentSpec, Stopwatch, current_velocity_curve,
                          emit_curve, landscape_from_config, run_convergence,
                          svg_polyline, write_manifest)
from .fields import Grid2D, ScalarField, write_binary
from .flow import Params

SUBCOMMANDS = ("particles", "meanfield", "homog", "glfield", "converge",
               "curve", "layer")


class ConfigError(ValueError):
    pass


def _numerical_errors():
    from .elliptic import EllipticConvergenceError
    from .homog import HorizonError, TableRangeError
    from .meanfield import CFLError, NaNAbort
    from .particles import NearCollisionError
    return (EllipticConvergenceError, HorizonError, TableRangeError,
            CFLError, NaNAbort, NearCollisionError, FloatingPointError)


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path} at line {exc.lineno} "
                          f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return cfg


# ---------------------------------------------------------------------------
# subcommand implementations (config dict, out dir, executor) -> artifacts
# ---------------------------------------------------------------------------

def _cmd_particles(cfg, out, executor):
    from .particles import (VortexEnsemble, initial_positions_from_json,
                            sample_blob, simulate)
    if "positions" in cfg or "blob" in cfg or "points" in cfg:
        sub = {k: cfg[k] for k in ("points", "blob", "positions") if k in cfg}
        if "positions" in sub:
            sub = sub["positions"]
        pos = initial_positions_from_json(json.dumps(sub))
    else:
        raise ConfigError("particles config needs 'points' or 'blob'")
    params = Params(alpha=float(cfg.get("alpha", 1.0)),
                    beta=float(cfg.get("beta", 0.0)),
                    temperature=float(cfg.get("temperature", 0.0)),
                    applied_force=tuple(cfg.get("force", (0.0, 0.0))))
    ens = VortexEnsemble(pos, params=params,
                         landscape=landscape_from_config(cfg.get("landscape")),
                         seed=int(cfg.get("seed", 0)),
                         interacting=bool(cfg.get("interacting", True)))
    traj = simulate(ens, float(cfg["t_end"]), float(cfg["dt"]),
                    record_every=int(cfg.get("record_every", 1)),
                    scheme=cfg.get("scheme", "rk4"))
    traj.write_csv(os.path.join(out, "trajectory.csv"))
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump({"n": ens.n, "t_end": float(traj.times[-1]),
                   "mean_displacement": float(traj.mean_displacement[-1]),
                   "energy_final": float(traj.energy[-1])},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ["trajectory.csv", "summary.json"]


def _initial_density(cfg, grid: Grid2D) -> ScalarField:
    init = cfg.get("initial", {"kind": "uniform"})
    kind = init.get("kind", "uniform")
    pts = grid.points()
    if kind == "uniform":
        return ScalarField(grid, np.ones(grid.shape))
    if kind == "gaussian":
        c = init.get("center", (0.0, 0.0))
        r = float(init.get("radius", 0.1))
        d2 = (pts[..., 0] - c[0])**2 + (pts[..., 1] - c[1])**2
        data = np.exp(-d2 / (2.0 * r * r))
        return ScalarField(grid, data / (data.sum() * grid.cell_area))
    if kind == "cosine":
        amp = float(init.get("amplitude", 0.5))
        kx = int(init.get("kx", 1))
        ky = int(init.get("ky", 0))
        arg = 2 * np.pi * (kx * pts[..., 0] / grid.Lx
                           + ky * pts[..., 1] / grid.Ly)
        return ScalarField(grid, 1.0 + amp * np.cos(arg))
    raise ConfigError(f"unknown initial density kind {kind!r}")


def _cmd_meanfield(cfg, out, executor):
    from .meanfield import MeanFieldState, cfl_limit, evolve
    n = int(cfg.get("grid_n", 64))
    box = float(cfg.get("box", 1.0))
    grid = Grid2D(n, n, box, box)
    params = Params(alpha=float(cfg.get("alpha", 1.0)),
                    beta=float(cfg.get("beta", 0.0)),
                    lam=float(cfg.get("lambda", 1.0)),
                    applied_force=tuple(cfg.get("force", (0.0, 0.0))),
                    interaction_scale=float(cfg.get("interaction_scale", 1.0)))
    state = MeanFieldState(cfg.get("variant", "incompressible"), grid,
                           m=_initial_density(cfg, grid), params=params,
                           landscape=landscape_from_config(cfg.get("landscape")))
    t_end = float(cfg["t_end"])
    visc = float(cfg.get("viscosity", 0.0))
    dt_cfg = cfg.get("dt", "auto")
    if dt_cfg == "auto":
        dt = t_end / int(np.ceil(t_end / (0.8 * cfl_limit(state, visc))))
    else:
        dt = float(dt_cfg)
    rows = []

    def monitor(k, st):
        rows.append((st.time, float(st.m.mean()), float(st.m.data.min())))

    final = evolve(state, dt, t_end, scheme=cfg.get("scheme", "ssprk3"),
                   viscosity=visc, monitor=monitor)
    write_binary(os.path.join(out, "m_final.bin"), final.m)
    with open(os.path.join(out, "series.csv"), "w") as fh:
        fh.write("t,mass,min_m\n")
        for t, mass, mn in rows:
            fh.write(f"{t:.17g},{mass:.17g},{mn:.17g}\n")
    return ["m_final.bin", "series.csv"]


def _cmd_homog(cfg, out, executor):
    from . import homog
    land = landscape_from_config(cfg.get("landscape"))
    if land is None:
        raise ConfigError("homog config needs a 'landscape'")
    mode = cfg.get("mode", "velocity")
    alpha = float(cfg.get("alpha", 1.0))
    beta = float(cfg.get("beta", 0.0))
    T0 = float(cfg.get("temperature", 0.0))
    artifacts = []
    if mode == "velocity":
        F = tuple(cfg.get("force", (0.0, 0.0)))
        if T0 > 0:
            V = homog.cell_velocity_viscous(land, F, T0, alpha, beta,
                                            n=int(cfg.get("measure_n", 128)))
        else:
            V = homog.cell_velocity_deterministic(land, F, alpha, beta)
        report = {"mode": mode, "force": list(F), "temperature": T0,
                  "velocity": [float(V[0]), float(V[1])]}
    elif mode == "measure":
        F = tuple(cfg.get("force", (0.0, 0.0)))
        mu = homog.viscous_invariant_measure(
            land, F, T0, alpha, beta, n=int(cfg.get("measure_n", 128)))
        write_binary(os.path.join(out, "measure.bin"),
                     ScalarField(mu.grid, mu.density))
        artifacts.append("measure.bin")
        report = {"mode": mode, "force": list(F), "temperature": T0,
                  "residual": mu.residual, "integral": mu.integral()}
    elif mode == "depinning":
        rep = homog.depinning_scan(land, tuple(cfg.get("direction", (1, 0))),
                                   f_max=float(cfg.get("f_max", 2.0)),
                                   T0=T0, alpha=alpha, beta=beta)
        report = {"mode": mode, "f_critical": rep.f_critical,
                  "exponent": rep.exponent, "fit_range": list(rep.fit_range),
                  "samples": rep.samples}
    elif mode == "arrhenius":
        rep = homog.arrhenius_scan(land, tuple(cfg.get("force", (0.005, 0.0))),
                                   cfg.get("temperatures", [0.1, 0.15, 0.2]),
                                   alpha=alpha, beta=beta,
                                   n=int(cfg.get("measure_n", 128)))
        report = {"mode": mode, "slope": rep.slope, "barrier": rep.barrier,
                  "relative_gap": rep.relative_gap, "samples": rep.samples}
    elif mode == "table":
        vt = homog.build_velocity_table(
            land, f_max=float(cfg.get("f_max", 2.0)),
            n_theta=int(cfg.get("n_theta", 24)),
            n_radii=int(cfg.get("n_radii", 32)),
            T0=T0, alpha=alpha, beta=beta, executor=executor)
        vt.write_csv(os.path.join(out, "table.csv"))
        artifacts.append("table.csv")
        report = {"mode": mode, "f_max": vt.f_max,
                  "n_theta": len(vt.thetas), "n_radii": len(vt.radii)}
    else:
        raise ConfigError(f"unknown homog mode {mode!r}")
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return artifacts + ["report.json"]


def _cmd_glfield(cfg, out, executor):
    from . import glfield as gf
    n = int(cfg.get("grid_n", 512))
    box = float(cfg.get("box", 2.0))
    grid = Grid2D(n, n, box, box)
    vcfg = gf.SyntheticVortexConfig(
        centers=tuple(tuple(c) for c in cfg.get("centers", ((0.0, 0.0),))),
        degrees=tuple(cfg.get("degrees", (1,) * len(cfg.get("centers", ((0.0, 0.0),))))),
        epsilon=float(cfg.get("epsilon", 1e-2)),
        profile=cfg.get("profile", "tanh"))
    u = gf.synthesize_field(vcfg, grid)
    j, mu = gf.supercurrent_and_vorticity(u, epsilon=vcfg.epsilon)
    disk_r = float(cfg.get("disk_radius", 10 * vcfg.epsilon))
    degrees = [gf.disk_integral(mu, c, disk_r) / (2 * np.pi)
               for c in vcfg.centers]
    rep = gf.modulated_energy(
        u, None, float(cfg.get("N", 1.0)),
        landscape_from_config(cfg.get("landscape")),
        R=float(cfg.get("R", box / 5.0)), epsilon=vcfg.epsilon,
        scan_translates=bool(cfg.get("scan_translates", False)))
    report = {"epsilon": vcfg.epsilon,
              "disk_degrees": degrees,
              "energy": rep.energy, "excess": rep.excess,
              "energy_sup": rep.energy_sup, "excess_sup": rep.excess_sup}
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ["report.json"]


def _cmd_converge(cfg, out, executor):
    spec = ExperimentSpec(kind="converge", config=cfg, out_dir=out,
                          sweeps={"N": cfg.get("n_sweep", [256, 1024, 4096])})
    series, report = run_convergence(spec, executor=executor)
    series.write_csv(os.path.join(out, "convergence.csv"), "N,distance")
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump({k: report[k] for k in ("N", "distances", "ratios", "pass")},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    status = "PASS" if report["pass"] else "FAIL"
    print(f"{status}: distance ratios {report['ratios']}")
    return ["convergence.csv", "report.json"]


def _cmd_curve(cfg, out, executor):
    fvals = cfg.get("f_values")
    sweeps = {"F": fvals} if fvals else {}
    spec = ExperimentSpec(kind="stickslip", config=cfg, out_dir=out,
                          sweeps=sweeps)
    series = current_velocity_curve(spec, executor=executor)
    artifacts = emit_curve(series, out)
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(series.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return artifacts + ["report.json"]


def _cmd_layer(cfg, out, executor):
    from . import homog
    land = landscape_from_config(cfg.get("landscape"))
    if land is None:
        raise ConfigError("layer config needs a 'landscape'")
    n = int(cfg.get("grid_n", 128))
    g = homog.cell_grid(n)
    drift = homog.cell_layer_drift(
        land, tuple(cfg.get("force", (0.0, 0.0))),
        alpha=float(cfg.get("alpha", 1.0)), beta=float(cfg.get("beta", 0.0)),
        kappa=float(cfg.get("kappa", 1.0)),
        v0=tuple(cfg.get("v0", (0.0, 0.0))), grid=g)
    umax = (np.abs(drift.data[..., 0]).max()
            + np.abs(drift.data[..., 1]).max())
    dt_cfg = cfg.get("dt", "auto")
    dt = (0.8 * min(g.hx, g.hy) / max(umax, 1e-12)
          if dt_cfg == "auto" else float(dt_cfg))
    m0 = ScalarField(g, np.ones(g.shape))
    m = homog.cell_layer_step(m0, drift, dt, float(cfg.get("t_end", 20.0)))
    write_binary(os.path.join(out, "density.bin"), m)
    report = {"t_end": float(cfg.get("t_end", 20.0)), "dt": dt,
              "mass": float(m.mean()), "max_density": float(m.data.max())}
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ["density.bin", "report.json"]


_COMMANDS = {
    "particles": _cmd_particles,
    "meanfield": _cmd_meanfield,
    "homog": _cmd_homog,
    "glfield": _cmd_glfield,
    "converge": _cmd_converge,
    "curve": _cmd_curve,
    "layer": _cmd_layer,
}


def _usage() -> str:
    return ("usage: pinflow {" + ",".join(SUBCOMMANDS) + "} "
            "--config <path.json> [--out <dir>] [--seed S] [--threads T] "
            "[--verbose]")


def cli_main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(_usage())
        return 0 if argv else 1
    sub = argv[0]
    if sub not in _COMMANDS:
        print(_usage(), file=sys.stderr)
        print(f"unknown subcommand {sub!r}", file=sys.stderr)
        return 1
    parser = argparse.ArgumentParser(prog=f"pinflow {sub}", add_help=True)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=".")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--verbose", action="store_true")
    try:
        args = parser.parse_args(argv[1:])
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0

    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("PINFLOW_THREADS", "1"))
    if threads < 1:
        print("thread count must be >= 1", file=sys.stderr)
        return 2

    try:
        cfg = _load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = int(args.seed)
        os.makedirs(args.out, exist_ok=True)
        executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
        try:
            with Stopwatch() as sw:
                artifacts = _COMMANDS[sub](cfg, args.out, executor)
        finally:
            if executor is not None:
                executor.shutdown()
        write_manifest(os.path.join(args.out, "manifest.json"), cfg,
                       seeds=[int(cfg.get("seed", 0))],
                       wall_clock=sw.elapsed, artifacts=artifacts,
                       threads=threads)
        if args.verbose:
            print(f"wrote {', '.join(artifacts + ['manifest.json'])} "
                  f"to {args.out} in {sw.elapsed:.2f}s")
        return 0
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, _numerical_errors()):
            return _numerical_failure(args.out, exc)
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _numerical_errors() as exc:
        return _numerical_failure(args.out, exc)


def _numerical_failure(out, exc) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    try:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "failure.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError:
        pass
    print(f"numerical failure: {payload['error']}: {payload['message']}",
          file=sys.stderr)
    return 3


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
