"""Command-line entry point: ``cohesive-pd {calibrate,simulate,analyze,verify}``.

Exit status: 0 success, 2 configuration or usage error, 3 runtime failure.
The thread count is taken from ``--threads``, else the ``COHESIVE_PD_THREADS``
environment variable, else ``[run] threads`` in the config, else 1.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .benchmarks import notch_lefm_energy, unit_material
from .calibration import MaterialModel, elastic_moduli, energy_release_rate, fit_kernel
from .config import ConfigError, RunConfig, parse_config
from .diagnostics import (
    ProcessZoneParams,
    exceedance_field,
    nucleation_scan,
    process_zone,
    process_zone_bound,
    unstable_flags,
)
from .dynamics import (
    THREADS_ENV,
    EnergyLedger,
    SimState,
    initial_state,
    run as run_dynamics,
    stable_dt,
)
from .grid import DomainGrid, build_grid
from .io import (
    CONVERGENCE_HEADER,
    ENERGY_HEADER,
    ZONE_HEADER,
    TableWriter,
    fmt,
    read_snapshot,
    write_snapshot,
    write_vtk,
)
from .kernel import InfluenceFunction
from .verification import (
    check_inequality,
    field_catalog,
    wave_speed,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
log = logging.getLogger("cohesive_pd")


class UsageError(Exception):
    """Bad command-line usage (exit status 2)."""


# ---------------------------------------------------------------------------
# Initial conditions.
# ---------------------------------------------------------------------------

def _interior_box(grid: DomainGrid) -> list[tuple[float, float]]:
    spec = grid.spec
    out = []
    for (lo, hi), wrap in zip(spec.bounds, spec.periodic):
        c = 0.0 if wrap else spec.collar_thickness
        out.append((lo + c, hi - c))
    return out


def _bump(grid: DomainGrid, power: int) -> np.ndarray:
    phi = np.ones(grid.num_nodes)
    for axis, (a, b) in enumerate(_interior_box(grid)):
        if grid.spec.periodic[axis]:
            continue
        s = np.clip((grid.positions[:, axis] - a) / (b - a), 0.0, 1.0)
        phi *= np.sin(np.pi * s) ** power
    return phi


def initial_fields(config: RunConfig, grid: DomainGrid) -> tuple[np.ndarray, np.ndarray, float]:
    """``(u0, v0, LEFM(u0))`` for the configured initial condition.

    The elastic energy is ``nan`` when it has no closed form here; a value in
    ``[diagnostics] lefm_u0`` always takes precedence.
    """
    ic, material = config.initial, config.material
    d, x = grid.dimension, grid.positions
    u0 = np.zeros_like(x)
    v0 = np.zeros_like(x)
    lefm = float("nan")
    centre = np.array([0.5 * (lo + hi) for lo, hi in grid.spec.bounds])
    if ic.kind == "zero":
        lefm = 0.0
    elif ic.kind == "pluck":
        u0 = ic.amplitude * _bump(grid, 1)[:, None] * np.ones(d) / math.sqrt(d)
    elif ic.kind in ("mode_i_opening", "notch_opening"):
        normal = np.asarray(ic.normal if ic.normal is not None else np.eye(d)[1], dtype=float)
        normal /= np.linalg.norm(normal)
        point = np.asarray(ic.point if ic.point is not None else centre)
        side = np.sign((x - point) @ normal)
        taper = _bump(grid, 2) if ic.kind == "notch_opening" else 1.0
        u0 = 0.5 * ic.amplitude * (side * taper)[:, None] * normal
        if ic.kind == "notch_opening":
            (ax, bx), (ay, by) = _interior_box(grid)[:2]
            if abs(bx - ax - (by - ay)) < 1e-12 and np.allclose(normal, np.eye(d)[1]):
                lefm = notch_lefm_energy(material, ic.amplitude, bx - ax)
    elif ic.kind == "plane_wave":
        k = np.asarray(ic.wave_vector)
        p = np.asarray(ic.polarization)
        omega = wave_speed(material, k, p) * float(np.linalg.norm(k))
        u0 = ic.amplitude * np.sin(x @ k)[:, None] * p
        v0 = -ic.amplitude * omega * np.cos(x @ k)[:, None] * p
    if config.diagnostics.lefm_u0 is not None:
        lefm = config.diagnostics.lefm_u0
    return u0, v0, lefm


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------

def _load(path: str | None) -> RunConfig:
    if path is None:
        raise UsageError("--config is required for this subcommand")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _threads(args: argparse.Namespace, config: RunConfig | None) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from None
        if value < 1:
            raise UsageError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return value
    if config is not None and config.threads is not None:
        return config.threads
    return 1


def _outdir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_calibrate(args: argparse.Namespace) -> int:
    if args.config is not None:
        material = _load(args.config).material
    else:
        J = InfluenceFunction.conical() if args.influence == "conical" else InfluenceFunction.constant()
        if args.mu is None or args.gc is None:
            raise UsageError("calibrate needs --config or both --mu and --gc")
        f = fit_kernel(args.mu, args.gc, J, args.dimension)
        material = MaterialModel(1.0, 1.0, args.dimension, f, J)
    f, J, d = material.potential, material.influence, material.dimension
    mu, lam = elastic_moduli(f, J, d)
    # A human-readable report: 12 significant digits hide last-bit noise
    # (e.g. mu = 1/12 given in decimal round-trips to f'(0) = 1).
    lines = [
        ("dimension", str(d)),
        ("profile", f.profile_kind.value),
        ("f'(0)", f.initial_slope),
        ("f_inf", f.plateau),
        ("mu", mu),
        ("lambda", lam),
        ("G_c", energy_release_rate(f, J, d)),
        ("rbar", f.inflection_radius()),
    ]
    for key, value in lines:
        print(f"{key} = {value if isinstance(value, str) else format(value, '.12g')}")
    return EXIT_OK


def _zone_bound(params, material, t, lefm, v0_norm, b_int) -> float:
    if not math.isfinite(lefm):
        return float("nan")
    return process_zone_bound(params, material, t, lefm, v0_norm, b_int)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load(args.config)
    threads = _threads(args, config)
    out = _outdir(args)
    material = config.material
    grid = build_grid(config.domain)
    dyn, diag = config.dynamics, config.diagnostics
    stride = args.stride if args.stride is not None else dyn.stride
    u0, v0, lefm = initial_fields(config, grid)
    v0_norm = math.sqrt(grid.cell_volume * float(np.sum(v0[grid.interior] ** 2)))

    if dyn.dt is None:
        dt_max = stable_dt(grid, material, dyn.safety)
        steps = max(1, int(math.ceil(dyn.t_end / dt_max - 1e-12)))
        dt = dyn.t_end / steps
    else:
        dt = dyn.dt
        steps = max(1, int(round(dyn.t_end / dt)))
    log.info("grid %s, %d interior nodes, %d bonds; dt=%s, %d steps, %d thread(s)",
             grid.shape, len(grid.interior), len(grid.bond_q), fmt(dt), steps, threads)

    snapdir = out / "snapshots"
    snapdir.mkdir(exist_ok=True)
    state = initial_state(grid, material, u0, v0, dyn.body_force, threads=threads)
    e0 = state.ledger.initial_total
    scale = abs(e0) if e0 != 0.0 else 1.0
    max_rel = 0.0
    final_zone = float("nan")
    with TableWriter(out / "energy.csv", ENERGY_HEADER) as energy, \
            TableWriter(out / "process_zone.csv", ZONE_HEADER) as zones:
        for n, state in run_dynamics(state, grid, material, dyn.body_force, dt, steps, stride, threads):
            led = state.ledger
            rel = led.residual / scale
            max_rel = max(max_rel, rel)
            energy.write((n, state.t, led.kinetic, led.potential, led.external,
                          led.work_integral, led.total, led.residual, rel))
            first = None
            for z, params in enumerate(diag.process_zones):
                pz = process_zone(grid, state.u, params, material)
                first = pz.exceedance if first is None else first
                bound = _zone_bound(params, material, state.t, lefm, v0_norm,
                                    led.force_norm_integral)
                zones.write((n, state.t, z, params.k_threshold, params.alpha, params.theta,
                             pz.measure, bound, len(pz.nodes)))
                if z == 0:
                    final_zone = pz.measure
            unstable = None
            if diag.nucleation:
                report = nucleation_scan(grid, state.u, material, diag.direction_count)
                unstable = report.unstable
            name = snapdir / f"snapshot_{n:07d}"
            write_snapshot(state, grid, name.with_suffix(".csv"), first, unstable)
            if diag.vtk:
                write_vtk(state, grid, name.with_suffix(".vtk"), first, unstable)
    print(f"steps = {steps}")
    print(f"t_end = {fmt(state.t)}")
    print(f"dt = {fmt(dt)}")
    print(f"max_relative_residual = {fmt(max_rel)}")
    print(f"final_zone_measure = {fmt(final_zone)}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    config = _load(args.config)
    if args.snapshot is None:
        raise UsageError("analyze needs --snapshot PATH")
    threads = _threads(args, config)
    del threads  # the diagnostics are single-pass vectorised evaluations
    out = _outdir(args)
    material = config.material
    grid = build_grid(config.domain)
    snap = read_snapshot(args.snapshot)
    if not np.array_equal(np.sort(snap["id"]), grid.interior):
        raise ValueError("snapshot node ids do not match the configured grid's interior")
    u = np.zeros_like(grid.positions)
    v = np.zeros_like(grid.positions)
    u[snap["id"]] = snap["u"]
    v[snap["id"]] = snap["v"]
    state = SimState(0.0, u, v, np.zeros_like(u), EnergyLedger(0.0, 0.0, 0.0, 0.0))
    zones = config.diagnostics.process_zones or (ProcessZoneParams.fracture_set(material),)
    with TableWriter(out / "analysis_zones.csv",
                     ("zone", "k_threshold", "alpha", "theta", "measure", "node_count")) as tw:
        for z, params in enumerate(zones):
            pz = process_zone(grid, u, params, material)
            tw.write((z, params.k_threshold, params.alpha, params.theta, pz.measure, len(pz.nodes)))
            print(f"zone {z}: measure = {fmt(pz.measure)}, nodes = {len(pz.nodes)}")
    P = exceedance_field(grid, u, material, zones[0])
    report = nucleation_scan(grid, u, material, config.diagnostics.direction_count)
    write_snapshot(state, grid, out / "analysis.csv", P, report.unstable)
    with TableWriter(out / "instability.csv", ("id", "lam_max") + tuple(
            f"nu_{a}" for a in "xyz"[:grid.dimension]) + ("unstable",)) as tw:
        for k, i in enumerate(report.nodes):
            tw.write((int(i), report.lam_max[k], *report.directions[k], bool(report.unstable[k])))
    print(f"unstable_nodes = {int(np.sum(unstable_flags(grid, report)))}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    if args.config is not None:
        config = _load(args.config)
        material, horizons, names = config.material, config.verify.horizons, config.verify.fields
    else:
        material, horizons, names = unit_material(0.1), (0.2, 0.1, 0.05), None
    if material.dimension != 2:
        raise UsageError("verify supports 2-D materials")
    out = _outdir(args)
    catalog = field_catalog(material, max(horizons))
    names = names or tuple(catalog)
    all_hold = True
    with TableWriter(out / "convergence.csv", CONVERGENCE_HEADER) as tw:
        for name in names:
            for eps in horizons:
                res = check_inequality(catalog[name], material, eps)
                all_hold &= res.holds
                tw.write((name, eps, res.pd, res.lefm, res.ratio, res.holds))
                print(f"{name:10s} eps={eps:<6g} pd={fmt(res.pd)} lefm={fmt(res.lefm)} "
                      f"ratio={res.ratio:.6f} {'holds' if res.holds else 'VIOLATED'}")
    return EXIT_OK if all_hold else EXIT_RUNTIME


# ---------------------------------------------------------------------------
# Entry point.
# ---------------------------------------------------------------------------

def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohesive-pd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress (-v) or debug detail (-vv) to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    common.add_argument("--threads", metavar="N", type=_positive_int,
                        help=f"worker threads (overrides ${THREADS_ENV})")
    common.add_argument("--stride", metavar="K", type=_positive_int,
                        help="output every K steps (overrides [dynamics] stride)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", parents=[common],
                       help="print the elastic and fracture constants of a bond law")
    p.add_argument("--mu", type=float, help="target shear modulus (fit mode)")
    p.add_argument("--gc", type=float, help="target fracture energy (fit mode)")
    p.add_argument("--dimension", type=int, choices=(2, 3), default=2)
    p.add_argument("--influence", choices=("constant", "conical"), default="constant")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", parents=[common], help="run the dynamics with diagnostics")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", parents=[common], help="process zone and nucleation scan of a snapshot")
    p.add_argument("--snapshot", metavar="PATH", help="snapshot CSV written by simulate")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", parents=[common], help="energy-inequality table on analytic fields")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:          # argparse reports usage errors with status 2
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        for message in exc.errors:
            print(f"config error: {message}", file=sys.stderr)
        return EXIT_CONFIG
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any module failure is a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
