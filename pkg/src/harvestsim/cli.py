"""Command-line front end: ``harvestsim run|sweep|table1|analyze|validate``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, analysis, eqnet, lumped
from .eqnet import NonConvergence, SingularMatrix, TimeStepTooLarge, TopologyError
from .io import RunManifest, ScenarioFileError, export_csv, file_sha256, load_scenario, write_table
from .transducers import electrostatic_small_signal
from .scenarios import (
    Coil, LinearTransducer, OverlapCapacitor, ResistiveLoad, ScenarioError, SinusoidExcitation,
    SpringMass, build, rest_position, run, traces,
)

log = logging.getLogger("harvestsim")


class CliError(Exception):
    pass


def preset_path(name: str) -> Path:
    """Path of a shipped preset (``fig8`` or ``fig8.scenario``)."""
    name = name if name.endswith(".scenario") else f"{name}.scenario"
    path = resources.files("harvestsim") / "presets" / name
    if not path.is_file():
        raise CliError(f"no preset named {name}")
    return Path(str(path))


def _resolve(arg: str) -> Path:
    path = Path(arg)
    if path.exists():
        return path
    if path.parent == Path(".") and path.suffix in ("", ".scenario"):
        return preset_path(path.name)
    raise CliError(f"scenario file not found: {arg}")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solver_settings(sc, args) -> dict:
    return {"dt_s": args.dt if args.dt is not None else sc.solver.dt_s,
            "duration_s": args.duration if args.duration is not None else sc.solver.duration_s}


def cmd_run(args) -> int:
    path = _resolve(args.scenario)
    sf = load_scenario(path)
    sc = sf.scenario
    settings = _solver_settings(sc, args)
    eqnet.check_step(build(sc), settings["dt_s"])  # reject before solving
    t0 = time.perf_counter()
    res = run(sc, dt=settings["dt_s"], duration=settings["duration_s"])
    wall = time.perf_counter() - t0
    named = traces(res)
    columns = list(named) if sf.outputs is None else list(sf.outputs)
    out = _out_dir(args)
    export_csv(res.time, named, out / "traces.csv", columns)
    report = analysis.energy_report(res)
    row = analysis.summarize_run(res)
    summary = "\n".join([
        f"scenario              {sc.name}",
        f"samples               {len(res.time)} (dt {res.dt:.6g} s)",
        f"window average power  {analysis.format_si(row.average_power, 'W', 4)} "
        f"(from t = {res.metadata['t_average']:.6g} s)",
        f"peak displacement     {row.peak_displacement:.6g} m",
        f"stored energy         {row.stored_energy:.6g} J",
        f"max Kirchhoff resid.  {res.kcl_residual.max():.3g}",
        report.text(),
    ]) + "\n"
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    RunManifest(str(path), file_sha256(path), {**settings, "scheme": "trapezoidal"},
                wall_time_s=wall, outputs=["traces.csv", "summary.txt", "manifest.json"],
                seed=args.seed).write(out / "manifest.json")
    print(summary, end="")
    return 0


def _sweep_values(args) -> list[float]:
    if args.values:
        return [float(v) for v in args.values.split(",") if v.strip()]
    start, stop, n = args.range
    n = int(n)
    if args.log:
        return list(np.geomspace(float(start), float(stop), n))
    return list(np.linspace(float(start), float(stop), n))


def cmd_sweep(args) -> int:
    path = _resolve(args.scenario)
    sc = load_scenario(path).scenario
    settings = _solver_settings(sc, args)
    values = _sweep_values(args)
    if not values:
        raise CliError("no sweep values given")
    try:
        sc.get_value(args.param)
    except ScenarioError as exc:
        raise CliError(str(exc)) from None
    t0 = time.perf_counter()
    table = analysis.sweep(sc, args.param, values, max_workers=args.jobs,
                           dt=settings["dt_s"], duration=settings["duration_s"])
    wall = time.perf_counter() - t0
    out = _out_dir(args)
    write_table(out / "sweep.csv", table.header(), table.as_array())
    RunManifest(str(path), file_sha256(path), {**settings, "sweep": args.param},
                wall_time_s=wall, outputs=["sweep.csv", "manifest.json"],
                seed=args.seed).write(out / "manifest.json")
    for r in table.rows:
        print(f"{r.value:<14.6g} {analysis.format_si(r.average_power, 'W', 4):>12} "
              f"{r.peak_displacement:12.4g} m {r.stored_energy:12.4g} J")
    return 0


def cmd_table1(args) -> int:
    print(analysis.table1_report())
    return 0


def _generator_damping(sc, omega: float) -> float:
    """Real part of the mechanical impedance the transducer and resistive load present."""
    tr, load = sc.transducer, sc.load
    if not isinstance(load, ResistiveLoad):
        raise CliError("analyze needs a resistive load")
    r = load.resistance_ohm
    if isinstance(tr, LinearTransducer) and tr.topology == "fig2b":
        z = complex(tr.series_resistance_ohm + r, omega * tr.series_inductance_h)
        return (tr.ratio**2 / z).real
    if isinstance(tr, Coil) and tr.model == "linear":
        z = complex(tr.coil_resistance_ohm + r, omega * tr.coil_inductance_h)
        return (tr.transduction_vs_per_m**2 / z).real
    if isinstance(tr, OverlapCapacitor):
        mapping = electrostatic_small_signal(tr.geometry, rest_position(sc))
        return (mapping.ratio**2 / complex(1.0 / r, omega * mapping.shunt_value)).real
    if isinstance(tr, LinearTransducer):
        return (tr.ratio**2 / complex(1.0 / r, omega * tr.shunt_capacitance_f)).real
    raise CliError("analyze needs a linear transducer model")


def cmd_analyze(args) -> int:
    sc = load_scenario(_resolve(args.scenario)).scenario
    if not isinstance(sc.mechanical, SpringMass) or not isinstance(sc.excitation,
                                                                   SinusoidExcitation):
        raise CliError("analyze needs a spring-mass device under sinusoidal excitation")
    s = sc.excitation.source
    p0 = sc.mechanical.params
    dg = _generator_damping(sc, s.angular_frequency)
    p = lumped.MechanicalParams(p0.mass, p0.spring, p0.parasitic_damping, dg)
    n = lumped.normalize(p, s)
    mode = "paper literal" if args.paper_literal else "canonical"
    lines = [
        f"natural frequency     {lumped.natural_frequency(p) / (2 * math.pi):.6g} Hz",
        f"frequency ratio x     {n.frequency_ratio:.6g}",
        f"parasitic ratio       {n.parasitic_ratio:.6g}",
        f"generator ratio       {n.generator_ratio:.6g} (d_g = {dg:.6g} N*s/m)",
        f"reference power       {analysis.format_si(lumped.reference_power(p, s), 'W', 4)}",
        f"dimensionless power   {lumped.dimensionless_power(n, paper_literal=args.paper_literal):.6g}"
        f" ({mode})",
        f"average power         "
        f"{analysis.format_si(lumped.average_power(p, s, paper_literal=args.paper_literal), 'W', 4)}"
        f" ({mode})",
        f"relative displacement {lumped.relative_displacement_amplitude(p, s):.6g} m",
    ]
    if args.z_max is not None:
        opt = analysis.optimal_generator_damping(p0, s, args.z_max)
        lines += [f"optimal d_g           {opt.generator_damping:.6g} N*s/m ({opt.regime})",
                  f"optimal power         {analysis.format_si(opt.power, 'W', 4)}"]
        if opt.bound is not None:
            lines.append(f"displacement bound    {analysis.format_si(opt.bound, 'W', 4)}")
    print("\n".join(lines))
    return 0


def cmd_validate(args) -> int:
    for arg in args.scenarios:
        path = _resolve(arg)
        sc = load_scenario(path).scenario
        build(sc)
        print(f"{path}: ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harvestsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("scenario", help="scenario file, or the name of a shipped preset")
        if out:
            p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--dt", type=float, help="override the time step (s)")
        p.add_argument("--duration", type=float, help="override the run duration (s)")
        p.add_argument("--seed", type=int, help="reserved; recorded in the manifest")

    p = sub.add_parser("run", help="simulate a scenario and write traces, summary, manifest")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a scenario over values of one parameter")
    common(p)
    p.add_argument("--param", required=True, help="dotted path, e.g. load.resistance_ohm")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--values", help="comma-separated values")
    group.add_argument("--range", nargs=3, metavar=("START", "STOP", "N"))
    p.add_argument("--log", action="store_true", help="geometric spacing for --range")
    p.add_argument("--jobs", type=int, help="concurrent runs (default: executor default)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("table1", help="print the source power density table")
    p.add_argument("--paper-literal", action="store_true", help="accepted for symmetry; "
                   "the table does not depend on the power formula")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("analyze", help="closed-form power analysis of a linear scenario")
    p.add_argument("scenario")
    p.add_argument("--z-max", type=float, help="stroke limit (m) for the damping optimum")
    p.add_argument("--paper-literal", action="store_true",
                   help="evaluate the power formulas exactly as printed")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("validate", help="check scenario files without running them")
    p.add_argument("scenarios", nargs="+")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioFileError as exc:
        print(f"error: {exc.source}: invalid scenario: {'; '.join(exc.problems)}",
              file=sys.stderr)
    except TimeStepTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
    except NonConvergence as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
    except (SingularMatrix, TopologyError, ScenarioError, CliError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
