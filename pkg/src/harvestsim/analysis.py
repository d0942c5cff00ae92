"""Sweeps, optimum finding and reports over the analytic model and scenario runs."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import eqnet
from .eqnet import (
    Capacitor, CurrentSource, Diode, EndStop, Inductor, PositionDependentCapacitor,
    Resistor, SimulationResult, VoltageSource,
)
from .lumped import (
    HarmonicSource, MechanicalParams, average_power, displacement_limited_power,
    relative_displacement_amplitude, source_power_density,
)
from .scenarios import (
    LOAD, STORAGE, DoublerLoad, HarvesterScenario, charging_curve, load_power, rest_position, run,
)

RESONANT = "resonant"
DISPLACEMENT_LIMITED = "displacement_limited"


# --- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    value: float
    average_power: float
    peak_displacement: float
    stored_energy: float


@dataclass(frozen=True)
class SweepTable:
    path: str
    rows: tuple

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows])

    @property
    def average_power(self) -> np.ndarray:
        return np.array([r.average_power for r in self.rows])

    def header(self) -> list[str]:
        return [self.path, "average_power_w", "peak_displacement_m", "stored_energy_j"]

    def as_array(self) -> np.ndarray:
        return np.array([[r.value, r.average_power, r.peak_displacement, r.stored_energy]
                         for r in self.rows]).reshape(-1, 4)


def summarize_run(res: SimulationResult) -> SweepRow:
    """Window-averaged load power, peak displacement from rest and final stored energy."""
    sc: HarvesterScenario = res.metadata["scenario"]
    mask = res.window(res.metadata["t_average"])
    t = res.time[mask]
    p = load_power(res)[mask]
    avg = float(np.trapezoid(p, t) / (t[-1] - t[0])) if len(t) > 1 else float(p.mean())
    z = res.position(eqnet.MASS)[mask] - rest_position(sc)
    stored = float(charging_curve(res).energy[-1]) if isinstance(sc.load, DoublerLoad) else 0.0
    return SweepRow(float("nan"), avg, float(np.abs(z).max()), stored)


def sweep(template: HarvesterScenario, path: str, values, *, max_workers: int | None = None,
          **run_kw) -> SweepTable:
    """One independent run per value of the dotted parameter ``path``; rows keep input order."""
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    scenarios = [template.with_value(path, v) for v in values]  # resolves the path up front

    def one(item):
        value, sc = item
        return replace(summarize_run(run(sc, **run_kw)), value=float(value))

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        rows = tuple(pool.map(one, zip(values, scenarios)))
    return SweepTable(path, rows)


# --- generator damping optimum -----------------------------------------------

@dataclass(frozen=True)
class DampingOptimum:
    """Best generator damping under a stroke limit.

    ``power`` is the average power actually generated at ``generator_damping``;
    ``bound`` is the displacement-limited estimate m w |Y'|^2/2 * z_max/Y,
    reported in that regime only.
    """

    generator_damping: float
    power: float
    regime: str
    displacement: float
    bound: float | None = None


def _with_dg(p: MechanicalParams, dg: float) -> MechanicalParams:
    return replace(p, generator_damping=dg)


def _damping_grid(p: MechanicalParams, s: HarmonicSource) -> np.ndarray:
    # log d_g from far below to far above every damping scale of the problem;
    # the lower edge keeps the undamped-resonance guards out of reach
    w = s.angular_frequency
    scale = p.mass * w
    top = max(p.parasitic_damping, abs(p.spring - p.mass * w**2) / w, scale)
    return np.linspace(math.log(scale * 1e-6), math.log(top * 1e6), 100)


def unconstrained_optimum(p: MechanicalParams, s: HarmonicSource) -> tuple[float, float]:
    """Golden-section search over log d_g after a coarse log-grid bracket.

    When power keeps growing as d_g falls (undamped resonance) the lower grid
    edge is returned.
    """
    grid = _damping_grid(p, s)

    def neg(u):
        return -average_power(_with_dg(p, math.exp(u)), s)

    vals = [neg(u) for u in grid]
    i = int(np.argmin(vals))
    if i == 0:
        dg = math.exp(grid[0])
        return dg, average_power(_with_dg(p, dg), s)
    i = min(i, len(grid) - 2)
    res = minimize_scalar(neg, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
                          tol=1e-10)
    dg = math.exp(res.x)
    return dg, average_power(_with_dg(p, dg), s)


def optimal_generator_damping(p: MechanicalParams, s: HarmonicSource,
                              z_max: float) -> DampingOptimum:
    """Power-maximizing d_g subject to a relative displacement amplitude <= z_max."""
    if not z_max > 0:
        raise ValueError("z_max must be > 0")
    if s.displacement_amplitude == 0:
        return DampingOptimum(p.parasitic_damping, 0.0, RESONANT, 0.0)
    dg, power = unconstrained_optimum(p, s)
    disp = relative_displacement_amplitude(_with_dg(p, dg), s)
    if disp <= z_max:
        return DampingOptimum(dg, power, RESONANT, disp)

    # displacement falls monotonically with damping: pin it at z_max
    def excess(log_dg):
        return relative_displacement_amplitude(_with_dg(p, math.exp(log_dg)), s) - z_max

    hi = math.log(dg)
    while excess(hi) > 0:
        hi += 2.0
        # infinite damping freezes the relative motion, so a root always exists
        assert hi < 700, "no generator damping reaches z_max"
    lo = math.log(dg)
    dg_pin = math.exp(brentq(excess, lo, hi, xtol=1e-14, rtol=1e-15))
    q = _with_dg(p, dg_pin)
    return DampingOptimum(dg_pin, average_power(q, s), DISPLACEMENT_LIMITED,
                          relative_displacement_amplitude(q, s),
                          displacement_limited_power(p, s, z_max))


# --- Table 1 -----------------------------------------------------------------

@dataclass(frozen=True)
class Table1Row:
    category: str
    specification: str
    frequency_hz: float
    density: float  # W/kg

    @property
    def formatted(self) -> str:
        return format_si(self.density, "W/kg")


TABLE1_SOURCES = (
    ("Machine Vibration", "1 m/s^2", HarmonicSource.from_acceleration(1.0, frequency_hz=1000.0)),
    ("Machine Vibration", "10 m/s^2", HarmonicSource.from_acceleration(10.0, frequency_hz=200.0)),
    ("Machine Motion", "0.25 m", HarmonicSource.from_amplitude(0.25, frequency_hz=2.0)),
    ("Machine Motion", "0.5 m", HarmonicSource.from_amplitude(0.5, frequency_hz=5.0)),
)

_PREFIXES = ((1e3, "k"), (1.0, ""), (1e-3, "m"), (1e-6, "μ"), (1e-9, "n"))


def format_si(value: float, unit: str, digits: int = 3) -> str:
    """``value`` rounded to ``digits`` significant figures with an SI prefix."""
    value = float(f"{value:.{digits}g}")  # round first so 999.96 becomes 1.00 k
    if value == 0:
        return f"0 {unit}"
    for scale, prefix in _PREFIXES:
        if abs(value) >= scale:
            break
    return f"{float(f'{value / scale:.{digits}g}'):.{digits}g} {prefix}{unit}"


def table1_rows(sources=TABLE1_SOURCES) -> list[Table1Row]:
    return [Table1Row(cat, spec, s.frequency_hz, source_power_density(s))
            for cat, spec, s in sources]


def table1_report(sources=TABLE1_SOURCES) -> str:
    """Recomputed 1/2 w |Y'|^2 for every Table 1 row, as aligned text."""
    lines = [f"{'Type':<18} {'Amplitude':<10} {'Frequency':>10}  {'1/2 w |Y|^2':>12}"]
    for row in table1_rows(sources):
        lines.append(f"{row.category:<18} {row.specification:<10} "
                     f"{row.frequency_hz:>7g} Hz  {row.formatted:>12}")
    return "\n".join(lines)


# --- energy accounting -------------------------------------------------------

@dataclass
class EnergyReport:
    """Energy audit of a run (J unless noted).

    ``residual`` = input_work - dissipated - stored; it collects round-off, the
    node leakage conductances are reported as a dissipation term.
    """

    duration: float
    input_work: float
    dissipation: dict = field(default_factory=dict)
    stored: dict = field(default_factory=dict)
    load_energy: float = 0.0

    @property
    def total_dissipated(self) -> float:
        return sum(self.dissipation.values())

    @property
    def total_stored(self) -> float:
        return sum(self.stored.values())

    @property
    def residual(self) -> float:
        return self.input_work - self.total_dissipated - self.total_stored

    @property
    def relative_residual(self) -> float:
        scale = max(abs(self.input_work), self.total_dissipated + sum(map(abs, self.stored.values())))
        return abs(self.residual) / scale if scale > 0 else 0.0

    @property
    def average_load_power(self) -> float:
        return self.load_energy / self.duration if self.duration > 0 else 0.0

    def closes(self, rtol: float = 5e-3) -> bool:
        return self.relative_residual <= rtol

    def text(self) -> str:
        lines = [f"duration              {self.duration:.6g} s",
                 f"input work            {self.input_work:.6g} J"]
        lines += [f"  dissipated {k:<10} {v:.6g} J" for k, v in self.dissipation.items()]
        lines += [f"  stored     {k:<10} {v:.6g} J" for k, v in self.stored.items()]
        lines += [f"audit residual        {self.residual:.3g} J "
                  f"({100 * self.relative_residual:.3g} % of input)",
                  f"load energy           {self.load_energy:.6g} J",
                  f"average load power    {format_si(self.average_load_power, 'W', 4)}"]
        return "\n".join(lines)


def _add(d, key, value):
    d[key] = d.get(key, 0.0) + float(value)


def _delta(x):
    return float(x[-1] - x[0])


def energy_report(res: SimulationResult) -> EnergyReport:
    """Input work, dissipation by mechanism, change of stored energy, load energy."""
    sc = res.metadata.get("scenario")
    duration = res.t_end
    diss, stored = {}, {}
    work = 0.0
    load_names = set()
    if sc is not None:
        if isinstance(sc.load, DoublerLoad):
            load_names = set(STORAGE)
        elif sc.load.kind == "resistive":
            load_names = {LOAD}
    load_energy = 0.0
    for el in res.netlist.elements:
        if len(res.time) < 2:
            break
        absorbed = float(res.step_energy(el.name).sum())
        if el.name in load_names:
            load_energy += absorbed
        if isinstance(el, (VoltageSource, CurrentSource)):
            work -= absorbed
        elif isinstance(el, Resistor):
            key = "load" if el.name == LOAD else \
                "coil" if el.name.endswith("coil_R") else "mechanical" \
                if el.name in ("friction", "damper") else "resistors"
            _add(diss, key, absorbed)
        elif isinstance(el, Diode):
            _add(diss, "diodes", absorbed)
        elif isinstance(el, EndStop):
            z = res.position(el.position)
            pen = np.where(z > el.upper, z - el.upper, np.where(z < el.lower, z - el.lower, 0.0))
            penalty = 0.5 * el.stiffness * pen**2
            _add(stored, "contact", _delta(penalty))
            _add(diss, "impact", absorbed - _delta(penalty))
        elif isinstance(el, Capacitor):
            e = 0.5 * el.capacitance * res.element_voltage(el.name) ** 2
            key = "storage" if el.name in STORAGE else "spring" if el.name == "spring" \
                else "capacitors"
            _add(stored, key, _delta(e))
        elif isinstance(el, Inductor):
            e = 0.5 * el.inductance * res.current(el.name) ** 2
            _add(stored, "kinetic" if el.mechanical else "inductors", _delta(e))
        elif isinstance(el, PositionDependentCapacitor):
            # the electret bias supplies V_e * i at the electrical port
            i = res.current(el.name, 2)
            work += float(el.bias * res.dt * 0.5 * (i[1:] + i[:-1]).sum())
            vc = res.element_voltage(el.name, 2) + el.bias
            _add(stored, "field", _delta(0.5 * res.capacitance_trace(el.name) * vc**2))
    gmin = res.metadata.get("gmin", 0.0)
    if gmin and len(res.time) > 1:
        v = res.X[:, :len(res.compiled.node_index)]
        vbar2 = 0.25 * (v[1:] + v[:-1]) ** 2
        _add(diss, "leakage", gmin * res.dt * vbar2.sum())
    return EnergyReport(duration, work, diss, stored, load_energy)
