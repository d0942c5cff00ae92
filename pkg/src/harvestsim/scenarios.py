"""Complete harvester scenarios: mechanics + transducer + load under an excitation.

A :class:`HarvesterScenario` is a strict, immutable description (the same
schema the scenario files use; every physical key carries its unit).
:func:`build` turns it into a netlist, :func:`run` simulates it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, model_validator

from . import eqnet
from .eqnet import (
    Capacitor, Diode, EndStop, Netlist, Resistor, SimulationResult, Sine, StrokeForce,
    StrokeProfile, VoltageSource, mechanical_to_network,
)
from .lumped import HarmonicSource, MechanicalParams
from .transducers import (
    CoilMagnetAssembly, OverlapCapacitorGeometry, TransducerMapping, electrostatic_nonlinear_element,
    electrostatic_rest_position, electrostatic_small_signal, em_to_network,
)

# element and node names used by build()
MECH_NODE = "mech"
OUT_NODE = "out"
TRANSDUCER = "transducer"
LOAD = "load"
END_STOP = "end_stop"
STORAGE = ("C1", "C2")


class ScenarioError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class EndStopSpec(_Strict):
    """Penalty contact. ``gap_m`` is only used for spring-mass devices (symmetric
    clearance around rest); rotors stop at the tube ends."""

    stiffness_n_per_m: PositiveFloat = 1e6
    restitution: float = Field(0.5, gt=0, le=1)
    damping_ns_per_m: NonNegativeFloat | None = None
    damping_depth_m: PositiveFloat = 1e-5
    gap_m: PositiveFloat | None = None

    def damping(self, mass: float) -> float:
        if self.damping_ns_per_m is not None:
            return self.damping_ns_per_m
        return contact_damping(self.stiffness_n_per_m, mass, self.restitution)


class SpringMass(_Strict):
    kind: Literal["spring_mass"] = "spring_mass"
    mass_kg: PositiveFloat
    stiffness_n_per_m: PositiveFloat
    parasitic_damping_ns_per_m: NonNegativeFloat = 0.0
    end_stop: EndStopSpec | None = None

    @property
    def params(self) -> MechanicalParams:
        return MechanicalParams(self.mass_kg, self.stiffness_n_per_m,
                                self.parasitic_damping_ns_per_m)


class Rotor(_Strict):
    """Springless magnet rotor in a tube, stopped at both tube ends."""

    kind: Literal["rotor"] = "rotor"
    mass_kg: PositiveFloat
    tube_length_m: PositiveFloat
    friction_ns_per_m: NonNegativeFloat = 0.0
    end_stop: EndStopSpec | None = None

    @property
    def params(self) -> MechanicalParams:
        return MechanicalParams(self.mass_kg, 0.0, self.friction_ns_per_m)


class OverlapCapacitor(_Strict):
    kind: Literal["overlap_capacitor"] = "overlap_capacitor"
    edge_length_mm: PositiveFloat
    gap_um: PositiveFloat
    overlap_range_um: PositiveFloat
    stray_capacitance_pf: PositiveFloat
    electret_bias_v: float = 0.0
    rest_offset_um: float | None = None
    model: Literal["nonlinear", "small_signal"] = "nonlinear"
    note: str = ""

    @property
    def geometry(self) -> OverlapCapacitorGeometry:
        return OverlapCapacitorGeometry(
            edge_length=self.edge_length_mm * 1e-3, gap=self.gap_um * 1e-6,
            overlap_range=self.overlap_range_um * 1e-6,
            stray_capacitance=self.stray_capacitance_pf * 1e-12,
            electret_bias=self.electret_bias_v,
            rest_offset=None if self.rest_offset_um is None else self.rest_offset_um * 1e-6)


class Coil(_Strict):
    kind: Literal["coil"] = "coil"
    section_length_mm: PositiveFloat
    number_of_sections: int = Field(gt=0)
    transduction_vs_per_m: float
    coil_resistance_ohm: NonNegativeFloat
    coil_inductance_h: PositiveFloat
    transition_fraction: float = Field(0.05, ge=0, lt=1)
    model: Literal["nonlinear", "linear"] = "nonlinear"
    note: str = ""


class LinearTransducer(_Strict):
    """User-parameterized Fig. 2a (transformer + shunt C, e.g. piezo) or
    Fig. 2b (coupling + series L) two-port."""

    kind: Literal["linear"] = "linear"
    topology: Literal["fig2a", "fig2b"]
    ratio: float
    shunt_capacitance_f: PositiveFloat | None = None
    series_inductance_h: PositiveFloat | None = None
    series_resistance_ohm: NonNegativeFloat = 0.0

    @model_validator(mode="after")
    def _reactance(self):
        need = "shunt_capacitance_f" if self.topology == "fig2a" else "series_inductance_h"
        if getattr(self, need) is None:
            raise ValueError(f"{self.topology} needs {need}")
        return self

    @property
    def mapping(self) -> TransducerMapping:
        if self.topology == "fig2a":
            return TransducerMapping("fig2a", self.ratio, self.shunt_capacitance_f)
        return TransducerMapping("fig2b", self.ratio, self.series_inductance_h,
                                 self.series_resistance_ohm)


class SinusoidExcitation(_Strict):
    """Base motion y = Y sin(2 pi f t), given by exactly one amplitude kind."""

    kind: Literal["sinusoid"] = "sinusoid"
    frequency_hz: PositiveFloat
    amplitude_m: NonNegativeFloat | None = None
    velocity_m_per_s: NonNegativeFloat | None = None
    acceleration_m_per_s2: NonNegativeFloat | None = None

    @model_validator(mode="after")
    def _one_amplitude(self):
        given = [v for v in (self.amplitude_m, self.velocity_m_per_s,
                              self.acceleration_m_per_s2) if v is not None]
        if len(given) != 1:
            raise ValueError("give exactly one of amplitude_m, velocity_m_per_s, "
                             "acceleration_m_per_s2")
        return self

    @property
    def source(self) -> HarmonicSource:
        f = self.frequency_hz
        if self.amplitude_m is not None:
            return HarmonicSource.from_amplitude(self.amplitude_m, frequency_hz=f)
        if self.velocity_m_per_s is not None:
            return HarmonicSource.from_velocity(self.velocity_m_per_s, frequency_hz=f)
        return HarmonicSource.from_acceleration(self.acceleration_m_per_s2, frequency_hz=f)


class StrokeExcitation(_Strict):
    """Periodic point-to-point stroke (peak-to-peak ``stroke_m``) with a
    trapezoidal velocity profile."""

    kind: Literal["stroke"] = "stroke"
    stroke_m: PositiveFloat
    frequency_hz: PositiveFloat
    dwell_fraction: float = Field(0.1, ge=0, lt=1)
    ramp_fraction: float = Field(0.25, gt=0, le=0.5)

    @property
    def profile(self) -> StrokeProfile:
        return StrokeProfile(self.stroke_m, self.frequency_hz, self.dwell_fraction,
                             self.ramp_fraction)


class ResistiveLoad(_Strict):
    kind: Literal["resistive"] = "resistive"
    resistance_ohm: PositiveFloat


class DoublerLoad(_Strict):
    """Two diodes charging two series storage capacitors (midpoint on the
    coil return); the measured voltage spans both capacitors."""

    kind: Literal["voltage_doubler"] = "voltage_doubler"
    capacitance_f: PositiveFloat
    forward_drop_v: NonNegativeFloat = 0.6
    on_conductance_s: PositiveFloat = 10.0
    off_conductance_s: PositiveFloat = 1e-9

    @model_validator(mode="after")
    def _diode(self):
        if not self.on_conductance_s > self.off_conductance_s:
            raise ValueError("on_conductance_s must exceed off_conductance_s")
        return self


class OpenLoad(_Strict):
    kind: Literal["open"] = "open"


class ShortLoad(_Strict):
    kind: Literal["short"] = "short"


class SolverSettings(_Strict):
    dt_s: PositiveFloat
    duration_s: NonNegativeFloat
    average_from_s: NonNegativeFloat | None = None

    @property
    def t_average(self) -> float:
        return 0.5 * self.duration_s if self.average_from_s is None else self.average_from_s


Mechanical = Annotated[Union[SpringMass, Rotor], Field(discriminator="kind")]
Transducer = Annotated[Union[OverlapCapacitor, Coil, LinearTransducer], Field(discriminator="kind")]
Excitation = Annotated[Union[SinusoidExcitation, StrokeExcitation], Field(discriminator="kind")]
Load = Annotated[Union[ResistiveLoad, DoublerLoad, OpenLoad, ShortLoad], Field(discriminator="kind")]


class HarvesterScenario(_Strict):
    name: str
    description: str = ""
    mechanical: Mechanical
    transducer: Transducer
    excitation: Excitation
    load: Load
    solver: SolverSettings

    @model_validator(mode="after")
    def _consistent(self):
        mech, tr = self.mechanical, self.transducer
        if isinstance(mech, Rotor) and mech.end_stop is None:
            raise ValueError("springless (rotor) scenarios must have end stops")
        if isinstance(mech, SpringMass) and mech.end_stop is not None \
                and mech.end_stop.gap_m is None:
            raise ValueError("spring-mass end stop needs gap_m")
        if isinstance(tr, Coil) and tr.model == "nonlinear" and not isinstance(mech, Rotor):
            raise ValueError("the position-dependent coil model needs a rotor (tube length)")
        stop = mech.end_stop
        if isinstance(mech, SpringMass) and stop is not None \
                and stop.stiffness_n_per_m < 1e3 * mech.stiffness_n_per_m:
            raise ValueError("end-stop stiffness must be at least 1e3 x the suspension spring")
        if isinstance(tr, OverlapCapacitor) and isinstance(mech, Rotor):
            raise ValueError("the overlap capacitor needs a suspended (spring-mass) device")
        return self

    def with_value(self, path: str, value) -> "HarvesterScenario":
        """Copy with the dotted ``path`` (e.g. ``load.resistance_ohm``) replaced."""
        data = self.model_dump()
        node = data
        keys = path.split(".")
        for key in keys[:-1]:
            if not isinstance(node, dict) or key not in node:
                raise ScenarioError(f"cannot resolve {path!r} at {key!r}")
            node = node[key]
        if not isinstance(node, dict) or keys[-1] not in node:
            raise ScenarioError(f"cannot resolve {path!r} at {keys[-1]!r}")
        node[keys[-1]] = value
        return HarvesterScenario.model_validate(data)

    def get_value(self, path: str):
        node = self
        for key in path.split("."):
            if not hasattr(node, key):
                raise ScenarioError(f"cannot resolve {path!r} at {key!r}")
            node = getattr(node, key)
        return node


def contact_damping(stiffness: float, mass: float, restitution: float) -> float:
    """Dashpot giving coefficient of restitution ``restitution`` for a linear
    spring-dashpot contact against ``mass``."""
    if restitution >= 1:
        return 0.0
    ln_e = math.log(restitution)
    zeta = -ln_e / math.sqrt(math.pi**2 + ln_e**2)
    return 2.0 * zeta * math.sqrt(stiffness * mass)


def coil_assembly(sc: HarvesterScenario) -> CoilMagnetAssembly:
    tr, mech = sc.transducer, sc.mechanical
    if not isinstance(tr, Coil):
        raise ScenarioError("scenario has no coil transducer")
    tube = mech.tube_length_m if isinstance(mech, Rotor) else \
        (tr.number_of_sections + 1) * tr.section_length_mm * 1e-3
    return CoilMagnetAssembly(
        section_length=tr.section_length_mm * 1e-3, number_of_sections=tr.number_of_sections,
        transduction=tr.transduction_vs_per_m, coil_resistance=tr.coil_resistance_ohm,
        coil_inductance=tr.coil_inductance_h, rotor_mass=mech.mass_kg, tube_length=tube,
        friction=mech.params.parasitic_damping, transition=tr.transition_fraction)


def _excitation_force(sc: HarvesterScenario, mass: float):
    exc = sc.excitation
    if isinstance(exc, SinusoidExcitation):
        src = exc.source
        return Sine(mass * src.acceleration_amplitude, src.frequency_hz)
    return StrokeForce(exc.stroke_m, exc.frequency_hz, mass, exc.dwell_fraction,
                       exc.ramp_fraction)


def rest_position(sc: HarvesterScenario) -> float:
    """Static mass position under the electret force (zero for other devices).

    Both capacitor models operate about this point; the small-signal one is
    linearized there.
    """
    tr, mech = sc.transducer, sc.mechanical
    if isinstance(tr, OverlapCapacitor):
        return electrostatic_rest_position(tr.geometry, mech.stiffness_n_per_m)
    return 0.0


def build(sc: HarvesterScenario) -> Netlist:
    """Assemble source -> mechanical one-port -> end stop -> transducer -> load."""
    mech = sc.mechanical
    p = mech.params
    has_stop = mech.end_stop is not None
    net = mechanical_to_network(p, _excitation_force(sc, p.mass),
                                terminal="m_stop" if has_stop else MECH_NODE)
    z0 = rest_position(sc)
    if z0:
        _replace(net, eqnet.MASS, z0=z0)
        if sc.transducer.model == "nonlinear":
            # start in static equilibrium: the spring already carries the electret force
            _replace(net, "spring", v0=p.spring * z0)
    if isinstance(mech, Rotor) and "damper" in net:
        # tube friction stands in for the parasitic damper
        _replace(net, "damper", name="friction")
    if has_stop:
        stop = mech.end_stop
        if isinstance(mech, Rotor):
            half = 0.5 * (mech.tube_length_m - _rotor_length(sc))
            lower, upper = -half, half
        else:
            lower, upper = z0 - stop.gap_m, z0 + stop.gap_m
        net.add(EndStop(END_STOP, "m_stop", MECH_NODE, eqnet.MASS, lower, upper,
                        stop.stiffness_n_per_m, stop.damping(p.mass), stop.damping_depth_m))

    tr = sc.transducer
    out_n = "0"
    if isinstance(tr, OverlapCapacitor):
        geom = tr.geometry
        if tr.model == "nonlinear":
            net.add(electrostatic_nonlinear_element(geom, TRANSDUCER, MECH_NODE, OUT_NODE,
                                                    out_n, eqnet.MASS))
        else:
            net.extend(electrostatic_small_signal(geom, z0).elements(TRANSDUCER, MECH_NODE,
                                                                     OUT_NODE, out_n))
    elif isinstance(tr, Coil):
        _, els = em_to_network(coil_assembly(sc), TRANSDUCER, MECH_NODE, OUT_NODE, out_n,
                               eqnet.MASS, linear=tr.model == "linear")
        net.extend(els)
    else:
        net.extend(tr.mapping.elements(TRANSDUCER, MECH_NODE, OUT_NODE, out_n))

    load = sc.load
    if isinstance(load, ResistiveLoad):
        net.add(Resistor(LOAD, OUT_NODE, out_n, load.resistance_ohm))
    elif isinstance(load, ShortLoad):
        net.add(VoltageSource(LOAD, OUT_NODE, out_n, eqnet.Constant(0.0)))
    elif isinstance(load, DoublerLoad):
        diode = dict(forward_drop=load.forward_drop_v, on_conductance=load.on_conductance_s,
                     off_conductance=load.off_conductance_s)
        net.add(Diode("D1", OUT_NODE, "top", **diode))
        net.add(Diode("D2", "bottom", OUT_NODE, **diode))
        net.add(Capacitor(STORAGE[0], "top", out_n, load.capacitance_f))
        net.add(Capacitor(STORAGE[1], out_n, "bottom", load.capacitance_f))
    net.validate()
    return net


def _replace(net: Netlist, element: str, **changes):
    i = [e.name for e in net.elements].index(element)
    net.elements[i] = replace(net.elements[i], **changes)


def _rotor_length(sc: HarvesterScenario) -> float:
    tr = sc.transducer
    if isinstance(tr, Coil):
        return tr.section_length_mm * 1e-3
    return 0.0


def run(sc: HarvesterScenario, *, dt: float | None = None, duration: float | None = None,
        **solver_kw) -> SimulationResult:
    """Simulate the scenario; the scenario is attached as ``res.metadata['scenario']``."""
    net = build(sc)
    dt = sc.solver.dt_s if dt is None else dt
    duration = sc.solver.duration_s if duration is None else duration
    res = eqnet.transient(net, duration, dt, **solver_kw)
    res.metadata.update(scenario=sc, t_average=min(sc.solver.t_average, res.t_end))
    return res


# --- derived traces ----------------------------------------------------------

def load_power(res: SimulationResult) -> np.ndarray:
    """Power delivered to the load: the load resistor, or the storage capacitors
    of a doubler; zero for open and short circuits."""
    sc = res.metadata["scenario"]
    if isinstance(sc.load, ResistiveLoad):
        return res.power(LOAD)
    if isinstance(sc.load, DoublerLoad):
        return res.power(STORAGE[0]) + res.power(STORAGE[1])
    return np.zeros_like(res.time)


def traces(res: SimulationResult) -> dict[str, np.ndarray]:
    """Named physical traces of a scenario run (units in the names)."""
    sc = res.metadata["scenario"]
    out = {
        "position_m": res.position(eqnet.MASS),
        "velocity_m_per_s": res.current(eqnet.MASS),
        "inertial_force_n": res.element_voltage(eqnet.SOURCE),
        "reaction_force_n": res.voltage(MECH_NODE),
        "load_voltage_v": res.voltage(OUT_NODE),
        "load_power_w": load_power(res),
    }
    if isinstance(sc.transducer, (Coil, LinearTransducer)) and \
            (isinstance(sc.transducer, Coil) or sc.transducer.topology == "fig2b"):
        out["emf_v"] = res.element_voltage(TRANSDUCER, 2)
    if isinstance(sc.load, ResistiveLoad):
        out["load_current_a"] = res.current(LOAD)
    if isinstance(sc.load, DoublerLoad):
        curve = charging_curve(res)
        out["c1_voltage_v"] = res.element_voltage(STORAGE[0])
        out["c2_voltage_v"] = res.element_voltage(STORAGE[1])
        out["doubler_voltage_v"] = curve.voltage
        out["stored_energy_j"] = curve.energy
    return out


@dataclass(frozen=True)
class ChargingCurve:
    time: np.ndarray
    energy: np.ndarray
    voltage: np.ndarray

    def at(self, t: float) -> tuple[float, float]:
        return float(np.interp(t, self.time, self.energy)), float(np.interp(t, self.time, self.voltage))


def charging_curve(res: SimulationResult) -> ChargingCurve:
    """Stored energy 1/2 sum C v^2 and the voltage across both storage capacitors."""
    sc = res.metadata.get("scenario")
    if sc is None or not isinstance(sc.load, DoublerLoad):
        raise ScenarioError("charging curve needs a voltage-doubler load")
    c = sc.load.capacitance_f
    v1 = res.element_voltage(STORAGE[0])
    v2 = res.element_voltage(STORAGE[1])
    return ChargingCurve(res.time, 0.5 * c * (v1**2 + v2**2), v1 + v2)
