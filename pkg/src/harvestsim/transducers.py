"""Electrostatic overlap-capacitor and alternating-coil electromagnetic transducers,
with their two-port network mappings.

Electrostatic and piezoelectric transducers map to a transformer with a
parallel capacitor on the electrical side ("fig2a"); electromagnetic ones map
to a coupling with a series coil inductance ("fig2b"). Under the
force<->voltage analogy the electromagnetic two-port (EMF proportional to
velocity, force proportional to current) is a gyrator, and is stamped as one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import brentq

from .eqnet import (
    Capacitor, Inductor, OverlapProfile, PositionDependentCapacitor,
    PositionDependentTransduction, Resistor, SquareWaveProfile, Transformer,
)
from .eqnet.profiles import EPS0
from .eqnet.profiles import overlap_capacitance as _overlap
from .eqnet.profiles import square_wave_flux, square_wave_transduction

Topology = Literal["fig2a", "fig2b"]


@dataclass(frozen=True)
class TransducerMapping:
    """Linear two-port: coupling ``ratio`` and the electrical-side reactance.

    fig2a: transformer (N/V) with ``shunt_value`` farads across the port.
    fig2b: coupling (V*s/m) with ``shunt_value`` henries in series, plus
    ``series_resistance`` ohms.
    """

    topology: Topology
    ratio: float
    shunt_value: float
    series_resistance: float = 0.0

    def __post_init__(self):
        if self.topology not in ("fig2a", "fig2b"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.shunt_value <= 0:
            raise ValueError("shunt_value must be > 0")

    def elements(self, name: str, mech: str, out_p: str, out_n: str = "0") -> list:
        """Network elements between mechanical node ``mech`` (to ground) and the
        electrical output pair."""
        if self.topology == "fig2a":
            # port 2 reversed so the polarity matches the nonlinear capacitor element
            return [Transformer(name, mech, "0", out_n, out_p, self.ratio),
                    Capacitor(f"{name}_shunt", out_p, out_n, self.shunt_value)]
        return _coil_elements(name, mech, out_p, out_n, self.ratio, None,
                              self.shunt_value, self.series_resistance)


def _coil_elements(name, mech, out_p, out_n, gamma, position, inductance, resistance):
    emf = f"{name}_emf"
    els = [PositionDependentTransduction(name, mech, "0", emf, out_n, gamma, position)]
    if resistance > 0:
        els.append(Inductor(f"{name}_coil_L", emf, f"{name}_coil", inductance))
        els.append(Resistor(f"{name}_coil_R", f"{name}_coil", out_p, resistance))
    else:
        els.append(Inductor(f"{name}_coil_L", emf, out_p, inductance))
    return els


# --- electrostatic -----------------------------------------------------------

@dataclass(frozen=True)
class OverlapCapacitorGeometry:
    """Electret-biased variable-overlap capacitor.

    The overlap is triangular in displacement: it peaks when the electrodes
    are aligned and vanishes beyond +-overlap_range/2 from there. At rest the
    electrodes sit ``rest_offset`` from alignment (default: middle of the
    rising flank, -overlap_range/4). Corners are rounded over ``smoothing``
    metres (default: one gap).
    """

    edge_length: float
    gap: float
    overlap_range: float
    stray_capacitance: float
    electret_bias: float = 0.0
    rest_offset: float | None = None
    smoothing: float | None = None

    def __post_init__(self):
        if self.gap <= 0 or self.edge_length <= 0 or self.overlap_range <= 0:
            raise ValueError("gap, edge_length and overlap_range must be > 0")
        if self.stray_capacitance <= 0:
            raise ValueError("stray_capacitance must be > 0")

    @property
    def slope(self) -> float:
        """dC/dz in the linear overlap region, eps0 * L_e / g (F/m)."""
        return EPS0 * self.edge_length / self.gap

    @property
    def profile(self) -> OverlapProfile:
        rest = -0.25 * self.overlap_range if self.rest_offset is None else self.rest_offset
        smooth = self.gap if self.smoothing is None else self.smoothing
        return OverlapProfile(self.slope, 0.5 * self.overlap_range, self.stray_capacitance,
                              smooth, rest)


def overlap_capacitance(geom: OverlapCapacitorGeometry, z):
    """C(z) and dC/dz at displacement ``z`` from rest (scalar or array)."""
    params = geom.profile.params()
    if np.ndim(z) == 0:
        c, dc, _ = _overlap(float(z), *params)
        return c, dc
    out = np.array([_overlap(float(zi), *params)[:2] for zi in np.ravel(z)])
    shape = np.shape(z)
    return out[:, 0].reshape(shape), out[:, 1].reshape(shape)


def edge_length_for_slope(dcdz: float, gap: float) -> float:
    """Effective edge length giving a linear-region dC/dz (calibration helper)."""
    return dcdz * gap / EPS0


def electrostatic_small_signal(geom: OverlapCapacitorGeometry, z0: float = 0.0) -> TransducerMapping:
    """Linearize about ``z0``: ratio V_e * dC/dz (N/V), shunt C(z0)."""
    c, dc = overlap_capacitance(geom, z0)
    return TransducerMapping("fig2a", geom.electret_bias * dc, c)


def electrostatic_nonlinear_element(geom: OverlapCapacitorGeometry, name: str, mech: str,
                                    out_p: str, out_n: str, position: str,
                                    v0: float = 0.0) -> PositionDependentCapacitor:
    """Position-dependent capacitor with the electret as a series bias."""
    return PositionDependentCapacitor(name, mech, "0", out_p, out_n, geom.profile,
                                      geom.electret_bias, position, v0)


def electrostatic_rest_position(geom: OverlapCapacitorGeometry, spring: float) -> float:
    """Static equilibrium k z = 1/2 V_e^2 dC/dz(z) with the port shorted."""
    if geom.electret_bias == 0:
        return 0.0
    force = lambda z: spring * z - 0.5 * geom.electret_bias**2 * overlap_capacitance(geom, z)[1]  # noqa: E731
    span = geom.overlap_range
    return brentq(force, -span, span, xtol=1e-15)


def electrostatic_power_balance(geom: OverlapCapacitorGeometry, z, zdot, u, udot):
    """Instantaneous power flows of the nonlinear capacitor element.

    Returns (mechanical power in, electrical power in at the port, power from
    the bias, rate of change of field energy). The first three sum to the fourth.
    """
    c, dc = overlap_capacitance(geom, z)
    vc = u + geom.electret_bias
    i = c * udot + dc * zdot * vc
    reaction = -0.5 * vc**2 * dc
    field_rate = 0.5 * dc * zdot * vc**2 + c * vc * udot
    return reaction * zdot, u * i, geom.electret_bias * i, field_rate


# --- electromagnetic ---------------------------------------------------------

@dataclass(frozen=True)
class CoilMagnetAssembly:
    """Linear generator: magnet rotor sliding in a tube wound with alternating sections.

    The rotor centre ``z`` is measured from the tube centre; it travels freely
    over +-(tube_length - section_length)/2. The coupling flips sign each time
    the rotor centre crosses a section midpoint (both poles then cross a
    winding reversal together). ``transition`` is the fraction of a section
    over which the flip ramps.
    """

    section_length: float
    number_of_sections: int
    transduction: float
    coil_resistance: float
    coil_inductance: float
    rotor_mass: float
    tube_length: float
    friction: float = 0.0
    transition: float = 0.05

    def __post_init__(self):
        if self.section_length <= 0 or self.number_of_sections < 1:
            raise ValueError("need section_length > 0 and at least one section")
        if self.tube_length <= self.section_length:
            raise ValueError("tube must be longer than the rotor")
        if self.coil_inductance <= 0 or self.coil_resistance < 0 or self.rotor_mass <= 0:
            raise ValueError("need coil_inductance > 0, coil_resistance >= 0, rotor_mass > 0")

    @property
    def travel(self) -> float:
        """Half of the free rotor travel (m)."""
        return 0.5 * (self.tube_length - self.section_length)

    @property
    def profile(self) -> SquareWaveProfile:
        origin = -0.5 * self.number_of_sections * self.section_length + 0.5 * self.section_length
        return SquareWaveProfile(self.transduction, self.section_length, self.transition,
                                 origin, -0.5 * self.tube_length, 0.5 * self.tube_length)


def estimate_transduction(flux_density: float, wire_length_per_section: float) -> float:
    """Rough coupling estimate B_eff * l (V*s/m) from the wire length in one section."""
    return flux_density * wire_length_per_section


def wire_resistance(length: float, diameter: float, resistivity: float = 1.68e-8) -> float:
    return resistivity * length / (math.pi * diameter**2 / 4)


def em_flux_linkage(coil: CoilMagnetAssembly, z):
    """Flux linkage lambda(z) (V*s) and coupling Gamma(z) = d lambda/dz (V*s/m)."""
    p = coil.profile.params()
    if np.ndim(z) == 0:
        return square_wave_flux(float(z), *p), square_wave_transduction(float(z), *p)[0]
    zs = np.ravel(z)
    lam = np.array([square_wave_flux(float(v), *p) for v in zs]).reshape(np.shape(z))
    gam = np.array([square_wave_transduction(float(v), *p)[0] for v in zs]).reshape(np.shape(z))
    return lam, gam


def em_to_network(coil: CoilMagnetAssembly, name: str, mech: str, out_p: str,
                  out_n: str, position: str, *, linear: bool = False):
    """Fig2b mapping and its elements: position-dependent coupling in series with
    the coil inductance and resistance. With ``linear`` the coupling is held
    at +Gamma0 (the in-section small-signal model)."""
    gamma = coil.transduction if linear else coil.profile
    mapping = TransducerMapping("fig2b", coil.transduction, coil.coil_inductance,
                                coil.coil_resistance)
    els = _coil_elements(name, mech, out_p, out_n, gamma, None if linear else position,
                         coil.coil_inductance, coil.coil_resistance)
    return mapping, els
