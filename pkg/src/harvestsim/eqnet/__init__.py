"""Transient solver for electrical-equivalent harvester networks."""

from .mechanical import MASS, SOURCE, inertial_force, mechanical_to_network
from .netlist import (
    GROUND, Capacitor, CurrentSource, Diode, EndStop, Inductor, Netlist, OverlapProfile,
    PositionDependentCapacitor, PositionDependentTransduction, Resistor, SquareWaveProfile,
    TopologyError, Transformer, VoltageSource,
)
from .solver import (
    NonConvergence, SimulationResult, SingularMatrix, SolverError, TimeStepTooLarge,
    average_branch_power, check_step, state_energy, stored_energy, transient,
)
from .waveforms import Constant, PiecewiseLinear, Sine, StrokeForce, StrokeProfile, Waveform

__all__ = [
    "GROUND", "MASS", "SOURCE", "Capacitor", "Constant", "CurrentSource", "Diode", "EndStop",
    "Inductor", "Netlist", "NonConvergence", "OverlapProfile", "PiecewiseLinear",
    "PositionDependentCapacitor", "PositionDependentTransduction", "Resistor",
    "SimulationResult", "Sine", "SingularMatrix", "SolverError", "SquareWaveProfile",
    "StrokeForce", "StrokeProfile", "TimeStepTooLarge", "TopologyError", "Transformer",
    "VoltageSource", "Waveform", "average_branch_power", "check_step", "inertial_force",
    "mechanical_to_network", "state_energy", "stored_energy", "transient",
]
