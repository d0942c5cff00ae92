"""Translation of the lumped mass-spring-damper into its electrical equivalent."""

from __future__ import annotations

import math
from dataclasses import replace

from ..lumped import HarmonicSource, MechanicalParams
from .netlist import Capacitor, Inductor, Netlist, Resistor, VoltageSource
from .waveforms import Sine, Waveform

MASS = "mass"
SOURCE = "inertial_force"


def inertial_force(p: MechanicalParams, s: HarmonicSource) -> Sine:
    """-m * y''(t) for base motion y = Y sin(w t)."""
    return Sine(p.mass * s.acceleration_amplitude, s.frequency_hz)


def mechanical_to_network(p: MechanicalParams, excitation: HarmonicSource | Waveform | None,
                          terminal: str = "mech", prefix: str = "") -> Netlist:
    """Series one-port: inertial force source, L = m, C = 1/k, R = d.

    The chain runs from ground to ``terminal``; whatever is attached between
    ``terminal`` and ground (a transducer port, an end stop) closes the loop,
    and ``terminal="0"`` closes it directly. ``excitation`` is either a
    harmonic base motion or a force waveform applied as-is. The generator
    damping d_g is not emitted; the transducer and load realize it. The mass
    inductor is flagged mechanical, so its position is tracked.
    """
    net = Netlist()
    node = f"{prefix}src"
    if excitation is None:
        node = "0"
    else:
        wave = excitation if isinstance(excitation, Waveform) else inertial_force(p, excitation)
        net.add(VoltageSource(f"{prefix}{SOURCE}", node, "0", wave))

    chain = [Inductor(f"{prefix}{MASS}", node, "", p.mass, mechanical=True)]
    if p.spring > 0:
        chain.append(Capacitor(f"{prefix}spring", "", "", 1.0 / p.spring))
        net.declare_frequency(math.sqrt(p.spring / p.mass) / (2 * math.pi))
    if p.parasitic_damping > 0:
        chain.append(Resistor(f"{prefix}damper", "", "", p.parasitic_damping))

    for i, el in enumerate(chain):
        a = node if i == 0 else f"{prefix}m{i}"
        b = terminal if i == len(chain) - 1 else f"{prefix}m{i + 1}"
        net.add(replace(el, a=a, b=b))
    return net
