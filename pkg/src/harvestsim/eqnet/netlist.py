"""Netlist and element definitions for the electrical-equivalent network.

Mechanical branches follow the force <-> voltage, velocity <-> current
analogy: a proof mass is an inductor (L = m), a spring a capacitor
(C = 1/k), a damper a resistor (R = d). An inductor flagged ``mechanical``
also carries a position state (the integral of its current) which the
position-dependent elements read.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, fields

from .waveforms import Waveform, waveform_from_dict

GROUND = "0"
_GROUND_ALIASES = {"0", "gnd", "GND"}


class TopologyError(ValueError):
    """The netlist is malformed: bad parameters, duplicate names or floating nodes."""


def is_ground(node: str) -> bool:
    return node in _GROUND_ALIASES


@dataclass(frozen=True)
class Resistor:
    name: str
    a: str
    b: str
    resistance: float
    kind = "resistor"

    def check(self):
        _positive(self, "resistance")


@dataclass(frozen=True)
class Capacitor:
    name: str
    a: str
    b: str
    capacitance: float
    v0: float = 0.0
    kind = "capacitor"

    def check(self):
        _positive(self, "capacitance")


@dataclass(frozen=True)
class Inductor:
    """Inductor; with ``mechanical=True`` it is a proof mass and its current is
    integrated into a position trace starting at ``z0``."""

    name: str
    a: str
    b: str
    inductance: float
    i0: float = 0.0
    mechanical: bool = False
    z0: float = 0.0
    kind = "inductor"

    def check(self):
        _positive(self, "inductance")


@dataclass(frozen=True)
class VoltageSource:
    name: str
    a: str
    b: str
    waveform: Waveform
    kind = "vsource"

    def check(self):
        pass


@dataclass(frozen=True)
class CurrentSource:
    """Drives ``waveform`` amperes from ``a`` through the source to ``b``."""

    name: str
    a: str
    b: str
    waveform: Waveform
    kind = "isource"

    def check(self):
        pass


@dataclass(frozen=True)
class Transformer:
    """Ideal transformer: v1 = ratio * v2, i2 = -ratio * i1 (currents into the + terminals)."""

    name: str
    p1: str
    n1: str
    p2: str
    n2: str
    ratio: float
    kind = "transformer"

    def check(self):
        if self.ratio == 0:
            raise TopologyError(f"{self.name}: transformer ratio must be nonzero")


@dataclass(frozen=True)
class Diode:
    """Piecewise-linear diode: g_off below the forward drop, g_on above it."""

    name: str
    anode: str
    cathode: str
    forward_drop: float = 0.6
    on_conductance: float = 10.0
    off_conductance: float = 1e-9
    kind = "diode"

    def check(self):
        if not self.on_conductance > self.off_conductance > 0:
            raise TopologyError(f"{self.name}: need on_conductance > off_conductance > 0")
        if self.forward_drop < 0:
            raise TopologyError(f"{self.name}: forward_drop must be >= 0")


@dataclass(frozen=True)
class SquareWaveProfile:
    """Alternating coupling: +-gamma0 flipping every ``section`` metres."""

    gamma0: float
    section: float
    transition: float = 0.05
    origin: float = 0.0
    z_lo: float = float("-inf")
    z_hi: float = float("inf")

    def params(self):
        return (self.gamma0, self.section, self.transition, self.origin, self.z_lo, self.z_hi)


@dataclass(frozen=True)
class PositionDependentTransduction:
    """Gyrator coupling a mechanical port (p1, n1) to an electrical port (p2, n2).

    v2 = gamma(z) * i1 (EMF from velocity) and v1 = -gamma(z) * i2 (reaction
    force from coil current). ``gamma`` is a constant or a
    :class:`SquareWaveProfile` evaluated at the position of ``position``.
    """

    name: str
    p1: str
    n1: str
    p2: str
    n2: str
    gamma: float | SquareWaveProfile
    position: str | None = None
    kind = "transduction"

    def check(self):
        if isinstance(self.gamma, SquareWaveProfile):
            if self.position is None:
                raise TopologyError(f"{self.name}: position-dependent gamma needs a position")
            if self.gamma.section <= 0:
                raise TopologyError(f"{self.name}: section length must be > 0")


@dataclass(frozen=True)
class OverlapProfile:
    """Triangular overlap capacitance; see :func:`profiles.overlap_capacitance`."""

    slope: float
    half_range: float
    stray: float
    smoothing: float
    rest_offset: float = 0.0

    def params(self):
        return (self.slope, self.half_range, self.stray, self.smoothing, self.rest_offset)


@dataclass(frozen=True)
class PositionDependentCapacitor:
    """Electret-biased variable capacitor.

    Electrical port (a, b): charge q = C(z) * (v_ab + bias). Mechanical port
    (p, n): reaction force -1/2 (v_ab + bias)^2 dC/dz.
    """

    name: str
    p: str
    n: str
    a: str
    b: str
    profile: OverlapProfile
    bias: float
    position: str
    v0: float = 0.0
    kind = "poscap"

    def check(self):
        if self.profile.slope < 0 or self.profile.stray <= 0:
            raise TopologyError(f"{self.name}: need slope >= 0 and stray capacitance > 0")


@dataclass(frozen=True)
class EndStop:
    """One-sided penalty contact outside [lower, upper] in series with a mechanical loop.

    The dashpot fades in linearly over the first ``damping_depth`` metres of
    penetration so the contact force stays continuous at first touch.
    """

    name: str
    a: str
    b: str
    position: str
    lower: float
    upper: float
    stiffness: float = 1e6
    damping: float = 0.0
    damping_depth: float = 1e-5
    kind = "endstop"

    def check(self):
        if self.lower >= self.upper:
            raise TopologyError(f"{self.name}: need lower < upper")
        if self.stiffness <= 0 or self.damping < 0 or self.damping_depth <= 0:
            raise TopologyError(
                f"{self.name}: need stiffness > 0, damping >= 0 and damping_depth > 0")


ELEMENT_TYPES = {cls.kind: cls for cls in (
    Resistor, Capacitor, Inductor, VoltageSource, CurrentSource, Transformer, Diode,
    PositionDependentTransduction, PositionDependentCapacitor, EndStop)}

_PROFILE_TYPES = {"square_wave": SquareWaveProfile, "overlap": OverlapProfile}


def _positive(el, attr):
    if not getattr(el, attr) > 0:
        raise TopologyError(f"{el.name}: {attr} must be > 0, got {getattr(el, attr)}")


def ports(el) -> list[tuple[str, str]]:
    """Terminal pairs of an element; each pair is one conductive port."""
    if isinstance(el, (Transformer, PositionDependentTransduction)):
        return [(el.p1, el.n1), (el.p2, el.n2)]
    if isinstance(el, PositionDependentCapacitor):
        return [(el.p, el.n), (el.a, el.b)]
    if isinstance(el, Diode):
        return [(el.anode, el.cathode)]
    return [(el.a, el.b)]


@dataclass
class Netlist:
    """A list of elements plus the frequencies that bound the time step.

    ``frequencies`` holds declared resonances (Hz); source frequencies are
    collected automatically by :meth:`max_frequency`.
    """

    elements: list = field(default_factory=list)
    frequencies: list = field(default_factory=list)

    def add(self, element):
        if any(e.name == element.name for e in self.elements):
            raise TopologyError(f"duplicate element name {element.name!r}")
        element.check()
        self.elements.append(element)
        return element

    def extend(self, elements):
        for el in elements:
            self.add(el)
        return self

    def declare_frequency(self, hz: float):
        self.frequencies.append(float(hz))

    def __getitem__(self, name):
        for el in self.elements:
            if el.name == name:
                return el
        raise KeyError(name)

    def __contains__(self, name):
        return any(el.name == name for el in self.elements)

    def __len__(self):
        return len(self.elements)

    def count(self, kind) -> int:
        cls = ELEMENT_TYPES[kind] if isinstance(kind, str) else kind
        return sum(isinstance(el, cls) for el in self.elements)

    @property
    def nodes(self) -> list[str]:
        seen = {}
        for el in self.elements:
            for pair in ports(el):
                for node in pair:
                    if not is_ground(node):
                        seen.setdefault(node, None)
        return list(seen)

    def max_frequency(self) -> float:
        freqs = list(self.frequencies)
        for el in self.elements:
            wf = getattr(el, "waveform", None)
            if wf is not None:
                freqs.append(wf.frequency_hz)
        return max(freqs, default=0.0)

    def validate(self):
        """Raise TopologyError unless every node reaches ground through some element."""
        if not self.elements:
            raise TopologyError("empty netlist")
        for el in self.elements:
            el.check()
            for attr in ("position",):
                ref = getattr(el, attr, None)
                if ref is not None:
                    target = next((e for e in self.elements if e.name == ref), None)
                    if not (isinstance(target, Inductor) and target.mechanical):
                        raise TopologyError(
                            f"{el.name}: position reference {ref!r} is not a mechanical inductor")
        adjacency = defaultdict(set)
        for el in self.elements:
            for a, b in ports(el):
                a = GROUND if is_ground(a) else a
                b = GROUND if is_ground(b) else b
                adjacency[a].add(b)
                adjacency[b].add(a)
        if GROUND not in adjacency:
            raise TopologyError("netlist has no ground reference")
        reached, stack = {GROUND}, [GROUND]
        while stack:
            for nxt in adjacency[stack.pop()]:
                if nxt not in reached:
                    reached.add(nxt)
                    stack.append(nxt)
        floating = [n for n in self.nodes if n not in reached]
        if floating:
            raise TopologyError(f"floating nodes (no path to ground): {', '.join(floating)}")

    def to_dict(self) -> dict:
        out = []
        for el in self.elements:
            d = {"kind": el.kind}
            for f in fields(el):
                value = getattr(el, f.name)
                if isinstance(value, Waveform):
                    value = value.to_dict()
                elif isinstance(value, SquareWaveProfile):
                    value = {"kind": "square_wave", **{g.name: getattr(value, g.name)
                                                        for g in fields(value)}}
                elif isinstance(value, OverlapProfile):
                    value = {"kind": "overlap", **{g.name: getattr(value, g.name)
                                                    for g in fields(value)}}
                d[f.name] = value
            out.append(d)
        return {"elements": out, "frequencies": list(self.frequencies)}

    @classmethod
    def from_dict(cls, data: dict) -> "Netlist":
        net = cls(frequencies=[float(f) for f in data.get("frequencies", [])])
        for raw in data["elements"]:
            raw = dict(raw)
            kind = raw.pop("kind")
            try:
                el_cls = ELEMENT_TYPES[kind]
            except KeyError:
                raise TopologyError(f"unknown element kind {kind!r}") from None
            for key, value in list(raw.items()):
                if key == "waveform":
                    raw[key] = waveform_from_dict(value)
                elif isinstance(value, dict) and value.get("kind") in _PROFILE_TYPES:
                    value = dict(value)
                    raw[key] = _PROFILE_TYPES[value.pop("kind")](**value)
            net.add(el_cls(**raw))
        return net
