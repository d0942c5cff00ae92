"""Closed-form analytics for the base-excited mass-spring-damper scavenger.

All quantities are SI. The canonical (velocity-damped, base-excited) power
expressions are used by default; ``paper_literal=True`` evaluates the
historically printed variants, whose damping terms carry different numeric
factors and do not agree with a time-domain integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

SINGULARITY_RTOL = 1e-15


class ResonanceSingularity(ValueError):
    """Undamped oscillator driven exactly at resonance."""


@dataclass(frozen=True)
class MechanicalParams:
    """Proof mass ``m`` (kg), spring ``k`` (N/m), parasitic damping ``d`` and
    generator damping ``d_g`` (N*s/m)."""

    mass: float
    spring: float
    parasitic_damping: float = 0.0
    generator_damping: float = 0.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be > 0, got {self.mass}")
        for name in ("spring", "parasitic_damping", "generator_damping"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def total_damping(self) -> float:
        return self.parasitic_damping + self.generator_damping


@dataclass(frozen=True)
class HarmonicSource:
    """Sinusoidal base motion y(t) = Y sin(w t).

    Use the ``from_*`` constructors when a row is specified by velocity or
    acceleration amplitude instead of displacement.
    """

    displacement_amplitude: float
    angular_frequency: float

    def __post_init__(self):
        if not self.angular_frequency > 0:
            raise ValueError(f"angular_frequency must be > 0, got {self.angular_frequency}")
        if self.displacement_amplitude < 0:
            raise ValueError("displacement_amplitude must be >= 0")

    @classmethod
    def from_amplitude(cls, amplitude: float, *, omega: float | None = None,
                       frequency_hz: float | None = None) -> "HarmonicSource":
        return cls(amplitude, _omega(omega, frequency_hz))

    @classmethod
    def from_velocity(cls, velocity: float, *, omega: float | None = None,
                      frequency_hz: float | None = None) -> "HarmonicSource":
        w = _omega(omega, frequency_hz)
        return cls(velocity / w, w)

    @classmethod
    def from_acceleration(cls, acceleration: float, *, omega: float | None = None,
                          frequency_hz: float | None = None) -> "HarmonicSource":
        w = _omega(omega, frequency_hz)
        return cls(acceleration / w**2, w)

    @property
    def velocity_amplitude(self) -> float:
        return self.angular_frequency * self.displacement_amplitude

    @property
    def acceleration_amplitude(self) -> float:
        return self.angular_frequency**2 * self.displacement_amplitude

    @property
    def frequency_hz(self) -> float:
        return self.angular_frequency / (2 * math.pi)


def _omega(omega, frequency_hz):
    if (omega is None) == (frequency_hz is None):
        raise ValueError("give exactly one of omega or frequency_hz")
    return omega if omega is not None else 2 * math.pi * frequency_hz


@dataclass(frozen=True)
class NormalizedParams:
    frequency_ratio: float
    parasitic_ratio: float
    generator_ratio: float
    resonance: float


def natural_frequency(p: MechanicalParams) -> float:
    """Undamped resonance sqrt(k/m) in rad/s."""
    if p.spring <= 0:
        raise ValueError("natural frequency undefined for k = 0 (springless device)")
    return math.sqrt(p.spring / p.mass)


def normalize(p: MechanicalParams, s: HarmonicSource) -> NormalizedParams:
    w_res = natural_frequency(p)
    scale = 2.0 * math.sqrt(p.spring * p.mass)
    return NormalizedParams(
        frequency_ratio=s.angular_frequency / w_res,
        parasitic_ratio=p.parasitic_damping / scale,
        generator_ratio=p.generator_damping / scale,
        resonance=w_res,
    )


def reference_power(p: MechanicalParams, s: HarmonicSource) -> float:
    """The normalizing power 1/2 m w |dY/dt|^2 (W)."""
    return 0.5 * p.mass * s.angular_frequency * s.velocity_amplitude**2


def average_power(p: MechanicalParams, s: HarmonicSource, *, paper_literal: bool = False) -> float:
    """Average power dissipated in the generator damper.

    P = d_g m^2 w^4 |Y'|^2 / (2 [(k - m w^2)^2 + w^2 (d + d_g)^2])

    With ``paper_literal`` the damping term is multiplied by 4, as printed.
    """
    m, k, w = p.mass, p.spring, s.angular_frequency
    detune = (k - m * w**2) ** 2
    factor = 4.0 if paper_literal else 1.0
    denom = detune + factor * w**2 * p.total_damping**2
    if denom <= SINGULARITY_RTOL * (k + m * w**2) ** 2:
        raise ResonanceSingularity("undamped system driven at resonance")
    if p.generator_damping == 0:
        return 0.0
    return p.generator_damping * m**2 * w**4 * s.velocity_amplitude**2 / (2.0 * denom)


def dimensionless_power(n: NormalizedParams, *, paper_literal: bool = False) -> float:
    """Generated power divided by 1/2 m w |Y'|^2."""
    x = n.frequency_ratio
    zeta_t = n.parasitic_ratio + n.generator_ratio
    if paper_literal:
        num = n.generator_ratio * x**3
        denom = (1 - x**2) ** 2 + x**2 * zeta_t**2
    else:
        num = 2.0 * n.generator_ratio * x**3
        denom = (1 - x**2) ** 2 + (2.0 * zeta_t * x) ** 2
    if denom <= SINGULARITY_RTOL * (1 + x**2) ** 2:
        raise ResonanceSingularity("undamped system driven at resonance")
    return num / denom


def relative_displacement_amplitude(p: MechanicalParams, s: HarmonicSource) -> float:
    """Steady-state amplitude of the mass motion relative to the frame (m)."""
    m, k, w = p.mass, p.spring, s.angular_frequency
    denom = math.hypot(k - m * w**2, w * p.total_damping)
    if denom <= math.sqrt(SINGULARITY_RTOL) * (k + m * w**2):
        raise ResonanceSingularity("undamped system driven at resonance")
    return m * w**2 * s.displacement_amplitude / denom


def source_power_density(s: HarmonicSource) -> float:
    """1/2 w |Y'|^2 in W/kg: available power per unit proof mass."""
    return 0.5 * s.angular_frequency * s.velocity_amplitude**2


def displacement_limited_power(p: MechanicalParams, s: HarmonicSource, z_max: float) -> float:
    """Optimum power when the internal stroke is bounded by ``z_max``.

    m w |Y'|^2 / 2 * z_max / Y. Only meaningful for z_max <= Y.
    """
    if s.displacement_amplitude <= 0:
        raise ValueError("displacement amplitude must be > 0")
    if z_max < 0:
        raise ValueError("z_max must be >= 0")
    return reference_power(p, s) * z_max / s.displacement_amplitude
