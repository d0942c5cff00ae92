"""Time functions driving independent sources.

Every waveform is vectorized (``w(t_array) -> array``), declares the
frequency that bounds the solver step, and round-trips through a plain dict.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


class Waveform:
    kind = ""

    @property
    def frequency_hz(self) -> float:
        return 0.0

    def __call__(self, t):
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, **asdict(self)}


@dataclass(frozen=True)
class Constant(Waveform):
    value: float = 0.0
    kind = "constant"

    def __call__(self, t):
        return np.full(np.shape(t), float(self.value))


@dataclass(frozen=True)
class Sine(Waveform):
    """offset + amplitude * sin(2 pi f t + phase)"""

    amplitude: float
    frequency: float
    phase: float = 0.0
    offset: float = 0.0
    kind = "sine"

    @property
    def frequency_hz(self) -> float:
        return self.frequency

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.offset + self.amplitude * np.sin(2 * math.pi * self.frequency * t + self.phase)


@dataclass(frozen=True)
class PiecewiseLinear(Waveform):
    """Linear interpolation through (times, values); held constant outside,
    or repeated with ``period`` if given."""

    times: tuple
    values: tuple
    period: float | None = None
    kind = "pwl"

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(v) for v in self.times))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("pwl needs matching, non-empty times and values")
        if any(b < a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("pwl times must be non-decreasing")

    @property
    def frequency_hz(self) -> float:
        return 1.0 / self.period if self.period else 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.period:
            t = np.mod(t, self.period)
        return np.interp(t, self.times, self.values)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "times": list(self.times), "values": list(self.values),
                "period": self.period}


@dataclass(frozen=True)
class StrokeProfile:
    """Periodic point-to-point motion with a trapezoidal velocity profile.

    Each period: move +stroke, dwell, move -stroke, dwell. ``dwell_fraction`` is
    the total resting share of the period (split between both ends);
    ``ramp_fraction`` is the share of each move spent accelerating (and again
    decelerating). Position runs between -stroke/2 and +stroke/2.
    """

    stroke: float
    frequency: float
    dwell_fraction: float = 0.1
    ramp_fraction: float = 0.25

    def __post_init__(self):
        if self.stroke <= 0 or self.frequency <= 0:
            raise ValueError("stroke and frequency must be > 0")
        if not 0 <= self.dwell_fraction < 1:
            raise ValueError("dwell_fraction must be in [0, 1)")
        if not 0 < self.ramp_fraction <= 0.5:
            raise ValueError("ramp_fraction must be in (0, 0.5]")

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    @property
    def move_time(self) -> float:
        return 0.5 * self.period * (1.0 - self.dwell_fraction)

    @property
    def ramp_time(self) -> float:
        return self.ramp_fraction * self.move_time

    @property
    def peak_velocity(self) -> float:
        return self.stroke / (self.move_time - self.ramp_time)

    @property
    def peak_acceleration(self) -> float:
        return self.peak_velocity / self.ramp_time

    def _phase(self, t):
        """Time inside the current move and its direction (+1, -1, or 0 while dwelling)."""
        t = np.mod(np.asarray(t, dtype=float), self.period)
        tm = self.move_time
        dwell = 0.5 * self.period * self.dwell_fraction
        tau = np.where(t < tm + dwell, t, t - tm - dwell)
        direction = np.where(t < tm, 1.0, np.where(t < tm + dwell, 0.0,
                                                   np.where(t < 2 * tm + dwell, -1.0, 0.0)))
        return tau, direction

    def displacement(self, t):
        tau, direction = self._phase(t)
        tm, tr, v, a = self.move_time, self.ramp_time, self.peak_velocity, self.peak_acceleration
        tau = np.clip(tau, 0.0, tm)
        s = np.where(tau < tr, 0.5 * a * tau**2,
                     np.where(tau < tm - tr, 0.5 * a * tr**2 + v * (tau - tr),
                              self.stroke - 0.5 * a * (tm - tau) ** 2))
        t_mod = np.mod(np.asarray(t, dtype=float), self.period)
        forward_done = t_mod >= tm
        lo, hi = -0.5 * self.stroke, 0.5 * self.stroke
        pos = np.where(direction > 0, lo + s, np.where(direction < 0, hi - s, 0.0))
        resting = np.where(forward_done & (t_mod < tm + 0.5 * self.period * self.dwell_fraction), hi, lo)
        return np.where(direction == 0, resting, pos)

    def velocity(self, t):
        tau, direction = self._phase(t)
        tm, tr, a = self.move_time, self.ramp_time, self.peak_acceleration
        speed = np.where(tau < tr, a * tau, np.where(tau < tm - tr, self.peak_velocity,
                                                    np.clip(a * (tm - tau), 0.0, None)))
        return direction * speed

    def acceleration(self, t):
        tau, direction = self._phase(t)
        tm, tr, a = self.move_time, self.ramp_time, self.peak_acceleration
        acc = np.where(tau < tr, a, np.where(tau < tm - tr, 0.0, np.where(tau < tm, -a, 0.0)))
        return direction * acc


@dataclass(frozen=True)
class StrokeForce(Waveform):
    """Inertial force ``-scale * acceleration`` of a :class:`StrokeProfile`."""

    stroke: float
    frequency: float
    scale: float = 1.0
    dwell_fraction: float = 0.1
    ramp_fraction: float = 0.25
    kind = "stroke_force"
    profile: StrokeProfile = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "profile", StrokeProfile(
            self.stroke, self.frequency, self.dwell_fraction, self.ramp_fraction))

    @property
    def frequency_hz(self) -> float:
        return self.frequency

    def __call__(self, t):
        return -self.scale * self.profile.acceleration(t)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "stroke": self.stroke, "frequency": self.frequency,
                "scale": self.scale, "dwell_fraction": self.dwell_fraction,
                "ramp_fraction": self.ramp_fraction}


_KINDS = {cls.kind: cls for cls in (Constant, Sine, PiecewiseLinear, StrokeForce)}


def waveform_from_dict(d: dict) -> Waveform:
    d = dict(d)
    kind = d.pop("kind")
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown waveform kind {kind!r}") from None
    return cls(**d)
