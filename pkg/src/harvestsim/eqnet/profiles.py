"""Scalar position profiles for the position-dependent network elements.

These are compiled with numba so the transient kernel can call them inside
its Newton loop; they are also plain callables from Python.
"""

import math

from numba import njit

EPS0 = 8.8541878128e-12  # F/m


@njit(cache=True)
def smooth_abs(u, w):
    """|u| with a C1 quadratic blend over |u| < w/2. Returns (value, d/du, d2/du2)."""
    if w <= 0.0 or abs(u) >= 0.5 * w:
        return abs(u), (1.0 if u >= 0.0 else -1.0), 0.0
    return u * u / w + 0.25 * w, 2.0 * u / w, 2.0 / w


@njit(cache=True)
def smooth_ramp(s, w):
    """max(0, s) with a C1 quadratic blend over |s| < w/2. Returns (value, d/ds, d2/ds2)."""
    if w <= 0.0 or s >= 0.5 * w:
        if s > 0.0:
            return s, 1.0, 0.0
        return 0.0, 0.0, 0.0
    if s <= -0.5 * w:
        return 0.0, 0.0, 0.0
    t = s + 0.5 * w
    return t * t / (2.0 * w), t / w, 1.0 / w


@njit(cache=True)
def overlap_capacitance(z, slope, half_range, stray, smoothing, rest_offset):
    """Triangular overlap capacitor.

    ``slope`` is eps0*L_e/g (F/m); the overlap peaks at the aligned position
    z = -rest_offset and vanishes beyond +-half_range from it. Returns
    (C, dC/dz, d2C/dz2).
    """
    u = z + rest_offset
    a, da, dda = smooth_abs(u, smoothing)
    r, dr, ddr = smooth_ramp(half_range - a, smoothing)
    c = stray + slope * r
    dc = -slope * dr * da
    ddc = slope * (ddr * da * da - dr * dda)
    return c, dc, ddc


@njit(cache=True)
def square_wave_transduction(z, gamma0, section, transition, origin, z_lo, z_hi):
    """Alternating-winding coupling factor Gamma(z) and dGamma/dz.

    Sign flips at every section boundary origin + j*section, with a linear
    ramp of total width ``transition*section`` across each boundary. Outside
    [z_lo, z_hi] the position is clamped.
    """
    clamped = False
    if z < z_lo:
        z = z_lo
        clamped = True
    elif z > z_hi:
        z = z_hi
        clamped = True
    s = (z - origin) / section
    j = math.floor(s)
    f = s - j
    sign = 1.0 if (int(j) % 2) == 0 else -1.0
    b = 0.5 * transition
    if b > 0.0 and f < b:
        g, dg = sign * f / b, sign / (b * section)
    elif b > 0.0 and f > 1.0 - b:
        g, dg = sign * (1.0 - f) / b, -sign / (b * section)
    else:
        g, dg = sign, 0.0
    if clamped:
        dg = 0.0
    return gamma0 * g, gamma0 * dg


@njit(cache=True)
def square_wave_flux(z, gamma0, section, transition, origin, z_lo, z_hi):
    """Flux linkage lambda(z) = integral of Gamma from ``origin``, clamped like
    :func:`square_wave_transduction` (continuous, triangular with rounded corners)."""
    if z < z_lo:
        z = z_lo
    elif z > z_hi:
        z = z_hi
    s = (z - origin) / section
    j = math.floor(s)
    f = s - j
    odd = (int(j) % 2) != 0
    sign = -1.0 if odd else 1.0
    b = 0.5 * transition
    if b > 0.0 and f < b:
        part = f * f / (2.0 * b)
    elif b > 0.0 and f > 1.0 - b:
        part = 1.0 - b - (1.0 - f) * (1.0 - f) / (2.0 * b)
    else:
        part = f - 0.5 * b if b > 0.0 else f
    base = (1.0 - b) if odd else 0.0
    return gamma0 * section * (base + sign * part)
