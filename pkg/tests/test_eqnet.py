import math
from dataclasses import replace

import numpy as np
import pytest

from harvestsim.eqnet import (
    Capacitor, Constant, CurrentSource, Diode, EndStop, Inductor, Netlist, NonConvergence,
    PiecewiseLinear, Resistor, Sine, SingularMatrix, StrokeForce, TimeStepTooLarge,
    TopologyError, Transformer, VoltageSource, average_branch_power, mechanical_to_network,
    state_energy, stored_energy, transient,
)
from harvestsim.lumped import HarmonicSource, MechanicalParams, average_power, natural_frequency
from harvestsim.transducers import TransducerMapping

from oracles import rc_discharge, trapezoid_rc_discharge


def rc(v0=1.0):
    return Netlist().extend([Capacitor("C", "a", "0", 1.0, v0=v0), Resistor("R", "a", "0", 1.0)])


def lc():
    return Netlist().extend([Capacitor("C", "a", "0", 1.0, v0=1.0), Inductor("L", "a", "0", 1.0)])


# --- transient: analytic circuits ---------------------------------------------

def test_rc_discharge_matches_exponential():
    res = transient(rc(), 1.0, 1e-3)
    assert res.voltage("a")[-1] == pytest.approx(rc_discharge(1.0), abs=1e-4)
    assert res.voltage("a")[-1] == pytest.approx(0.36788, abs=1e-4)


def test_rc_discharge_is_exactly_the_trapezoidal_recursion():
    res = transient(rc(), 1.0, 0.01)
    # the first sample follows a backward-Euler start-up step of length eps0
    expect = [trapezoid_rc_discharge(t, 0.01) / (1 + res.eps0) for t in res.time]
    # the start-up derivative is a charge difference over eps0, good to ~1e-8
    np.testing.assert_allclose(res.voltage("a"), expect, rtol=1e-9)


def test_rc_discharge_is_second_order():
    errors = [abs(transient(rc(), 1.0, dt).voltage("a")[-1] - math.exp(-1))
              for dt in (0.02, 0.01, 0.005)]
    ratios = [errors[0] / errors[1], errors[1] / errors[2]]
    assert ratios == pytest.approx([4.0, 4.0], rel=0.02)


def test_lc_energy_constant_over_ten_periods():
    res = transient(lc(), 10 * 2 * math.pi, 2 * math.pi / 200)
    e = state_energy(res)
    assert e[0] == pytest.approx(0.5)
    assert np.max(np.abs(e - e[0])) / e[0] < 1e-4


def test_half_wave_rectifier_settles_at_peak_minus_drop():
    net = Netlist().extend([
        VoltageSource("V", "in", "0", Sine(5.0, 50.0)),
        Diode("D", "in", "out", forward_drop=0.6),
        Capacitor("C", "out", "0", 100e-6),
    ])
    res = transient(net, 0.2, 1e-5)
    assert res.voltage("out")[-1] == pytest.approx(4.4, abs=0.6 * 1e-2)
    assert res.kcl_residual.max() < 1e-9


def test_kcl_residual_small_with_nonlinear_elements():
    net = Netlist().extend([
        VoltageSource("V", "in", "0", Sine(3.0, 100.0)),
        Resistor("Rs", "in", "a", 10.0),
        Diode("D1", "a", "top"), Diode("D2", "bot", "a"),
        Capacitor("C1", "top", "0", 1e-5), Capacitor("C2", "0", "bot", 1e-5),
        Resistor("RL", "top", "bot", 1e4),
    ])
    res = transient(net, 0.1, 1e-5)
    assert res.kcl_residual.max() < 1e-9
    # doubler: output approaches twice (peak - drop) minus the load droop
    assert 0 < res.voltage("top")[-1] - res.voltage("bot")[-1] < 2 * (3.0 - 0.6)


# --- average power, stored energy --------------------------------------------

def test_resistor_power_over_discharge_equals_initial_energy():
    res = transient(rc(), 20.0, 1e-3)
    p = average_branch_power(res, "R", 0.0)
    assert p * res.t_end == pytest.approx(0.5, rel=1e-5)


def test_zero_current_branch_has_zero_power():
    res = transient(rc(v0=0.0), 1.0, 0.01)
    assert average_branch_power(res, "R", 0.0) == 0.0


def test_empty_averaging_window_is_rejected():
    res = transient(rc(), 1.0, 0.01)
    with pytest.raises(ValueError, match="empty"):
        average_branch_power(res, "R", 2.0)


def test_stored_energy_examples():
    net = Netlist().extend([Capacitor("C1", "a", "0", 220e-6, v0=3.63),
                            Capacitor("C2", "b", "0", 220e-6, v0=3.63),
                            Resistor("Ra", "a", "0", 1e12), Resistor("Rb", "b", "0", 1e12),
                            Capacitor("C3", "c", "0", 1.0, v0=1.0),
                            Resistor("Rc", "c", "0", 1e12),
                            Capacitor("C4", "d", "0", 1.0), Resistor("Rd", "d", "0", 1.0)])
    res = transient(net, 0.0, 1e-3)
    assert stored_energy(res, ["C1", "C2"]) == pytest.approx(2.90e-3, abs=0.005e-3)
    assert stored_energy(res, ["C3"]) == pytest.approx(0.5)
    assert stored_energy(res, ["C4"]) == 0.0
    with pytest.raises(TypeError):
        stored_energy(res, ["Ra"])


# --- mechanical translation ---------------------------------------------------

def fit_phasor(t, y, w):
    A = np.column_stack([np.sin(w * t), np.cos(w * t)])
    return np.linalg.lstsq(A, y, rcond=None)[0]


def test_series_resonance_is_purely_resistive():
    net = mechanical_to_network(MechanicalParams(1.0, 1.0, 1.0), Sine(1.0, 1 / (2 * math.pi)),
                                terminal="0")
    res = transient(net, 80.0, 1e-3)
    mask = res.time > 40.0
    a, b = fit_phasor(res.time[mask], res.current("mass")[mask], 1.0)
    assert a == pytest.approx(1.0, abs=1e-4)  # |F| / R, in phase with the force
    assert abs(b) < 1e-4


def test_springless_mass_under_constant_force_ramps():
    net = mechanical_to_network(MechanicalParams(1e-3, 0.0), Constant(2.0), terminal="0")
    assert net.count("capacitor") == 0 and net.count("resistor") == 0
    res = transient(net, 0.1, 1e-4)
    t = res.time + res.eps0  # samples lag the start-up step
    np.testing.assert_allclose(res.current("mass"), 2.0 * t / 1e-3, rtol=1e-9)
    np.testing.assert_allclose(res.position("mass")[1:], 1e3 * t[1:] ** 2, rtol=1e-9)


def test_ring_down_frequency_matches_natural_frequency():
    p = MechanicalParams(1e-3, 39.478, 0.01)
    net = mechanical_to_network(p, None, terminal="0")
    net.elements[0] = replace(net["mass"], i0=1.0)  # released with unit velocity
    res = transient(net, 1.0, 1e-4)
    v = res.current("mass")
    n = 1 << 22
    spec = np.abs(np.fft.rfft(v, n))
    freqs = np.fft.rfftfreq(n, res.dt)
    k = int(np.argmax(spec))
    # parabolic refinement of the peak bin
    y0, y1, y2 = np.log(spec[k - 1: k + 2])
    f_peak = freqs[k] + 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2) * (freqs[1] - freqs[0])
    assert 2 * math.pi * f_peak == pytest.approx(natural_frequency(p), rel=1e-3)


def test_position_is_integral_of_velocity():
    net = mechanical_to_network(MechanicalParams(1e-3, 39.478, 0.01),
                                HarmonicSource.from_acceleration(1.0, frequency_hz=30.0),
                                terminal="0")
    res = transient(net, 0.5, 1e-4)
    z, v = res.position("mass"), res.current("mass")
    step = np.diff(z) - 0.5 * res.dt * (v[1:] + v[:-1])
    assert np.max(np.abs(step)) < 1e-9


# --- transducer topologies ----------------------------------------------------

def harvester(topology, ratio, shunt, load=100.0, series_r=0.0, f=100.0, zeta=0.01):
    m = 1e-3
    p = MechanicalParams(m, m * (2 * math.pi * f) ** 2, zeta * 2 * m * 2 * math.pi * f)
    s = HarmonicSource.from_acceleration(1.0, frequency_hz=f)
    net = mechanical_to_network(p, s)
    net.extend(TransducerMapping(topology, ratio, shunt, series_r).elements("tr", "mech", "out"))
    net.add(Resistor("load", "out", "0", load))
    return p, s, net


def test_fig2b_harvester_matches_closed_form_power():
    f, zg = 100.0, 0.05
    c = 2 * 1e-3 * 2 * math.pi * f
    ratio = math.sqrt(zg * c * 100.0)  # d_g = ratio^2 / R
    p, s, net = harvester("fig2b", ratio, 1e-9)
    res = transient(net, 0.6, 2e-5)
    sim = average_branch_power(res, "load", 0.4)
    p = MechanicalParams(p.mass, p.spring, p.parasitic_damping, ratio**2 / 100.0)
    assert sim == pytest.approx(average_power(p, s), rel=1e-2)


def test_fig2a_and_fig2b_are_not_equivalent():
    results = []
    for topo, shunt in (("fig2a", 1e-5), ("fig2b", 1e-3)):
        _, _, net = harvester(topo, 0.2, shunt)
        res = transient(net, 0.3, 2e-5)
        results.append(average_branch_power(res, "load", 0.2))
    assert all(r > 0 for r in results)
    assert results[0] != pytest.approx(results[1], rel=0.05)


def test_transformer_is_lossless():
    net = Netlist().extend([
        VoltageSource("V", "a", "0", Sine(1.0, 50.0)), Resistor("R1", "a", "b", 3.0),
        Transformer("T", "b", "0", "c", "0", 2.5), Resistor("R2", "c", "0", 7.0),
        Capacitor("C", "c", "0", 1e-4),
    ])
    res = transient(net, 0.1, 1e-5)
    p1, p2 = res.power("T", 1), res.power("T", 2)
    scale = np.max(np.abs(p1))
    assert np.max(np.abs(p1 + p2)) <= 1e-12 * scale


def free_network(dt, t_end, *, stop=True, electrical=True):
    els = [
        Inductor("mass", "m1", "m2", 1e-3, i0=2.0, mechanical=True),
        Capacitor("spring", "m2", "m3", 1 / 400.0),
        Resistor("damper", "mech", "0", 0.05),
        VoltageSource("F", "m1", "0", Constant(0.0)),
    ]
    if stop:
        els.append(EndStop("stop", "m3", "mech", "mass", -1e-3, 1e-3, 1e6, 5.0))
    else:
        els.append(Resistor("link", "m3", "mech", 1e-3))
    if electrical:
        els += [Capacitor("C", "e", "0", 1e-6, v0=2.0), Inductor("L", "e", "f", 1e-3),
                Diode("D", "f", "0"), Resistor("R", "e", "0", 1e3)]
    return transient(Netlist().extend(els), t_end, dt)


def test_passivity_with_sources_zeroed():
    res = free_network(1e-5, 0.2, stop=False)
    e = state_energy(res)
    assert e[-1] < 0.5 * e[0]
    assert np.all(np.diff(e) <= 1e-12 * e[0])


def test_passivity_through_end_stop_contact():
    # 1e6 N/m on 1 g: contact period 0.2 ms, resolved by 200 steps
    res = free_network(1e-6, 0.05)
    assert np.max(np.abs(res.position("mass"))) > 1e-3
    e = state_energy(res)
    assert np.all(np.diff(e) <= 1e-12 * e[0])


def test_end_stop_release_error_vanishes_with_step():
    # a step straddling the release kink can gain a little energy; it is a
    # discretization error and must shrink at least quadratically with dt
    gains = []
    for dt in (1e-5, 5e-6):
        e = state_energy(free_network(dt, 0.05, electrical=False))
        gains.append(np.max(np.diff(e)) / e[0])
    assert gains[0] < 2e-3
    assert gains[1] < gains[0] / 4


# --- validation and failure modes ---------------------------------------------

def test_element_parameters_are_validated():
    with pytest.raises(TopologyError):
        Netlist().add(Resistor("R", "a", "0", 0.0))
    with pytest.raises(TopologyError):
        Netlist().add(Capacitor("C", "a", "0", -1.0))
    with pytest.raises(TopologyError):
        Netlist().add(Diode("D", "a", "0", on_conductance=1e-9, off_conductance=1.0))
    with pytest.raises(TopologyError, match="duplicate"):
        rc().add(Resistor("R", "a", "0", 2.0))


def test_floating_node_is_a_topology_error():
    net = rc()
    net.add(Resistor("Rf", "x", "y", 1.0))
    with pytest.raises(TopologyError, match="floating"):
        transient(net, 1.0, 0.01)


def test_voltage_source_loop_is_singular():
    net = Netlist().extend([VoltageSource("V1", "a", "0", Constant(1.0)),
                            VoltageSource("V2", "a", "0", Constant(2.0))])
    with pytest.raises(SingularMatrix):
        transient(net, 1e-3, 1e-4)


def test_time_step_rule():
    net = rc()
    net.add(VoltageSource("V", "b", "0", Sine(1.0, 100.0)))
    net.add(Resistor("Rb", "b", "0", 1.0))
    with pytest.raises(TimeStepTooLarge):
        transient(net, 0.1, 1 / 4000)
    transient(net, 0.01, 1 / 5000)


def test_nonconvergence_reports_step():
    net = Netlist().extend([VoltageSource("V", "a", "0", Sine(10.0, 10.0)),
                            Diode("D", "a", "b", on_conductance=1e9, off_conductance=1e-12),
                            Capacitor("C", "b", "0", 1e-9)])
    with pytest.raises(NonConvergence) as info:
        transient(net, 0.1, 1e-3, maxiter=1)
    assert info.value.step >= 0 and info.value.iterations == 1


def test_netlist_dict_round_trip():
    net = Netlist().extend([
        VoltageSource("V", "a", "0", PiecewiseLinear((0, 1), (0, 2), period=2.0)),
        Resistor("R", "a", "b", 1.0), Capacitor("C", "b", "0", 1e-3, v0=0.5),
        Diode("D", "b", "c"), Inductor("L", "c", "0", 1e-3),
        CurrentSource("I", "b", "0", StrokeForce(1.0, 5.0, scale=0.01)),
    ])
    net.declare_frequency(30.0)
    again = Netlist.from_dict(net.to_dict())
    assert again.to_dict() == net.to_dict()
    assert again.max_frequency() == 30.0
    a, b = transient(net, 0.05, 1e-4), transient(again, 0.05, 1e-4)
    np.testing.assert_array_equal(a.X, b.X)
