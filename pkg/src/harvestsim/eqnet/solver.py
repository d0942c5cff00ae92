"""Transient analysis front end: netlist compilation, result traces, energy accounting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import kernel
from .netlist import (
    Capacitor, CurrentSource, Diode, EndStop, Inductor, Netlist, PositionDependentCapacitor,
    PositionDependentTransduction, Resistor, SquareWaveProfile, Transformer, VoltageSource,
    is_ground,
)
from .profiles import overlap_capacitance, square_wave_transduction

log = logging.getLogger(__name__)

STEPS_PER_PERIOD = 50


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    def __init__(self, step: int, time: float, iterations: int, unknown: str):
        self.step, self.time, self.iterations, self.unknown = step, time, iterations, unknown
        super().__init__(f"Newton iteration did not converge at step {step} (t={time:.6g} s) "
                         f"after {iterations} iterations; worst unknown: {unknown}")


class SingularMatrix(SolverError):
    pass


class TimeStepTooLarge(ValueError):
    pass


@dataclass
class _Compiled:
    netlist: Netlist
    node_index: dict
    branch_index: dict  # (element name, slot) -> row
    position_index: dict  # mechanical inductor name -> row
    labels: list
    G: np.ndarray
    Cq: np.ndarray
    Q0: np.ndarray
    x_guess: np.ndarray
    sources: list  # (rows, signs) per source element, in column order
    source_elements: list
    nl: tuple
    linear: bool
    x_scale: np.ndarray  # magnitude floor for each unknown's Newton tolerance


def compile_netlist(net: Netlist, gmin: float = 1e-12) -> _Compiled:
    net.validate()
    nodes = net.nodes
    node_index = {name: i for i, name in enumerate(nodes)}
    labels = [f"v({n})" for n in nodes]
    branch_index, position_index = {}, {}

    def new_row(label):
        labels.append(label)
        return len(labels) - 1

    for el in net.elements:
        if isinstance(el, (Inductor, VoltageSource, Transformer, EndStop)):
            branch_index[el.name, 0] = new_row(f"i({el.name})")
        elif isinstance(el, PositionDependentTransduction):
            branch_index[el.name, 0] = new_row(f"i1({el.name})")
            branch_index[el.name, 1] = new_row(f"i2({el.name})")
        elif isinstance(el, PositionDependentCapacitor):
            branch_index[el.name, 0] = new_row(f"i_mech({el.name})")
    for el in net.elements:
        if isinstance(el, Inductor) and el.mechanical:
            position_index[el.name] = new_row(f"z({el.name})")

    n = len(labels)
    G = np.zeros((n, n))
    Cq = np.zeros((n, n))
    Q0 = np.zeros(n)
    x0 = np.zeros(n)
    idx = lambda node: -1 if is_ground(node) else node_index[node]  # noqa: E731

    def stamp2(M, a, b, value):
        if a >= 0:
            M[a, a] += value
        if b >= 0:
            M[b, b] += value
        if a >= 0 and b >= 0:
            M[a, b] -= value
            M[b, a] -= value

    def stamp_branch(a, b, k):
        # current x[k] leaves node a through the element into node b
        if a >= 0:
            G[a, k] += 1.0
            G[k, a] += 1.0
        if b >= 0:
            G[b, k] -= 1.0
            G[k, b] -= 1.0

    for i in range(len(nodes)):
        G[i, i] += gmin

    x_scale = np.zeros(G.shape[0])
    sources, source_elements = [], []
    diodes_i, diodes_f, gyr_i, gyr_f = [], [], [], []
    cap_i, cap_f, stop_i, stop_f = [], [], [], []

    for el in net.elements:
        if isinstance(el, Resistor):
            stamp2(G, idx(el.a), idx(el.b), 1.0 / el.resistance)
        elif isinstance(el, Capacitor):
            a, b = idx(el.a), idx(el.b)
            stamp2(Cq, a, b, el.capacitance)
            if a >= 0:
                Q0[a] += el.capacitance * el.v0
            if b >= 0:
                Q0[b] -= el.capacitance * el.v0
        elif isinstance(el, Inductor):
            k = branch_index[el.name, 0]
            stamp_branch(idx(el.a), idx(el.b), k)
            Cq[k, k] -= el.inductance
            Q0[k] = -el.inductance * el.i0
            x0[k] = el.i0
            if el.mechanical:
                z = position_index[el.name]
                Cq[z, z] = 1.0
                G[z, k] = -1.0
                Q0[z] = el.z0
                x0[z] = el.z0
        elif isinstance(el, VoltageSource):
            k = branch_index[el.name, 0]
            stamp_branch(idx(el.a), idx(el.b), k)
            sources.append(([k], [1.0]))
            source_elements.append(el)
        elif isinstance(el, CurrentSource):
            rows, signs = [], []
            for node, sign in ((el.a, -1.0), (el.b, 1.0)):
                if idx(node) >= 0:
                    rows.append(idx(node))
                    signs.append(sign)
            sources.append((rows, signs))
            source_elements.append(el)
        elif isinstance(el, Transformer):
            k = branch_index[el.name, 0]
            p1, n1, p2, n2 = idx(el.p1), idx(el.n1), idx(el.p2), idx(el.n2)
            stamp_branch(p1, n1, k)
            for node, sign in ((p2, -1.0), (n2, 1.0)):
                if node >= 0:
                    G[node, k] += sign * el.ratio
                    G[k, node] += sign * el.ratio
        elif isinstance(el, Diode):
            diodes_i.append((idx(el.anode), idx(el.cathode)))
            diodes_f.append((el.forward_drop, el.on_conductance, el.off_conductance))
        elif isinstance(el, PositionDependentTransduction):
            k1, k2 = branch_index[el.name, 0], branch_index[el.name, 1]
            stamp_branch(idx(el.p1), idx(el.n1), k1)
            stamp_branch(idx(el.p2), idx(el.n2), k2)
            if isinstance(el.gamma, SquareWaveProfile):
                z = position_index[el.position]
                gyr_i.append((idx(el.p1), idx(el.n1), idx(el.p2), idx(el.n2), k1, k2, z))
                gyr_f.append(el.gamma.params())
            else:
                G[k1, k2] += el.gamma
                G[k2, k1] -= el.gamma
        elif isinstance(el, PositionDependentCapacitor):
            km = branch_index[el.name, 0]
            stamp_branch(idx(el.p), idx(el.n), km)
            a, b = idx(el.a), idx(el.b)
            z = position_index[el.position]
            cap_i.append((idx(el.p), idx(el.n), km, a, b, z))
            cap_f.append((*el.profile.params(), el.bias))
            # the bias sets the round-off floor of the port voltages
            for node in (a, b):
                if node >= 0:
                    x_scale[node] = max(x_scale[node], abs(el.bias))
            c0 = overlap_capacitance(net[el.position].z0, *el.profile.params())[0]
            q0 = c0 * (el.v0 + el.bias)
            if a >= 0:
                Q0[a] += q0
            if b >= 0:
                Q0[b] -= q0
        elif isinstance(el, EndStop):
            k = branch_index[el.name, 0]
            stamp_branch(idx(el.a), idx(el.b), k)
            stop_i.append((idx(el.a), idx(el.b), k, position_index[el.position]))
            stop_f.append((el.lower, el.upper, el.stiffness, el.damping, el.damping_depth))

    nl = (
        np.array(diodes_i, dtype=np.int64).reshape(-1, 2),
        np.array(diodes_f, dtype=float).reshape(-1, 3),
        np.array(gyr_i, dtype=np.int64).reshape(-1, 7),
        np.array(gyr_f, dtype=float).reshape(-1, 6),
        np.array(cap_i, dtype=np.int64).reshape(-1, 6),
        np.array(cap_f, dtype=float).reshape(-1, 6),
        np.array(stop_i, dtype=np.int64).reshape(-1, 4),
        np.array(stop_f, dtype=float).reshape(-1, 5),
    )
    linear = not (diodes_i or gyr_i or cap_i or stop_i)
    return _Compiled(net, node_index, branch_index, position_index, labels, G, Cq, Q0, x0,
                     sources, source_elements, nl, linear, x_scale)


def transient(net: Netlist, t_end: float, dt: float, *, reltol: float = 1e-9,
              abstol: float = 1e-15, maxiter: int = 50, gmin: float = 1e-12,
              kcl_tol: float = 1e-12, enforce_step_rule: bool = True) -> "SimulationResult":
    """Fixed-step trapezoidal transient analysis from the zero (or prescribed) state.

    Raises TimeStepTooLarge when ``dt`` exceeds 1/(50 f_max) for the highest
    declared source or resonance frequency, NonConvergence when Newton fails,
    SingularMatrix for an unsolvable network.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    if enforce_step_rule:
        check_step(net, dt)
    comp = compile_netlist(net, gmin=gmin)
    n_steps = int(round(t_end / dt))
    time = np.arange(n_steps + 1) * dt
    vals = np.zeros((n_steps + 1, max(len(comp.sources), 1)))
    rows, signs, cols = [], [], []
    for j, ((r, s), el) in enumerate(zip(comp.sources, comp.source_elements)):
        vals[:, j] = el.waveform(time)
        rows += r
        signs += s
        cols += [j] * len(r)
    n = len(comp.labels)
    X = np.zeros((n_steps + 1, n))
    iters = np.zeros(n_steps + 1, dtype=np.int64)
    kcl = np.zeros(n_steps + 1)
    kcl_mag = np.zeros(n_steps + 1)
    eps0 = 1e-6 * dt
    try:
        status, step, worst = kernel.integrate(
            comp.G, comp.Cq, comp.Q0, comp.x_guess, comp.x_scale, dt, eps0, n_steps,
            np.array(rows, dtype=np.int64), np.array(signs, dtype=float),
            np.array(cols, dtype=np.int64), vals, *comp.nl,
            comp.linear, reltol, abstol, maxiter, len(comp.node_index), kcl_tol,
            X, iters, kcl, kcl_mag)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"singular network matrix ({exc}); check for floating "
                             "subnetworks or voltage-source loops") from None
    if status == kernel.NONCONVERGENCE:
        raise NonConvergence(step, step * dt, maxiter,
                             comp.labels[worst] if worst >= 0 else "?")
    log.debug("transient: %d steps, mean Newton iterations %.2f", n_steps, iters.mean())
    return SimulationResult(comp, time, X, iters, kcl, kcl_mag, dt, eps0, {"gmin": gmin})


def check_step(net: Netlist, dt: float):
    f_max = net.max_frequency()
    if f_max > 0 and dt > 1.0 / (STEPS_PER_PERIOD * f_max):
        raise TimeStepTooLarge(
            f"dt={dt:g} s exceeds 1/({STEPS_PER_PERIOD}*f_max) = "
            f"{1.0 / (STEPS_PER_PERIOD * f_max):g} s (f_max={f_max:g} Hz)")


@dataclass
class SimulationResult:
    """Uniformly sampled solution of a transient run.

    Element currents are positive entering the first terminal of the port;
    ``power`` is the power absorbed by the element port.
    """

    compiled: _Compiled = field(repr=False)
    time: np.ndarray
    X: np.ndarray = field(repr=False)
    iterations: np.ndarray = field(repr=False)
    kcl_abs: np.ndarray = field(repr=False)
    kcl_scale: np.ndarray = field(repr=False)
    dt: float
    eps0: float
    metadata: dict = field(default_factory=dict)

    @property
    def netlist(self) -> Netlist:
        return self.compiled.netlist

    @property
    def kcl_residual(self) -> np.ndarray:
        """Per-step worst node-row current residual over the largest current seen in the run."""
        peak = self.kcl_scale.max()
        return self.kcl_abs / peak if peak > 0 else self.kcl_abs

    @property
    def t_end(self) -> float:
        return float(self.time[-1])

    def voltage(self, node: str) -> np.ndarray:
        if is_ground(node):
            return np.zeros_like(self.time)
        return self.X[:, self.compiled.node_index[node]]

    def position(self, name: str) -> np.ndarray:
        return self.X[:, self.compiled.position_index[name]]

    def unknown(self, label: str) -> np.ndarray:
        return self.X[:, self.compiled.labels.index(label)]

    def _branch(self, name, slot=0):
        return self.X[:, self.compiled.branch_index[name, slot]]

    def _dynamic_current(self, charge, charge0):
        # trapezoidal companion current consistent with the solver's update rule
        a = 2.0 / self.dt
        i0 = (charge[0] - charge0) / self.eps0
        if len(charge) == 1:
            return np.array([i0])
        drive = a * np.diff(charge)
        rest, _ = lfilter([1.0], [1.0, 1.0], drive, zi=[-i0])
        return np.concatenate([[i0], rest])

    def element_voltage(self, name: str, port: int = 1) -> np.ndarray:
        el = self.netlist[name]
        if isinstance(el, (Transformer, PositionDependentTransduction)):
            a, b = (el.p1, el.n1) if port == 1 else (el.p2, el.n2)
        elif isinstance(el, PositionDependentCapacitor):
            a, b = (el.p, el.n) if port == 1 else (el.a, el.b)
        elif isinstance(el, Diode):
            a, b = el.anode, el.cathode
        else:
            a, b = el.a, el.b
        return self.voltage(a) - self.voltage(b)

    def current(self, name: str, port: int = 1) -> np.ndarray:
        el = self.netlist[name]
        v = self.element_voltage(name, port)
        if isinstance(el, Resistor):
            return v / el.resistance
        if isinstance(el, Capacitor):
            q = el.capacitance * v
            return self._dynamic_current(q, el.capacitance * el.v0)
        if isinstance(el, (Inductor, VoltageSource, EndStop)):
            return self._branch(name)
        if isinstance(el, CurrentSource):
            return el.waveform(self.time)
        if isinstance(el, Transformer):
            i1 = self._branch(name)
            return i1 if port == 1 else -el.ratio * i1
        if isinstance(el, PositionDependentTransduction):
            return self._branch(name, port - 1)
        if isinstance(el, PositionDependentCapacitor):
            if port == 1:
                return self._branch(name)
            q = self.capacitance_trace(name) * (v + el.bias)
            c0 = overlap_capacitance(self.netlist[el.position].z0, *el.profile.params())[0]
            return self._dynamic_current(q, c0 * (el.v0 + el.bias))
        if isinstance(el, Diode):
            on = v > el.forward_drop
            return np.where(on, el.on_conductance * (v - el.forward_drop)
                            + el.off_conductance * el.forward_drop, el.off_conductance * v)
        raise TypeError(f"no current for {type(el).__name__}")

    def power(self, name: str, port: int = 1) -> np.ndarray:
        return self.element_voltage(name, port) * self.current(name, port)

    def capacitance_trace(self, name: str) -> np.ndarray:
        el = self.netlist[name]
        z = self.position(el.position)
        return np.array([overlap_capacitance(zi, *el.profile.params())[0] for zi in z])

    def gamma_trace(self, name: str) -> np.ndarray:
        el = self.netlist[name]
        if not isinstance(el.gamma, SquareWaveProfile):
            return np.full_like(self.time, el.gamma)
        z = self.position(el.position)
        p = el.gamma.params()
        return np.array([square_wave_transduction(zi, *p)[0] for zi in z])

    def step_energy(self, name: str, port: int = 1) -> np.ndarray:
        """Energy absorbed by an element port during each step, from step-averaged v and i.

        With trapezoidal integration this makes sum(step_energy) over all ports
        vanish identically (Tellegen) and equals the exact change of 1/2 C v^2 or
        1/2 L i^2 for linear storage elements.
        """
        v = self.element_voltage(name, port)
        i = self.current(name, port)
        return self.dt * 0.25 * (v[1:] + v[:-1]) * (i[1:] + i[:-1])

    def window(self, t_start: float, t_stop: float | None = None) -> np.ndarray:
        t_stop = self.t_end if t_stop is None else t_stop
        return (self.time >= t_start - 1e-12 * max(self.dt, 1.0)) & (self.time <= t_stop + 1e-12)


def average_branch_power(res: SimulationResult, branch: str, t_start: float = 0.0,
                         port: int = 1) -> float:
    """Mean power absorbed by ``branch`` over [t_start, t_end], trapezoidal weights."""
    mask = res.window(t_start)
    t = res.time[mask]
    if len(t) < 2 or t[-1] <= t[0]:
        raise ValueError("averaging window is empty")
    p = res.power(branch, port)[mask]
    return float(np.trapezoid(p, t) / (t[-1] - t[0]))


def stored_energy(res: SimulationResult, capacitor_branches, t: float | None = None) -> float:
    """Sum of 1/2 C v^2 over the given capacitors at time ``t`` (default: end of run)."""
    t = res.t_end if t is None else t
    total = 0.0
    for name in capacitor_branches:
        el = res.netlist[name]
        if not isinstance(el, Capacitor):
            raise TypeError(f"{name} is not a capacitor")
        v = float(np.interp(t, res.time, res.element_voltage(name)))
        total += 0.5 * el.capacitance * v * v
    return total


def state_energy(res: SimulationResult) -> np.ndarray:
    """Energy held in capacitors, inductors, variable capacitors and end-stop penalties."""
    e = np.zeros_like(res.time)
    for el in res.netlist.elements:
        if isinstance(el, Capacitor):
            e += 0.5 * el.capacitance * res.element_voltage(el.name) ** 2
        elif isinstance(el, Inductor):
            e += 0.5 * el.inductance * res.current(el.name) ** 2
        elif isinstance(el, PositionDependentCapacitor):
            vc = res.element_voltage(el.name, 2) + el.bias
            e += 0.5 * res.capacitance_trace(el.name) * vc**2
        elif isinstance(el, EndStop):
            z = res.position(el.position)
            pen = np.where(z > el.upper, z - el.upper, np.where(z < el.lower, z - el.lower, 0.0))
            e += 0.5 * el.stiffness * pen**2
    return e
