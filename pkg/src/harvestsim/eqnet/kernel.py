"""Compiled trapezoidal/Newton integration loop.

The network is written in charge-oriented form

    F(x) + d/dt Q(x) = S(t)

with F, Q split into constant matrices (G, Cq) and the contributions of the
nonlinear elements. Each step solves

    F(x_n) - S_n + a (Q(x_n) - Q_{n-1}) - Qdot_{n-1} = 0,   a = 2/h

by Newton iteration and then updates Qdot_n = a (Q_n - Q_{n-1}) - Qdot_{n-1}.
The initial point is found with one backward-Euler step of length ``eps0``
from the initial charge vector Q0, which makes the algebraic unknowns
consistent with the prescribed states.
"""

import numpy as np
from numba import njit

from .profiles import overlap_capacitance, square_wave_transduction

OK = 0
NONCONVERGENCE = 1
SINGULAR = 2


@njit(cache=True, nogil=True)
def _nonlinear(x, F, Q, JF, JQ, di, df, gi, gf, ci, cf, si, sf):
    # diodes: [anode, cathode] / [vf, gon, goff]
    for e in range(di.shape[0]):
        a, c = di[e, 0], di[e, 1]
        v = (x[a] if a >= 0 else 0.0) - (x[c] if c >= 0 else 0.0)
        vf, gon, goff = df[e, 0], df[e, 1], df[e, 2]
        if v > vf:
            i = gon * (v - vf) + goff * vf
            g = gon
        else:
            i = goff * v
            g = goff
        if a >= 0:
            F[a] += i
            JF[a, a] += g
            if c >= 0:
                JF[a, c] -= g
        if c >= 0:
            F[c] -= i
            JF[c, c] += g
            if a >= 0:
                JF[c, a] -= g

    # gyrators: [p1, n1, p2, n2, k1, k2, z] / square-wave profile params
    for e in range(gi.shape[0]):
        k1, k2, z = gi[e, 4], gi[e, 5], gi[e, 6]
        gam, dgam = square_wave_transduction(x[z], gf[e, 0], gf[e, 1], gf[e, 2],
                                             gf[e, 3], gf[e, 4], gf[e, 5])
        i1, i2 = x[k1], x[k2]
        F[k1] += gam * i2
        JF[k1, k2] += gam
        JF[k1, z] += dgam * i2
        F[k2] -= gam * i1
        JF[k2, k1] -= gam
        JF[k2, z] -= dgam * i1

    # variable capacitors: [p, n, km, a, b, z] / [slope, half, stray, smooth, rest, bias]
    for e in range(ci.shape[0]):
        km, a, b, z = ci[e, 2], ci[e, 3], ci[e, 4], ci[e, 5]
        cap, dcap, ddcap = overlap_capacitance(x[z], cf[e, 0], cf[e, 1], cf[e, 2],
                                               cf[e, 3], cf[e, 4])
        vc = (x[a] if a >= 0 else 0.0) - (x[b] if b >= 0 else 0.0) + cf[e, 5]
        # branch row reads v_p - v_n + F = 0, so F = +1/2 vc^2 C' gives the reaction force
        F[km] += 0.5 * vc * vc * dcap
        JF[km, z] += 0.5 * vc * vc * ddcap
        if a >= 0:
            JF[km, a] += vc * dcap
        if b >= 0:
            JF[km, b] -= vc * dcap
        q = cap * vc
        if a >= 0:
            Q[a] += q
            JQ[a, z] += dcap * vc
            JQ[a, a] += cap
            if b >= 0:
                JQ[a, b] -= cap
        if b >= 0:
            Q[b] -= q
            JQ[b, z] -= dcap * vc
            JQ[b, b] += cap
            if a >= 0:
                JQ[b, a] -= cap

    # end stops: [p, n, k, z] / [lower, upper, stiffness, damping, damping depth]
    for e in range(si.shape[0]):
        k, z = si[e, 2], si[e, 3]
        lo, hi, kc, cc, depth = sf[e, 0], sf[e, 1], sf[e, 2], sf[e, 3], sf[e, 4]
        pos, vel = x[z], x[k]
        if pos > hi:
            pen = pos - hi
        elif pos < lo:
            pen = pos - lo
        else:
            continue
        w = abs(pen) / depth
        dw = np.sign(pen) / depth
        if w >= 1.0:
            w = 1.0
            dw = 0.0
        f = kc * pen + cc * w * vel
        # the contact only pushes
        if f * pen <= 0.0:
            continue
        F[k] -= f
        JF[k, z] -= kc + cc * dw * vel
        JF[k, k] -= cc * w


@njit(cache=True, nogil=True)
def _sources(S, step, rows, signs, cols, vals):
    S[:] = 0.0
    for j in range(rows.shape[0]):
        S[rows[j]] += signs[j] * vals[step, cols[j]]


@njit(cache=True, nogil=True)
def _newton(x, G, Cq, a, S, Qprev, qdot_prev, scale, iscale, linear, reltol, abstol, maxiter,
            kcl_rows, kcl_tol, di, df, gi, gf, ci, cf, si, sf):
    """Solve one implicit step in place.

    A nonlinear step is accepted once the last update is within tolerance and
    every node-row residual at the updated point is below ``kcl_tol`` times the
    magnitude of the terms in that row, their linearizations and the run's current scale.
    Returns (status, iterations, worst index).
    """
    n = x.shape[0]
    F = np.zeros(n)
    Q = np.zeros(n)
    JF = np.zeros((n, n))
    JQ = np.zeros((n, n))
    worst = -1
    small = False
    for it in range(1, maxiter + 1):
        F[:] = 0.0
        Q[:] = 0.0
        JF[:, :] = 0.0
        JQ[:, :] = 0.0
        _nonlinear(x, F, Q, JF, JQ, di, df, gi, gf, ci, cf, si, sf)
        R = G @ x + F - S + a * (Cq @ x + Q - Qprev) - qdot_prev
        if small:
            # node rows must balance to within round-off of the terms they sum
            ok = True
            for r in range(kcl_rows):
                mag = iscale + abs(F[r]) + abs(S[r]) + abs(qdot_prev[r]) \
                    + abs(a) * (abs(Q[r]) + abs(Qprev[r]))
                for j in range(n):
                    # per-term magnitudes bound the round-off of differences like g (v - v_f)
                    mag += abs(G[r, j] * x[j]) + abs(JF[r, j] * x[j]) \
                        + abs(a) * abs((Cq[r, j] + JQ[r, j]) * x[j])
                if abs(R[r]) > kcl_tol * mag:
                    ok = False
                    break
            if ok:
                return OK, it - 1, -1
        J = G + JF + a * (Cq + JQ)
        dx = np.linalg.solve(J, R)
        x -= dx
        if linear:
            return OK, it, -1
        small = True
        for i in range(n):
            if not np.isfinite(x[i]):
                return NONCONVERGENCE, it, i
            tol = reltol * max(abs(x[i]), scale[i]) + abstol
            if abs(dx[i]) > tol:
                small = False
                worst = i
    return NONCONVERGENCE, maxiter, worst


@njit(cache=True, nogil=True)
def _charges(x, Cq, di, df, gi, gf, ci, cf, si, sf):
    n = x.shape[0]
    F = np.zeros(n)
    Q = np.zeros(n)
    JF = np.zeros((n, n))
    JQ = np.zeros((n, n))
    _nonlinear(x, F, Q, JF, JQ, di, df, gi, gf, ci, cf, si, sf)
    return Cq @ x + Q, F


@njit(cache=True, nogil=True)
def integrate(G, Cq, Q0, x_guess, x_scale, h, eps0, n_steps,
              src_rows, src_signs, src_cols, src_vals,
              di, df, gi, gf, ci, cf, si, sf,
              linear, reltol, abstol, maxiter, kcl_rows, kcl_tol, X, iters, kcl, kcl_mag):
    """Fill X[0..n_steps]; returns (status, failing step, worst unknown index).

    ``x_scale`` floors the magnitude each unknown's relative tolerance refers to.

    kcl[step] receives the largest absolute node-row residual after the step,
    kcl_mag[step] the largest current magnitude entering any node row.
    """
    n = G.shape[0]
    S = np.zeros(n)
    scale = x_scale.copy()
    iscale = 0.0
    x = x_guess.copy()

    _sources(S, 0, src_rows, src_signs, src_cols, src_vals)
    a0 = 1.0 / eps0
    status, it, worst = _newton(x, G, Cq, a0, S, Q0, np.zeros(n), scale, 0.0, linear,
                                reltol, abstol, maxiter, kcl_rows, kcl_tol,
                                di, df, gi, gf, ci, cf, si, sf)
    if status != OK:
        return status, 0, worst
    Qn, Fn = _charges(x, Cq, di, df, gi, gf, ci, cf, si, sf)
    qdot = a0 * (Qn - Q0)
    X[0, :] = x
    iters[0] = it
    for i in range(n):
        scale[i] = max(scale[i], abs(x[i]))

    a = 2.0 / h
    for step in range(1, n_steps + 1):
        _sources(S, step, src_rows, src_signs, src_cols, src_vals)
        Qprev = Qn
        status, it, worst = _newton(x, G, Cq, a, S, Qprev, qdot, scale, iscale, linear,
                                    reltol, abstol, maxiter, kcl_rows, kcl_tol,
                                    di, df, gi, gf, ci, cf, si, sf)
        if status != OK:
            return status, step, worst
        Qn, Fn = _charges(x, Cq, di, df, gi, gf, ci, cf, si, sf)
        qdot = a * (Qn - Qprev) - qdot
        X[step, :] = x
        iters[step] = it
        for i in range(n):
            if abs(x[i]) > scale[i]:
                scale[i] = abs(x[i])
        # Kirchhoff residual on node rows and the largest current entering them
        lin = G @ x
        worst_res = 0.0
        biggest = 0.0
        for r in range(kcl_rows):
            res = abs(lin[r] + Fn[r] - S[r] + qdot[r])
            mag = abs(Fn[r]) + abs(S[r]) + abs(qdot[r])
            for j in range(n):
                mag += abs(G[r, j] * x[j])
            if res > worst_res:
                worst_res = res
            if mag > biggest:
                biggest = mag
        kcl[step] = worst_res
        kcl_mag[step] = biggest
        if biggest > iscale:
            iscale = biggest
    return OK, n_steps, -1
