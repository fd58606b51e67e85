"""Pure-Python implementations of the numeric kernels.

Mirror of ``_speedups.pyx``, used when the compiled extension is missing or
``TABUKIT_PURE`` is set.  Formulas, branch structure and operation order
match the compiled code statement for statement, so both paths agree to
the last bit on the same libm.  Keep the two files in sync.
"""

from __future__ import annotations

from math import atan2, cos, exp, fabs, isfinite, log1p, sin, sqrt

COMPILED = False

_TWO_PI = 6.283185307179586


def trace_coupler(a12, a23, a34, a41, a25, alpha, theta2, out_x, out_y):
    """Coupler point at each crank angle; returns -1 or the failing index.

    Crank pivot at the origin, rocker pivot at (a41, 0).  The rocker pin is
    the circle-circle intersection on the positive-sine elbow branch
    (cross((O4 - A), (B - A)) >= 0); the coupler point sits at distance a25
    from the crank pin, rotated by alpha from the coupler line.
    """
    n = theta2.shape[0]
    for i in range(n):
        th = theta2[i]
        ax = a12 * cos(th)
        ay = a12 * sin(th)
        dx = a41 - ax
        dy = -ay
        d2 = dx * dx + dy * dy
        if d2 <= 0.0:
            return i
        d = sqrt(d2)
        a = (a23 * a23 - a34 * a34 + d2) / (2.0 * d)
        h2 = a23 * a23 - a * a
        if h2 < 0.0:
            if h2 < -1e-9 * a23 * a23:
                return i
            h2 = 0.0
        h = sqrt(h2)
        ux = dx / d
        uy = dy / d
        bx = ax + a * ux - h * uy
        by = ay + a * uy + h * ux
        th3 = atan2(by - ay, bx - ax)
        out_x[i] = ax + a25 * cos(th3 + alpha)
        out_y[i] = ay + a25 * sin(th3 + alpha)
    return -1


def path_sse(cx, cy, tx, ty, cyclic):
    """Sum of squared distances between traced and target points.

    Fixed pairing matches index to index; cyclic pairing returns the
    minimum over all n rotations of the index pairing in both traversal
    directions (2n alignments).
    """
    n = cx.shape[0]
    if not cyclic:
        s = 0.0
        for i in range(n):
            ex = cx[i] - tx[i]
            ey = cy[i] - ty[i]
            s += ex * ex + ey * ey
        return s
    best = -1.0
    for shift in range(n):
        fwd = 0.0
        bwd = 0.0
        for i in range(n):
            j = shift + i
            if j >= n:
                j -= n
            ex = cx[j] - tx[i]
            ey = cy[j] - ty[i]
            fwd += ex * ex + ey * ey
            j = shift - i
            if j < 0:
                j += n
            ex = cx[j] - tx[i]
            ey = cy[j] - ty[i]
            bwd += ex * ex + ey * ey
        if best < 0.0 or fwd < best:
            best = fwd
        if bwd < best:
            best = bwd
    return best


def _softplus_scaled(z):
    # branch structure mirrored in the compiled kernel; keep in sync
    if z > 30.0:
        return z
    if z < -40.0:
        return 0.0
    return log1p(exp(z))


def hydraulic_trajectory(dp, dm, ki, p, dt, n_steps, substeps, out):
    """Fixed-step RK4 of the transmission model; fills `out`, row per step.

    State: supply pressure, motor pressure, motor speed (rad/s), valve
    opening, integrated (scaled) speed error.  Row layout: t, demand speed
    (rad/s), speed, pump flow, relief flow, supply pressure, motor
    pressure, valve opening, valve flow, supply-pressure rate (SI units
    throughout).  Returns -1, or the index of the first non-finite row
    (rows from there on are unwritten).
    """
    beta = p[0]
    vs = p[1]
    vm = p[2]
    p_relief = p[3]
    k_relief = p[4]
    k_valve = p[5]
    tau_valve = p[6]
    inertia = p[7]
    damping = p[8]
    c_leak = p[9]
    w_sm = p[10]
    pump_speed = p[11]
    err_scale = p[12]
    demand_final = p[13]
    ramp = p[14]
    load_step = p[15]
    t_load = p[16]
    c_bleed = p[17]
    k_makeup = p[18]

    qp = pump_speed * dp
    h = dt / substeps
    ie_lo = -0.1 / ki
    ie_hi = 1.1 / ki

    ps = 0.0
    pm = 0.0
    w = 0.0
    u = 0.0
    ie = 0.0

    def deriv(t, ps, pm, w, u, ie):
        if t < ramp:
            wdes = demand_final * (t / ramp)
        else:
            wdes = demand_final
        tload = load_step if t >= t_load else 0.0
        dpv = ps - pm
        qv = k_valve * u * dpv / sqrt(sqrt(dpv * dpv + w_sm * w_sm))
        qrv = k_relief * w_sm * _softplus_scaled((ps - p_relief) / w_sm)
        qm = dm * w / _TWO_PI
        dps = (beta / vs) * (
            qp - qv - qrv - c_bleed * ps
            + k_makeup * w_sm * _softplus_scaled(-ps / w_sm)
        )
        dpm = (beta / vm) * (
            qv - qm - c_leak * pm
            + k_makeup * w_sm * _softplus_scaled(-pm / w_sm)
        )
        dw = (dm * pm / _TWO_PI - tload - damping * w) / inertia
        ucmd = ki * ie
        if ucmd < 0.0:
            ucmd = 0.0
        elif ucmd > 1.0:
            ucmd = 1.0
        du = (ucmd - u) / tau_valve
        die = (wdes - w) / err_scale
        return dps, dpm, dw, du, die, wdes, qv, qrv

    for i in range(n_steps + 1):
        t = i * dt
        d1 = deriv(t, ps, pm, w, u, ie)
        if not (
            isfinite(ps) and isfinite(pm) and isfinite(w)
            and isfinite(u) and isfinite(ie) and isfinite(d1[0])
        ):
            return i
        out[i, 0] = t
        out[i, 1] = d1[5]
        out[i, 2] = w
        out[i, 3] = qp
        out[i, 4] = d1[7]
        out[i, 5] = ps
        out[i, 6] = pm
        out[i, 7] = u
        out[i, 8] = d1[6]
        out[i, 9] = d1[0]
        if i == n_steps:
            break
        for sub in range(substeps):
            ts = t + sub * h
            if sub:
                d1 = deriv(ts, ps, pm, w, u, ie)
            k1 = d1
            d2 = deriv(
                ts + 0.5 * h,
                ps + 0.5 * h * k1[0], pm + 0.5 * h * k1[1], w + 0.5 * h * k1[2],
                u + 0.5 * h * k1[3], ie + 0.5 * h * k1[4],
            )
            d3 = deriv(
                ts + 0.5 * h,
                ps + 0.5 * h * d2[0], pm + 0.5 * h * d2[1], w + 0.5 * h * d2[2],
                u + 0.5 * h * d2[3], ie + 0.5 * h * d2[4],
            )
            d4 = deriv(
                ts + h,
                ps + h * d3[0], pm + h * d3[1], w + h * d3[2],
                u + h * d3[3], ie + h * d3[4],
            )
            ps += h * (k1[0] + 2.0 * (d2[0] + d3[0]) + d4[0]) / 6.0
            pm += h * (k1[1] + 2.0 * (d2[1] + d3[1]) + d4[1]) / 6.0
            w += h * (k1[2] + 2.0 * (d2[2] + d3[2]) + d4[2]) / 6.0
            u += h * (k1[3] + 2.0 * (d2[3] + d3[3]) + d4[3]) / 6.0
            ie += h * (k1[4] + 2.0 * (d2[4] + d3[4]) + d4[4]) / 6.0
            if u < 0.0:
                u = 0.0
            elif u > 1.0:
                u = 1.0
            if ie < ie_lo:
                ie = ie_lo
            elif ie > ie_hi:
                ie = ie_hi
    return -1
