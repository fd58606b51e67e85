# cython: language_level=3
"""Compiled implementations of the numeric kernels.

Twin of ``_purekernels.py``: formulas, branch structure and operation
order match statement for statement so the two paths agree to the last
bit on the same libm.  Keep the two files in sync.
"""

from libc.math cimport atan2, cos, exp, fabs, isfinite, log1p, sin, sqrt

COMPILED = True

cdef double _TWO_PI = 6.283185307179586


def trace_coupler(double a12, double a23, double a34, double a41,
                  double a25, double alpha,
                  double[::1] theta2, double[::1] out_x, double[::1] out_y):
    """Coupler point at each crank angle; returns -1 or the failing index."""
    cdef Py_ssize_t n = theta2.shape[0]
    cdef Py_ssize_t i
    cdef double th, ax, ay, dx, dy, d2, d, a, h2, h, ux, uy, bx, by, th3
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


def path_sse(double[::1] cx, double[::1] cy, double[::1] tx, double[::1] ty,
             bint cyclic):
    """Sum of squared distances under fixed or cyclic (2n alignments) pairing."""
    cdef Py_ssize_t n = cx.shape[0]
    cdef Py_ssize_t i, shift, j
    cdef double s, fwd, bwd, ex, ey, best
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


cdef inline double _softplus_scaled(double z) nogil:
    # branch structure mirrored in the pure kernel; keep in sync
    if z > 30.0:
        return z
    if z < -40.0:
        return 0.0
    return log1p(exp(z))


cdef inline void _hyd_deriv(double t, double ps, double pm, double w,
                            double u, double ie,
                            double dm, double ki, double qp,
                            const double* p, double* out) nogil:
    cdef double wdes, tload, dpv, qv, qrv, qm, ucmd
    if t < p[14]:
        wdes = p[13] * (t / p[14])
    else:
        wdes = p[13]
    tload = p[15] if t >= p[16] else 0.0
    dpv = ps - pm
    qv = p[5] * u * dpv / sqrt(sqrt(dpv * dpv + p[10] * p[10]))
    qrv = p[4] * p[10] * _softplus_scaled((ps - p[3]) / p[10])
    qm = dm * w / _TWO_PI
    out[0] = (p[0] / p[1]) * (
        qp - qv - qrv - p[17] * ps
        + p[18] * p[10] * _softplus_scaled(-ps / p[10])
    )
    out[1] = (p[0] / p[2]) * (
        qv - qm - p[9] * pm
        + p[18] * p[10] * _softplus_scaled(-pm / p[10])
    )
    out[2] = (dm * pm / _TWO_PI - tload - p[8] * w) / p[7]
    ucmd = ki * ie
    if ucmd < 0.0:
        ucmd = 0.0
    elif ucmd > 1.0:
        ucmd = 1.0
    out[3] = (ucmd - u) / p[6]
    out[4] = (wdes - w) / p[12]
    out[5] = wdes
    out[6] = qv
    out[7] = qrv


def hydraulic_trajectory(double dp, double dm, double ki, double[::1] p,
                         double dt, int n_steps, int substeps,
                         double[:, ::1] out):
    """Fixed-step RK4 of the transmission model; fills `out`, row per step.

    Same contract as the pure twin: returns -1, or the index of the first
    non-finite row.
    """
    cdef double qp = p[11] * dp
    cdef double h = dt / substeps
    cdef double ie_lo = -0.1 / ki
    cdef double ie_hi = 1.1 / ki
    cdef double ps = 0.0, pm = 0.0, w = 0.0, u = 0.0, ie = 0.0
    cdef double t, ts
    cdef double d1[8]
    cdef double d2[8]
    cdef double d3[8]
    cdef double d4[8]
    cdef int i, sub
    cdef const double* pp = &p[0]

    for i in range(n_steps + 1):
        t = i * dt
        _hyd_deriv(t, ps, pm, w, u, ie, dm, ki, qp, pp, d1)
        if not (isfinite(ps) and isfinite(pm) and isfinite(w)
                and isfinite(u) and isfinite(ie) and isfinite(d1[0])):
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
                _hyd_deriv(ts, ps, pm, w, u, ie, dm, ki, qp, pp, d1)
            _hyd_deriv(ts + 0.5 * h,
                       ps + 0.5 * h * d1[0], pm + 0.5 * h * d1[1],
                       w + 0.5 * h * d1[2], u + 0.5 * h * d1[3],
                       ie + 0.5 * h * d1[4], dm, ki, qp, pp, d2)
            _hyd_deriv(ts + 0.5 * h,
                       ps + 0.5 * h * d2[0], pm + 0.5 * h * d2[1],
                       w + 0.5 * h * d2[2], u + 0.5 * h * d2[3],
                       ie + 0.5 * h * d2[4], dm, ki, qp, pp, d3)
            _hyd_deriv(ts + h,
                       ps + h * d3[0], pm + h * d3[1], w + h * d3[2],
                       u + h * d3[3], ie + h * d3[4], dm, ki, qp, pp, d4)
            ps += h * (d1[0] + 2.0 * (d2[0] + d3[0]) + d4[0]) / 6.0
            pm += h * (d1[1] + 2.0 * (d2[1] + d3[1]) + d4[1]) / 6.0
            w += h * (d1[2] + 2.0 * (d2[2] + d3[2]) + d4[2]) / 6.0
            u += h * (d1[3] + 2.0 * (d2[3] + d3[3]) + d4[3]) / 6.0
            ie += h * (d1[4] + 2.0 * (d2[4] + d3[4]) + d4[4]) / 6.0
            if u < 0.0:
                u = 0.0
            elif u > 1.0:
                u = 1.0
            if ie < ie_lo:
                ie = ie_lo
            elif ie > ie_hi:
                ie = ie_hi
    return -1
