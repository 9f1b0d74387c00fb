"""Pure-Python Dormand-Prince 5(4) kernel.

This is the reference implementation of the compiled ``_dopri_ext`` module
and is used when the extension is not built.  The stepper is the classical
DOPRI5 pair with local extrapolation, a lightly stabilised step-size
controller (exponent 0.17, beta 0.04), the fourth-order continuous extension
for event location, and an Illinois root polish on that extension.

Event codes: 0 max x1, 1 max x2, 2 min x1, 3 min x2, 4 crossing of x1 = x2.
"""
from math import fabs, sqrt, tanh

import numpy as np

EV_MAX_X1, EV_MAX_X2, EV_MIN_X1, EV_MIN_X2, EV_CROSS = range(5)

A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0,
)
A71, A73, A74, A75, A76 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0,
)
D1, D3, D4 = -12715105075.0 / 11282082432.0, 87487479700.0 / 32700410799.0, -10690763975.0 / 1880347072.0
D5, D6, D7 = 701980252875.0 / 199316789632.0, -1453857185.0 / 822651844.0, 69997945.0 / 29380423.0


def _field(s, p):
    x1, y1, x2, y2 = s
    eps1, eps2, a1, a2, b1, b2, k1, k2 = p
    return [
        y1 + (1.0 - x1 * x1 / 3.0) * x1,
        eps1 * (a1 - x1 + b1 * tanh(k2 * (a2 - x2))),
        y2 + (1.0 - x2 * x2 / 3.0) * x2,
        eps2 * (a2 - x2 + b2 * tanh(k1 * (a1 - x1))),
    ]


def _dense(r, th):
    th1 = 1.0 - th
    r0, r1, r2, r3, r4 = r
    return [
        r0[i] + th * (r1[i] + th1 * (r2[i] + th * (r3[i] + th1 * r4[i])))
        for i in range(4)
    ]


def _event_value(code, y, p):
    if code == EV_CROSS:
        return y[0] - y[2]
    f = _field(y, p)
    return f[0] if code in (EV_MAX_X1, EV_MIN_X1) else f[2]


def _locate(code, r, p, g0, g1, h, ttol):
    lo, hi, glo, ghi = 0.0, 1.0, g0, g1
    side = 0
    for it in range(200):
        if (hi - lo) * fabs(h) < ttol:
            break
        th = (lo * ghi - hi * glo) / (ghi - glo)
        if not (lo < th < hi):
            th = 0.5 * (lo + hi)
        g = _event_value(code, _dense(r, th), p)
        if g == 0.0:
            return th
        if (g > 0.0) == (glo > 0.0):
            lo, glo = th, g
            if side == -1:
                ghi *= 0.5
            side = -1
        else:
            hi, ghi = th, g
            if side == 1:
                glo *= 0.5
            side = 1
        if it % 4 == 3:
            th = 0.5 * (lo + hi)
            g = _event_value(code, _dense(r, th), p)
            if (g > 0.0) == (glo > 0.0):
                lo, glo = th, g
            else:
                hi, ghi = th, g
    return 0.5 * (lo + hi)


def _wrms(e, y0, y1, rtol, atol):
    acc = 0.0
    for i in range(4):
        q = e[i] / (atol + rtol * max(fabs(y0[i]), fabs(y1[i])))
        acc += q * q
    return sqrt(acc / 4.0)


def integrate(y0, params, t_end, rtol, atol, max_step, event_mask, blowup, max_steps, event_tol):
    p = [float(v) for v in params]
    y = [float(v) for v in y0]
    times = [0.0]
    states = [list(y)]
    ev_t, ev_c, ev_s = [], [], []
    nfev = nacc = nrej = nstep = 0
    status = 0

    k1 = _field(y, p)
    nfev += 1
    d0 = sqrt(sum((y[i] / (atol + rtol * fabs(y[i]))) ** 2 for i in range(4)) / 4.0)
    d1 = sqrt(sum((k1[i] / (atol + rtol * fabs(y[i]))) ** 2 for i in range(4)) / 4.0)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    k2 = _field([y[i] + h0 * k1[i] for i in range(4)], p)
    nfev += 1
    d2 = sqrt(sum(((k2[i] - k1[i]) / (atol + rtol * fabs(y[i]))) ** 2 for i in range(4)) / 4.0) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(min(100.0 * h0, h1), max_step)
    h = min(h, t_end)

    expo1 = 0.2 - 0.04 * 0.75
    facold = 1e-4
    reject = False
    t = 0.0
    rng = range(4)
    while t < t_end:
        if nstep >= max_steps:
            status = 3
            break
        if h < 1e-13 * max(1.0, fabs(t)):
            status = 1
            break
        if t + 1.01 * h >= t_end:
            h = t_end - t
        nstep += 1

        k2 = _field([y[i] + h * A21 * k1[i] for i in rng], p)
        k3 = _field([y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in rng], p)
        k4 = _field([y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in rng], p)
        k5 = _field([y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) for i in rng], p)
        k6 = _field(
            [y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]) for i in rng], p
        )
        ynew = [y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]) for i in rng]
        k7 = _field(ynew, p)
        nfev += 6
        err = [h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]) for i in rng]
        e = _wrms(err, y, ynew, rtol, atol)
        if e != e:
            e = 1e10

        fac11 = e ** expo1
        fac = fac11 / facold ** 0.04
        fac = max(0.1, min(5.0, fac / 0.9))
        hnew = h / fac

        if e <= 1.0:
            facold = max(e, 1e-4)
            nacc += 1
            r1 = [ynew[i] - y[i] for i in rng]
            r2 = [h * k1[i] - r1[i] for i in rng]
            r3 = [r1[i] - h * k7[i] - r2[i] for i in rng]
            r4 = [h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]) for i in rng]
            r = (y, r1, r2, r3, r4)
            for code in range(5):
                if not (event_mask >> code) & 1:
                    continue
                if code == EV_CROSS:
                    g0, g1 = y[0] - y[2], ynew[0] - ynew[2]
                    ok = (g0 < 0.0 and g1 >= 0.0) or (g0 > 0.0 and g1 <= 0.0)
                elif code in (EV_MAX_X1, EV_MAX_X2):
                    j = 0 if code == EV_MAX_X1 else 2
                    g0, g1 = k1[j], k7[j]
                    ok = g0 > 0.0 and g1 <= 0.0
                else:
                    j = 0 if code == EV_MIN_X1 else 2
                    g0, g1 = k1[j], k7[j]
                    ok = g0 < 0.0 and g1 >= 0.0
                if not ok:
                    continue
                th = 1.0 if g1 == 0.0 else _locate(code, r, p, g0, g1, h, event_tol)
                ev_t.append(t + th * h)
                ev_c.append(code)
                ev_s.append(_dense(r, th))

            t = t + h
            if t_end - t < 1e-12 * max(1.0, t_end):
                t = t_end
            y = ynew
            k1 = k7
            times.append(t)
            states.append(list(y))
            if not all(fabs(v) <= blowup for v in y):
                status = 2
                break
            if hnew > max_step:
                hnew = max_step
            if reject:
                hnew = min(hnew, h)
            reject = False
            h = hnew
        else:
            nrej += 1
            h = h / min(5.0, fac11 / 0.9)
            reject = True

    return (
        np.asarray(times, dtype=float),
        np.asarray(states, dtype=float).reshape(-1, 4),
        np.asarray(ev_t, dtype=float),
        np.asarray(ev_c, dtype=np.int64),
        np.asarray(ev_s, dtype=float).reshape(-1, 4),
        status,
        (nfev, nacc, nrej),
    )
