# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Dormand-Prince 5(4) stepper for the coupled van der Pol field.

Mirrors ``_dopri_py.integrate`` step for step; see that module for the
algorithm description.  Storage grows by doubling in C buffers and is copied
out to numpy once at the end.
"""
import numpy as np

from libc.math cimport tanh, fabs, sqrt, pow, fmax, fmin
from libc.stdlib cimport malloc, realloc, free

# event codes, shared with the pure-Python kernel
DEF EV_MAX_X1 = 0
DEF EV_MAX_X2 = 1
DEF EV_MIN_X1 = 2
DEF EV_MIN_X2 = 3
DEF EV_CROSS = 4

cdef double C2 = 1.0 / 5.0, C3 = 3.0 / 10.0, C4 = 4.0 / 5.0, C5 = 8.0 / 9.0
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double A71 = 35.0 / 384.0, A73 = 500.0 / 1113.0, A74 = 125.0 / 192.0, A75 = -2187.0 / 6784.0, A76 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0, E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0
cdef double D1 = -12715105075.0 / 11282082432.0, D3 = 87487479700.0 / 32700410799.0, D4 = -10690763975.0 / 1880347072.0
cdef double D5 = 701980252875.0 / 199316789632.0, D6 = -1453857185.0 / 822651844.0, D7 = 69997945.0 / 29380423.0


cdef inline void field(const double* s, const double* p, double* out) noexcept nogil:
    # p = (eps1, eps2, a1, a2, b1, b2, k1, k2)
    cdef double x1 = s[0], x2 = s[2]
    out[0] = s[1] + (1.0 - x1 * x1 / 3.0) * x1
    out[1] = p[0] * (p[2] - x1 + p[4] * tanh(p[7] * (p[3] - x2)))
    out[2] = s[3] + (1.0 - x2 * x2 / 3.0) * x2
    out[3] = p[1] * (p[3] - x2 + p[5] * tanh(p[6] * (p[2] - x1)))


cdef inline void dense(const double* r, double th, double* out) noexcept nogil:
    # r holds the five 4-vectors of the continuous extension back to back
    cdef double th1 = 1.0 - th
    cdef int i
    for i in range(4):
        out[i] = r[i] + th * (r[4 + i] + th1 * (r[8 + i] + th * (r[12 + i] + th1 * r[16 + i])))


cdef inline double event_value(int code, const double* y, const double* p) noexcept nogil:
    cdef double f[4]
    if code == EV_CROSS:
        return y[0] - y[2]
    field(y, p, f)
    if code == EV_MAX_X1 or code == EV_MIN_X1:
        return f[0]
    return f[2]


cdef double locate(int code, const double* r, const double* p, double g0, double g1,
                   double h, double ttol) noexcept nogil:
    """Illinois regula falsi on the dense output; returns theta in [0, 1]."""
    cdef double lo = 0.0, hi = 1.0, glo = g0, ghi = g1, th, g
    cdef double y[4]
    cdef int side = 0, it
    th = 0.5
    for it in range(200):
        if (hi - lo) * fabs(h) < ttol:
            break
        th = (lo * ghi - hi * glo) / (ghi - glo)
        if not (th > lo and th < hi):
            th = 0.5 * (lo + hi)
        dense(r, th, y)
        g = event_value(code, y, p)
        if g == 0.0:
            return th
        if (g > 0.0) == (glo > 0.0):
            lo = th
            glo = g
            if side == -1:
                ghi *= 0.5
            side = -1
        else:
            hi = th
            ghi = g
            if side == 1:
                glo *= 0.5
            side = 1
        # bisection safeguard keeps the bracket shrinking geometrically
        if it % 4 == 3:
            th = 0.5 * (lo + hi)
            dense(r, th, y)
            g = event_value(code, y, p)
            if (g > 0.0) == (glo > 0.0):
                lo = th
                glo = g
            else:
                hi = th
                ghi = g
    return 0.5 * (lo + hi)


cdef inline double wrms(const double* e, const double* y0, const double* y1, double rtol, double atol) noexcept nogil:
    cdef double acc = 0.0, sk, q
    cdef int i
    for i in range(4):
        sk = atol + rtol * fmax(fabs(y0[i]), fabs(y1[i]))
        q = e[i] / sk
        acc += q * q
    return sqrt(acc / 4.0)


cdef int grow(double** buf, Py_ssize_t* cap, Py_ssize_t need, int width) noexcept nogil:
    cdef Py_ssize_t newcap
    cdef double* nb
    if need <= cap[0]:
        return 0
    newcap = cap[0] * 2
    while newcap < need:
        newcap *= 2
    nb = <double*> realloc(buf[0], newcap * width * sizeof(double))
    if nb == NULL:
        return -1
    buf[0] = nb
    cap[0] = newcap
    return 0


def integrate(double[::1] y0, double[::1] params, double t_end, double rtol, double atol,
              double max_step, int event_mask, double blowup, long max_steps, double event_tol):
    """Integrate from t=0 to t_end.

    Returns ``(times, states, ev_times, ev_codes, ev_states, status, stats)``
    where status 0 = ok, 1 = step-size underflow, 2 = blowup, 3 = step budget
    exhausted, and stats = (nfev, naccept, nreject).
    """
    cdef double p[8]
    cdef double y[4]
    cdef double ynew[4]
    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef double k5[4]
    cdef double k6[4]
    cdef double k7[4]
    cdef double tmp[4]
    cdef double err[4]
    cdef double r[20]
    cdef double yev[4]
    cdef double d0, d1, d2, h0, h1, h, t, e, fac, fac11, facold, hnew, g0, g1, th, tev
    cdef double expo1 = 0.2 - 0.04 * 0.75
    cdef int i, code, status = 0, reject = 0, ok
    cdef long nfev = 0, nacc = 0, nrej = 0, nstep = 0
    cdef Py_ssize_t n = 0, nev = 0
    cdef Py_ssize_t tcap = 1024, scap = 1024, etcap = 256, eccap = 256, escap = 256
    cdef double* tbuf
    cdef double* sbuf
    cdef double* etbuf
    cdef double* esbuf
    cdef double* ecbuf

    for i in range(8):
        p[i] = params[i]
    for i in range(4):
        y[i] = y0[i]

    tbuf = <double*> malloc(tcap * sizeof(double))
    sbuf = <double*> malloc(scap * 4 * sizeof(double))
    etbuf = <double*> malloc(etcap * sizeof(double))
    ecbuf = <double*> malloc(eccap * sizeof(double))
    esbuf = <double*> malloc(escap * 4 * sizeof(double))
    if tbuf == NULL or sbuf == NULL or etbuf == NULL or ecbuf == NULL or esbuf == NULL:
        free(tbuf); free(sbuf); free(etbuf); free(ecbuf); free(esbuf)
        raise MemoryError()

    with nogil:
        t = 0.0
        tbuf[0] = t
        for i in range(4):
            sbuf[i] = y[i]
        n = 1

        field(y, p, k1)
        nfev += 1
        # initial step guess
        d0 = 0.0
        d1 = 0.0
        for i in range(4):
            e = atol + rtol * fabs(y[i])
            d0 += (y[i] / e) * (y[i] / e)
            d1 += (k1[i] / e) * (k1[i] / e)
        d0 = sqrt(d0 / 4.0)
        d1 = sqrt(d1 / 4.0)
        if d0 < 1e-5 or d1 < 1e-5:
            h0 = 1e-6
        else:
            h0 = 0.01 * d0 / d1
        h0 = fmin(h0, max_step)
        for i in range(4):
            tmp[i] = y[i] + h0 * k1[i]
        field(tmp, p, k2)
        nfev += 1
        d2 = 0.0
        for i in range(4):
            e = atol + rtol * fabs(y[i])
            d2 += ((k2[i] - k1[i]) / e) * ((k2[i] - k1[i]) / e)
        d2 = sqrt(d2 / 4.0) / h0
        if fmax(d1, d2) <= 1e-15:
            h1 = fmax(1e-6, h0 * 1e-3)
        else:
            h1 = pow(0.01 / fmax(d1, d2), 0.2)
        h = fmin(fmin(100.0 * h0, h1), max_step)
        h = fmin(h, t_end)

        facold = 1e-4
        while t < t_end:
            if nstep >= max_steps:
                status = 3
                break
            if h < 1e-13 * fmax(1.0, fabs(t)):
                status = 1
                break
            if t + 1.01 * h >= t_end:
                h = t_end - t
            nstep += 1

            for i in range(4):
                tmp[i] = y[i] + h * A21 * k1[i]
            field(tmp, p, k2)
            for i in range(4):
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
            field(tmp, p, k3)
            for i in range(4):
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            field(tmp, p, k4)
            for i in range(4):
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            field(tmp, p, k5)
            for i in range(4):
                tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            field(tmp, p, k6)
            for i in range(4):
                ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
            field(ynew, p, k7)
            nfev += 6
            for i in range(4):
                err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            e = wrms(err, y, ynew, rtol, atol)
            if e != e:
                e = 1e10

            fac11 = pow(e, expo1)
            fac = fac11 / pow(facold, 0.04)
            fac = fmax(0.1, fmin(5.0, fac / 0.9))
            hnew = h / fac

            if e <= 1.0:
                facold = fmax(e, 1e-4)
                nacc += 1
                # continuous extension of the accepted step
                for i in range(4):
                    r[i] = y[i]
                    r[4 + i] = ynew[i] - y[i]
                    r[8 + i] = h * k1[i] - r[4 + i]
                    r[12 + i] = r[4 + i] - h * k7[i] - r[8 + i]
                    r[16 + i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])

                for code in range(5):
                    if not (event_mask >> code) & 1:
                        continue
                    if code == EV_CROSS:
                        g0 = y[0] - y[2]
                        g1 = ynew[0] - ynew[2]
                        ok = (g0 < 0.0 and g1 >= 0.0) or (g0 > 0.0 and g1 <= 0.0)
                    elif code == EV_MAX_X1:
                        g0 = k1[0]
                        g1 = k7[0]
                        ok = g0 > 0.0 and g1 <= 0.0
                    elif code == EV_MAX_X2:
                        g0 = k1[2]
                        g1 = k7[2]
                        ok = g0 > 0.0 and g1 <= 0.0
                    elif code == EV_MIN_X1:
                        g0 = k1[0]
                        g1 = k7[0]
                        ok = g0 < 0.0 and g1 >= 0.0
                    else:
                        g0 = k1[2]
                        g1 = k7[2]
                        ok = g0 < 0.0 and g1 >= 0.0
                    if not ok:
                        continue
                    if g1 == 0.0:
                        th = 1.0
                    else:
                        th = locate(code, r, p, g0, g1, h, event_tol)
                    if (grow(&etbuf, &etcap, nev + 1, 1) != 0
                            or grow(&ecbuf, &eccap, nev + 1, 1) != 0
                            or grow(&esbuf, &escap, nev + 1, 4) != 0):
                        status = 4
                        break
                    dense(r, th, yev)
                    etbuf[nev] = t + th * h
                    ecbuf[nev] = code
                    for i in range(4):
                        esbuf[4 * nev + i] = yev[i]
                    nev += 1
                if status == 4:
                    break

                t = t + h
                if t_end - t < 1e-12 * fmax(1.0, t_end):
                    t = t_end
                for i in range(4):
                    y[i] = ynew[i]
                    k1[i] = k7[i]
                if grow(&tbuf, &tcap, n + 1, 1) != 0 or grow(&sbuf, &scap, n + 1, 4) != 0:
                    status = 4
                    break
                tbuf[n] = t
                for i in range(4):
                    sbuf[4 * n + i] = y[i]
                n += 1

                for i in range(4):
                    if not fabs(y[i]) <= blowup:
                        status = 2
                if status == 2:
                    break

                if hnew > max_step:
                    hnew = max_step
                if reject:
                    hnew = fmin(hnew, h)
                reject = 0
                h = hnew
            else:
                nrej += 1
                h = h / fmin(5.0, fac11 / 0.9)
                reject = 1

    if status == 4:
        free(tbuf); free(sbuf); free(etbuf); free(ecbuf); free(esbuf)
        raise MemoryError()

    times = np.empty(n, dtype=np.float64)
    states = np.empty((n, 4), dtype=np.float64)
    ev_t = np.empty(nev, dtype=np.float64)
    ev_c = np.empty(nev, dtype=np.int64)
    ev_s = np.empty((nev, 4), dtype=np.float64)
    cdef double[::1] tv = times
    cdef double[:, ::1] sv = states
    cdef double[::1] etv = ev_t
    cdef long[::1] ecv = ev_c
    cdef double[:, ::1] esv = ev_s
    cdef Py_ssize_t j
    for j in range(n):
        tv[j] = tbuf[j]
        for i in range(4):
            sv[j, i] = sbuf[4 * j + i]
    for j in range(nev):
        etv[j] = etbuf[j]
        ecv[j] = <long> ecbuf[j]
        for i in range(4):
            esv[j, i] = esbuf[4 * j + i]
    free(tbuf); free(sbuf); free(etbuf); free(ecbuf); free(esbuf)
    return times, states, ev_t, ev_c, ev_s, status, (nfev, nacc, nrej)
