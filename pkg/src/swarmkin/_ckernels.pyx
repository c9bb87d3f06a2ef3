# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def abm_advance(double[::1] x, signed char[::1] v, const double[:, ::1] unif,
                double dt, double gamma0, double b, double radius):
    cdef Py_ssize_t n_steps = unif.shape[0], n = unif.shape[1]
    cdef Py_ssize_t t, i, m
    cdef long long total = 0, num, den, k
    cdef double u_glob, u_loc, diff, rate, d, xn
    u_trace_arr = np.empty(n_steps, dtype=np.float64)
    flips_arr = np.empty(n_steps, dtype=np.int64)
    cdef double[::1] u_trace = u_trace_arr
    cdef long long[::1] flips = flips_arr
    cdef signed char[::1] flip = np.zeros(n, dtype=np.int8)
    cdef double[::1] uloc = np.empty(n, dtype=np.float64)

    for i in range(n):
        total += v[i]
    for t in range(n_steps):
        if radius < 0.0:
            u_glob = <double>total / <double>n
            for i in range(n):
                uloc[i] = u_glob
        else:
            for i in range(n):
                num = 0
                den = 0
                for m in range(n):
                    d = x[i] - x[m]
                    if d < 0.0:
                        d = -d
                    if 1.0 - d < d:
                        d = 1.0 - d
                    if d <= radius:
                        num += v[m]
                        den += 1
                uloc[i] = <double>num / <double>den
        k = 0
        for i in range(n):
            diff = <double>v[i] - uloc[i]
            rate = gamma0 + b * (diff * diff)
            if unif[t, i] < rate * dt:
                flip[i] = 1
                k += 1
            else:
                flip[i] = 0
        if k:
            total = 0
            for i in range(n):
                if flip[i]:
                    v[i] = -v[i]
                total += v[i]
        for i in range(n):
            xn = x[i] + v[i] * dt
            if xn >= 1.0:
                xn = xn - 1.0
            if xn < 0.0:
                xn = xn + 1.0
            if xn >= 1.0:
                xn = 0.0
            x[i] = xn
        u_trace[t] = <double>total / <double>n
        flips[t] = k
    return u_trace_arr, flips_arr


def window_counts(double z, double radius, bint trailing, const double[::1] cdf,
                  const double[::1] plus_prob, const double[:, ::1] upos,
                  const double[:, ::1] uvel):
    cdef Py_ssize_t reps = upos.shape[0], n = upos.shape[1]
    cdef Py_ssize_t m_cells = plus_prob.shape[0]
    cdef Py_ssize_t r, i, lo_i, hi_i, mid, k
    cdef double u, lo, width, frac, x, d
    cdef long long c, s
    counts_arr = np.empty(reps, dtype=np.int64)
    sums_arr = np.empty(reps, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    cdef long long[::1] sums = sums_arr
    for r in range(reps):
        c = 0
        s = 0
        for i in range(n):
            u = upos[r, i]
            # number of cdf entries <= u, minus one (searchsorted side='right')
            lo_i = 0
            hi_i = m_cells + 1
            while lo_i < hi_i:
                mid = (lo_i + hi_i) >> 1
                if cdf[mid] <= u:
                    lo_i = mid + 1
                else:
                    hi_i = mid
            k = lo_i - 1
            if k < 0:
                k = 0
            elif k > m_cells - 1:
                k = m_cells - 1
            lo = cdf[k]
            width = cdf[k + 1] - lo
            if width > 0.0:
                frac = (u - lo) / width
            else:
                frac = 0.0
            x = (k + frac) / m_cells
            if trailing:
                d = z - x
                if d < 0.0:
                    d = d + 1.0
            else:
                d = x - z
                if d < 0.0:
                    d = -d
                if 1.0 - d < d:
                    d = 1.0 - d
            if d <= radius:
                c += 1
                if uvel[r, i] < plus_prob[k]:
                    s += 1
                else:
                    s -= 1
        counts[r] = c
        sums[r] = s
    return counts_arr, sums_arr
