# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path kernels. Same contracts and random streams as ``_pykernel``."""

from libc.math cimport sqrt, log, cos, sin, atan2, pow, floor, M_PI
from libc.stdint cimport uint64_t, int64_t

cdef enum:
    MAXD = 16

cdef struct ConeC:
    int kind
    int d
    int product
    double angle
    double ca
    double sa
    double cos_t0
    double p
    double dtheta
    const double* table
    int ntable

cdef struct LawC:
    int kind
    int d
    int dps
    double tail
    double scale


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t draw(uint64_t key, uint64_t counter) noexcept nogil:
    return mix64(key + (counter + 1) * <uint64_t>0x9E3779B97F4A7C15ULL)


cdef inline double to_unit(uint64_t bits) noexcept nogil:
    return (<double>(bits >> 11) + 1.0) * 1.1102230246251565e-16


cdef inline bint contains(const ConeC* c, const double* x) noexcept nogil:
    cdef int i
    cdef double r2, below
    if c.kind == 0 or c.kind == 1:
        return x[c.d - 1] > 0
    if c.kind == 3:
        for i in range(c.d):
            if not x[i] > 0:
                return False
        return True
    if c.kind == 2:
        below = x[0] * c.sa - x[1] * c.ca
        if c.angle <= M_PI:
            return x[1] > 0 and below > 0
        return x[1] > 0 or below > 0
    r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
    return r2 > 0 and x[2] > c.cos_t0 * sqrt(r2)


cdef inline double u_value(const ConeC* c, const double* x) noexcept nogil:
    cdef int i
    cdef double v, r, th, idx, frac
    cdef int j
    if not contains(c, x):
        return 0.0
    if c.kind == 0 or c.kind == 1:
        return x[c.d - 1]
    if c.product:
        v = 1.0
        for i in range(c.d):
            v *= x[i]
        return v
    if c.kind == 2:
        r = sqrt(x[0] * x[0] + x[1] * x[1])
        th = atan2(x[1], x[0])
        if th < 0:
            th += 2.0 * M_PI
        return pow(r, c.p) * sin(c.p * th)
    r = sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    th = atan2(sqrt(x[0] * x[0] + x[1] * x[1]), x[2])
    idx = th / c.dtheta
    j = <int>floor(idx)
    if j >= c.ntable - 1:
        return 0.0
    frac = idx - j
    return pow(r, c.p) * (c.table[j] + (c.table[j + 1] - c.table[j]) * frac)


cdef inline void law_step(const LawC* law, uint64_t key, int64_t t, double* out) noexcept nogil:
    cdef uint64_t c0 = <uint64_t>((t - 1) * law.dps)
    cdef uint64_t bits
    cdef int j, k, npairs
    cdef double u1, u2, r, norm2, mag
    cdef double buf[MAXD + 1]
    if law.kind == 1:
        bits = draw(key, c0)
        for j in range(law.d):
            out[j] = <double>((bits >> j) & 1) * 2.0 - 1.0
        return
    if law.kind == 3:
        for j in range(law.d):
            bits = draw(key, c0 + j)
            mag = pow(to_unit(bits), -1.0 / law.tail) - 1.0
            out[j] = (<double>(bits & 1) * 2.0 - 1.0) * mag * law.scale
        return
    if law.kind == 2 and law.d == 1:
        bits = draw(key, c0)
        out[0] = <double>(bits & 1) * 2.0 - 1.0
        return
    npairs = (law.d + 1) // 2
    for k in range(npairs):
        u1 = to_unit(draw(key, c0 + 2 * k))
        u2 = to_unit(draw(key, c0 + 2 * k + 1))
        r = sqrt(-2.0 * log(u1))
        buf[2 * k] = r * cos(2.0 * M_PI * u2)
        buf[2 * k + 1] = r * sin(2.0 * M_PI * u2)
    if law.kind == 2:
        norm2 = 0.0
        for j in range(law.d):
            norm2 += buf[j] * buf[j]
        r = sqrt(<double>law.d) / sqrt(norm2)
        for j in range(law.d):
            out[j] = buf[j] * r
    else:
        for j in range(law.d):
            out[j] = buf[j]


cdef ConeC make_cone(tuple args, const double[::1] table):
    cdef ConeC c
    c.kind, c.d, c.product, c.angle, c.p, c.dtheta = args
    c.ca = cos(c.angle)
    c.sa = sin(c.angle)
    c.cos_t0 = cos(c.angle)
    c.table = &table[0]
    c.ntable = table.shape[0]
    return c


cdef LawC make_law(tuple args):
    cdef LawC law
    law.kind, law.d, law.dps, law.tail, law.scale = args
    return law


def simulate(tuple cone_args, const double[::1] table, tuple law_args,
             const double[:, ::1] starts, const uint64_t[::1] keys,
             const int64_t[::1] checkpoints, int64_t[::1] tau_out,
             double[:, :, ::1] pos_out, double[:, ::1] max_out):
    """Walk every path to exit or to the last checkpoint, recording checkpoint summaries."""
    cdef ConeC cone = make_cone(cone_args, table)
    cdef LawC law = make_law(law_args)
    cdef Py_ssize_t n = keys.shape[0]
    cdef Py_ssize_t ncp = checkpoints.shape[0]
    cdef int d = cone.d
    cdef int64_t horizon = checkpoints[ncp - 1]
    cdef bint broadcast = starts.shape[0] == 1
    cdef Py_ssize_t i, c, cc
    cdef int j
    cdef int64_t t
    cdef bint exited
    cdef double m2, r2, m
    cdef double x[MAXD]
    cdef double dx[MAXD]
    if d > MAXD:
        raise ValueError("dimension too large for the compiled kernel")
    with nogil:
        for i in range(n):
            for j in range(d):
                x[j] = starts[0 if broadcast else i, j]
            m2 = 0.0
            for j in range(d):
                m2 += x[j] * x[j]
            t = 0
            c = 0
            exited = False
            while c < ncp:
                while t < checkpoints[c]:
                    t += 1
                    law_step(&law, keys[i], t, dx)
                    r2 = 0.0
                    for j in range(d):
                        x[j] += dx[j]
                        r2 += x[j] * x[j]
                    if r2 > m2:
                        m2 = r2
                    if not contains(&cone, x):
                        exited = True
                        break
                if exited:
                    break
                for j in range(d):
                    pos_out[i, c, j] = x[j]
                max_out[i, c] = sqrt(m2)
                c += 1
            m = sqrt(m2)
            if exited:
                tau_out[i] = t
                for cc in range(c, ncp):
                    for j in range(d):
                        pos_out[i, cc, j] = x[j]
                    max_out[i, cc] = m
            else:
                tau_out[i] = horizon + 1


def decompose(tuple cone_args, const double[::1] table, tuple law_args,
              const double[::1] start, const uint64_t[::1] keys,
              const double[:, ::1] shifts, const int64_t[::1] checkpoints,
              double[:, ::1] w1_out, double[:, ::1] w2_out, double[:, ::1] w3_out,
              double[:, ::1] lhs_out, int64_t[::1] tau_out):
    """Per-path exit, shift-telescoping and step-telescoping sums of the shifted walk."""
    cdef ConeC cone = make_cone(cone_args, table)
    cdef LawC law = make_law(law_args)
    cdef Py_ssize_t n = keys.shape[0]
    cdef Py_ssize_t ncp = checkpoints.shape[0]
    cdef int d = cone.d
    cdef int64_t kmax = checkpoints[ncp - 1]
    cdef Py_ssize_t i, c, cc
    cdef int j
    cdef int64_t l
    cdef bint exited
    cdef double a, b, prev, w1, w2, w3, u0
    cdef double y[MAXD]
    cdef double dy[MAXD]
    cdef double z[MAXD]
    if d > MAXD:
        raise ValueError("dimension too large for the compiled kernel")
    with nogil:
        for j in range(d):
            z[j] = start[j] + shifts[0, j]
        u0 = u_value(&cone, z)
        for i in range(n):
            for j in range(d):
                y[j] = start[j]
            prev = u0
            w1 = 0.0
            w2 = 0.0
            w3 = 0.0
            a = u0
            c = 0
            exited = False
            while c < ncp and checkpoints[c] == 0:
                w1_out[i, c] = 0.0
                w2_out[i, c] = 0.0
                w3_out[i, c] = 0.0
                lhs_out[i, c] = u0
                c += 1
            l = 0
            while l < kmax:
                l += 1
                law_step(&law, keys[i], l, dy)
                for j in range(d):
                    y[j] += dy[j]
                    z[j] = y[j] + shifts[l - 1, j]
                b = u_value(&cone, z)
                for j in range(d):
                    z[j] = y[j] + shifts[l, j]
                a = u_value(&cone, z)
                w2 += a - b
                w3 += b - prev
                prev = a
                if not contains(&cone, y):
                    exited = True
                    w1 = a
                    break
                if l == checkpoints[c]:
                    w1_out[i, c] = 0.0
                    w2_out[i, c] = w2
                    w3_out[i, c] = w3
                    lhs_out[i, c] = a
                    c += 1
            if exited:
                tau_out[i] = l
                for cc in range(c, ncp):
                    w1_out[i, cc] = w1
                    w2_out[i, cc] = w2
                    w3_out[i, cc] = w3
                    lhs_out[i, cc] = 0.0
            else:
                tau_out[i] = kmax + 1
