#cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Euler stepper.

Mirrors ``affinelab.sde._python_backend`` operation-for-operation: the same
draw order against the same bit-generator streams and the same floating
point evaluation order (the build disables FP contraction), so trajectories
are bit-identical across the two backends.  See the Python module for the
step protocol documentation; this file intentionally contains no
independent algorithmic decisions.
"""

from libc.math cimport fabs, pow, sqrt
from libc.stdlib cimport free, malloc

from cpython.pycapsule cimport PyCapsule_GetPointer

import numpy as np

from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_poisson,
    random_standard_normal,
    random_standard_uniform,
)

NAME = "compiled"

DEF OVERFLOW_GUARD = 1e12
DEF MAX_STEP_INTENSITY = 1e7


cdef class KSampler:
    """Flattened truncated-jump sampler tables (see levy.PreparedSampler)."""
    cdef int ncomp
    cdef int[::1] kinds
    cdef double[::1] sel_cum
    cdef int[::1] st_axis
    cdef double[::1] st_sign
    cdef double[::1] st_floor
    cdef double[::1] st_nig
    cdef int[::1] at_off
    cdef double[::1] at_cum
    cdef double[:, ::1] at_xi
    cdef int[::1] tb_off
    cdef int[::1] tb_axis
    cdef double[::1] tb_cdf
    cdef double[::1] tb_z
    cdef double[::1] tb_rho

    def __init__(self, prepared):
        self.ncomp = prepared.n_components
        self.kinds = np.ascontiguousarray(prepared.kinds, dtype=np.int32)
        self.sel_cum = np.ascontiguousarray(prepared.sel_cum, dtype=np.float64)
        self.st_axis = np.ascontiguousarray(prepared.st_axis, dtype=np.int32)
        self.st_sign = np.ascontiguousarray(prepared.st_sign, dtype=np.float64)
        self.st_floor = np.ascontiguousarray(prepared.st_floor, dtype=np.float64)
        self.st_nig = np.ascontiguousarray(prepared.st_neg_inv_gamma, dtype=np.float64)
        self.at_off = np.ascontiguousarray(prepared.at_off, dtype=np.int32)
        self.at_cum = np.ascontiguousarray(prepared.at_cum, dtype=np.float64)
        self.at_xi = np.ascontiguousarray(prepared.at_xi, dtype=np.float64)
        self.tb_off = np.ascontiguousarray(prepared.tb_off, dtype=np.int32)
        self.tb_axis = np.ascontiguousarray(prepared.tb_axis, dtype=np.int32)
        self.tb_cdf = np.ascontiguousarray(prepared.tb_cdf, dtype=np.float64)
        self.tb_z = np.ascontiguousarray(prepared.tb_z, dtype=np.float64)
        self.tb_rho = np.ascontiguousarray(prepared.tb_rho, dtype=np.float64)


cdef void ksample(KSampler s, bitgen_t *rng, double *xi, Py_ssize_t d) noexcept nogil:
    cdef double u1 = random_standard_uniform(rng)
    cdef double u2 = random_standard_uniform(rng)
    cdef Py_ssize_t c = 0, j, lo, hi, r
    cdef double z, z0, dz, r0, slope, p, disc, t
    while c < s.ncomp - 1 and s.sel_cum[c] < u1:
        c += 1
    for r in range(d):
        xi[r] = 0.0
    if s.kinds[c] == 0:
        lo = s.at_off[c]
        hi = s.at_off[c + 1]
        j = lo
        while j < hi - 1 and s.at_cum[j] < u2:
            j += 1
        for r in range(d):
            xi[r] = s.at_xi[j, r]
    elif s.kinds[c] == 1:
        z = s.st_floor[c] * pow(1.0 - u2, s.st_nig[c])
        xi[s.st_axis[c]] = s.st_sign[c] * z
    else:
        lo = s.tb_off[c]
        hi = s.tb_off[c + 1]
        j = lo
        while j < hi - 2 and s.tb_cdf[j + 1] <= u2:
            j += 1
        z0 = s.tb_z[j]
        dz = s.tb_z[j + 1] - z0
        r0 = s.tb_rho[j]
        slope = (s.tb_rho[j + 1] - r0) / dz
        p = u2 - s.tb_cdf[j]
        disc = r0 * r0 + 2.0 * slope * p
        if fabs(slope) * dz <= 1e-13 * (r0 + 1e-300) or disc <= 0.0:
            t = p / r0 if r0 > 0.0 else 0.0
        else:
            t = (sqrt(disc) - r0) / slope
        if t > dz:
            t = dz
        xi[s.tb_axis[c]] = z0 + t


cdef class KernelModel:
    """Stepping tables bound to typed memoryviews for the nogil loop."""
    cdef Py_ssize_t m, n, d
    cdef bint use_common, use_nu
    cdef double nu_rate
    cdef double[::1] drift_c
    cdef double[:, ::1] drift_B
    cdef double[:, ::1] sigma_a
    cdef double[:, :, ::1] sigma
    cdef unsigned char[::1] use_diff
    cdef double[::1] mu_rate
    cdef KSampler nu_sampler
    cdef list mu_samplers

    def __init__(self, model):
        self.m = model.m
        self.n = model.n
        self.d = model.d
        self.use_common = model.use_common
        self.nu_rate = model.nu_rate
        self.use_nu = model.nu_rate > 0.0
        self.drift_c = np.ascontiguousarray(model.drift_c, dtype=np.float64)
        self.drift_B = np.ascontiguousarray(model.drift_B, dtype=np.float64)
        self.sigma_a = np.ascontiguousarray(model.sigma_a, dtype=np.float64)
        self.sigma = np.ascontiguousarray(model.sigma, dtype=np.float64)
        self.use_diff = np.ascontiguousarray(model.use_diff, dtype=np.uint8)
        self.mu_rate = np.ascontiguousarray(model.mu_rate, dtype=np.float64)
        self.nu_sampler = KSampler(model.nu_sampler) if model.nu_sampler is not None else None
        self.mu_samplers = [
            KSampler(s) if s is not None else None for s in model.mu_samplers
        ]


cdef bitgen_t *_bitgen(obj):
    return <bitgen_t *> PyCapsule_GetPointer(obj.capsule, "BitGenerator")


def run_path(KernelModel km, double[::1] x0, double h, Py_ssize_t n_steps,
             streams, long[::1] rec_steps, double[:, ::1] out):
    """Compiled twin of ``_python_backend.run_path`` (no jump log support)."""
    cdef Py_ssize_t m = km.m, n = km.n, d = km.d
    cdef Py_ssize_t i, k, r, s, rec_pos = 0, n_rec = rec_steps.shape[0]
    cdef double acc, coef, yi, lam, sq2h = sqrt(2.0 * h)
    cdef long cnt, j
    cdef double explosion = -1.0

    cdef bitgen_t *gb = _bitgen(streams["B"]) if streams["B"] is not None else NULL
    cdef bitgen_t *gm = _bitgen(streams["M"]) if streams["M"] is not None else NULL
    cdef bitgen_t **gw = <bitgen_t **> malloc(max(m, 1) * sizeof(void *))
    cdef bitgen_t **gn = <bitgen_t **> malloc(max(m, 1) * sizeof(void *))
    cdef double *x = <double *> malloc(d * sizeof(double))
    cdef double *new = <double *> malloc(d * sizeof(double))
    cdef double *zb = <double *> malloc(max(n, 1) * sizeof(double))
    cdef double *zw = <double *> malloc(d * sizeof(double))
    cdef double *xi = <double *> malloc(d * sizeof(double))
    cdef KSampler nus = km.nu_sampler
    cdef KSampler mus_i
    # per-coordinate sampler handles pulled out of the Python list up front
    cdef void **mus = <void **> malloc(max(m, 1) * sizeof(void *))
    try:
        for i in range(m):
            gw[i] = _bitgen(streams["W"][i]) if streams["W"][i] is not None else NULL
            gn[i] = _bitgen(streams["N"][i]) if streams["N"][i] is not None else NULL
            mus[i] = <void *> km.mu_samplers[i] if km.mu_samplers[i] is not None else NULL
        for r in range(d):
            x[r] = x0[r]
        if rec_pos < n_rec and rec_steps[rec_pos] == 0:
            for r in range(d):
                out[rec_pos, r] = x[r]
            rec_pos += 1
        with nogil:
            for k in range(n_steps):
                for r in range(d):
                    acc = km.drift_c[r]
                    for s in range(d):
                        acc += km.drift_B[r, s] * x[s]
                    new[r] = x[r] + h * acc
                if km.use_common:
                    for s in range(n):
                        zb[s] = random_standard_normal(gb)
                    for r in range(n):
                        acc = 0.0
                        for s in range(n):
                            acc += km.sigma_a[r, s] * zb[s]
                        new[m + r] += sq2h * acc
                for i in range(m):
                    if not km.use_diff[i]:
                        continue
                    for s in range(d):
                        zw[s] = random_standard_normal(gw[i])
                    yi = x[i] if x[i] > 0.0 else 0.0
                    coef = sqrt(2.0 * h * yi)
                    if coef > 0.0:
                        for r in range(d):
                            acc = 0.0
                            for s in range(d):
                                acc += km.sigma[i, r, s] * zw[s]
                            new[r] += coef * acc
                if km.use_nu:
                    cnt = random_poisson(gm, h * km.nu_rate)
                    for j in range(cnt):
                        ksample(nus, gm, xi, d)
                        for r in range(d):
                            new[r] += xi[r]
                for i in range(m):
                    if km.mu_rate[i] <= 0.0:
                        continue
                    yi = x[i] if x[i] > 0.0 else 0.0
                    lam = h * km.mu_rate[i] * yi
                    if lam > MAX_STEP_INTENSITY:
                        explosion = (k + 1) * h
                        break
                    if lam > 0.0:
                        cnt = random_poisson(gn[i], lam)
                        for j in range(cnt):
                            ksample(<KSampler> mus[i], gn[i], xi, d)
                            for r in range(d):
                                new[r] += xi[r]
                if explosion >= 0.0:
                    break
                for i in range(m):
                    if new[i] < 0.0:
                        new[i] = 0.0
                for r in range(d):
                    if not (-OVERFLOW_GUARD < new[r] < OVERFLOW_GUARD):
                        explosion = (k + 1) * h
                        break
                if explosion >= 0.0:
                    break
                for r in range(d):
                    x[r] = new[r]
                if rec_pos < n_rec and rec_steps[rec_pos] == k + 1:
                    for r in range(d):
                        out[rec_pos, r] = x[r]
                    rec_pos += 1
    finally:
        free(gw); free(gn); free(x); free(new); free(zb); free(zw); free(xi); free(mus)
    return explosion if explosion >= 0.0 else None


def run_pair(KernelModel km, double[::1] x0a, double[::1] x0b, double h,
             Py_ssize_t n_steps, streams, long[::1] rec_steps,
             double[:, ::1] out_a, double[:, ::1] out_b):
    """Compiled twin of ``_python_backend.run_pair``."""
    cdef Py_ssize_t m = km.m, n = km.n, d = km.d
    cdef Py_ssize_t i, k, r, s, rec_pos = 0, n_rec = rec_steps.shape[0]
    cdef double acc, acc_a, acc_b, ca, cb, ya, yb, ymax, lam, r_mark
    cdef double sq2h = sqrt(2.0 * h)
    cdef long cnt, j
    cdef double explosion = -1.0

    cdef bitgen_t *gb = _bitgen(streams["B"]) if streams["B"] is not None else NULL
    cdef bitgen_t *gm = _bitgen(streams["M"]) if streams["M"] is not None else NULL
    cdef bitgen_t **gw = <bitgen_t **> malloc(max(m, 1) * sizeof(void *))
    cdef bitgen_t **gn = <bitgen_t **> malloc(max(m, 1) * sizeof(void *))
    cdef double *xa = <double *> malloc(d * sizeof(double))
    cdef double *xb = <double *> malloc(d * sizeof(double))
    cdef double *na = <double *> malloc(d * sizeof(double))
    cdef double *nb = <double *> malloc(d * sizeof(double))
    cdef double *zb = <double *> malloc(max(n, 1) * sizeof(double))
    cdef double *zw = <double *> malloc(d * sizeof(double))
    cdef double *xi = <double *> malloc(d * sizeof(double))
    cdef KSampler nus = km.nu_sampler
    cdef void **mus = <void **> malloc(max(m, 1) * sizeof(void *))
    try:
        for i in range(m):
            gw[i] = _bitgen(streams["W"][i]) if streams["W"][i] is not None else NULL
            gn[i] = _bitgen(streams["N"][i]) if streams["N"][i] is not None else NULL
            mus[i] = <void *> km.mu_samplers[i] if km.mu_samplers[i] is not None else NULL
        for r in range(d):
            xa[r] = x0a[r]
            xb[r] = x0b[r]
        if rec_pos < n_rec and rec_steps[rec_pos] == 0:
            for r in range(d):
                out_a[rec_pos, r] = xa[r]
                out_b[rec_pos, r] = xb[r]
            rec_pos += 1
        with nogil:
            for k in range(n_steps):
                for r in range(d):
                    acc_a = km.drift_c[r]
                    acc_b = km.drift_c[r]
                    for s in range(d):
                        acc_a += km.drift_B[r, s] * xa[s]
                        acc_b += km.drift_B[r, s] * xb[s]
                    na[r] = xa[r] + h * acc_a
                    nb[r] = xb[r] + h * acc_b
                if km.use_common:
                    for s in range(n):
                        zb[s] = random_standard_normal(gb)
                    for r in range(n):
                        acc = 0.0
                        for s in range(n):
                            acc += km.sigma_a[r, s] * zb[s]
                        na[m + r] += sq2h * acc
                        nb[m + r] += sq2h * acc
                for i in range(m):
                    if not km.use_diff[i]:
                        continue
                    for s in range(d):
                        zw[s] = random_standard_normal(gw[i])
                    ya = xa[i] if xa[i] > 0.0 else 0.0
                    yb = xb[i] if xb[i] > 0.0 else 0.0
                    ca = sqrt(2.0 * h * ya)
                    cb = sqrt(2.0 * h * yb)
                    for r in range(d):
                        acc = 0.0
                        for s in range(d):
                            acc += km.sigma[i, r, s] * zw[s]
                        if ca > 0.0:
                            na[r] += ca * acc
                        if cb > 0.0:
                            nb[r] += cb * acc
                if km.use_nu:
                    cnt = random_poisson(gm, h * km.nu_rate)
                    for j in range(cnt):
                        ksample(nus, gm, xi, d)
                        for r in range(d):
                            na[r] += xi[r]
                            nb[r] += xi[r]
                for i in range(m):
                    if km.mu_rate[i] <= 0.0:
                        continue
                    ya = xa[i] if xa[i] > 0.0 else 0.0
                    yb = xb[i] if xb[i] > 0.0 else 0.0
                    ymax = ya if ya > yb else yb
                    lam = h * km.mu_rate[i] * ymax
                    if lam > MAX_STEP_INTENSITY:
                        explosion = (k + 1) * h
                        break
                    if lam > 0.0:
                        cnt = random_poisson(gn[i], lam)
                        for j in range(cnt):
                            ksample(<KSampler> mus[i], gn[i], xi, d)
                            r_mark = random_standard_uniform(gn[i]) * ymax
                            if r_mark <= ya:
                                for r in range(d):
                                    na[r] += xi[r]
                            if r_mark <= yb:
                                for r in range(d):
                                    nb[r] += xi[r]
                if explosion >= 0.0:
                    break
                for i in range(m):
                    if na[i] < 0.0:
                        na[i] = 0.0
                    if nb[i] < 0.0:
                        nb[i] = 0.0
                for r in range(d):
                    if not (-OVERFLOW_GUARD < na[r] < OVERFLOW_GUARD) or not (
                        -OVERFLOW_GUARD < nb[r] < OVERFLOW_GUARD
                    ):
                        explosion = (k + 1) * h
                        break
                if explosion >= 0.0:
                    break
                for r in range(d):
                    xa[r] = na[r]
                    xb[r] = nb[r]
                if rec_pos < n_rec and rec_steps[rec_pos] == k + 1:
                    for r in range(d):
                        out_a[rec_pos, r] = xa[r]
                        out_b[rec_pos, r] = xb[r]
                    rec_pos += 1
    finally:
        free(gw); free(gn); free(xa); free(xb); free(na); free(nb)
        free(zb); free(zw); free(xi); free(mus)
    return explosion if explosion >= 0.0 else None
