# cython: language_level=3
"""Compiled kernels: scalar single-diode solves and the windowed median.

Each public function mirrors its counterpart in ``_pykernels`` and
loops over points in C instead of vectorizing across them.
"""
import numpy as np

from libc.math cimport exp, expm1, log, log1p, fabs, sqrt, isfinite, fmax
from libc.stdlib cimport malloc, free

cdef double GOLDEN_R = 0.5 * (sqrt(5.0) - 1.0)
cdef int MAX_ITER = 60
cdef int POLISH_STEPS = 4
cdef double W_STOP = 1e-6
cdef double POLISH_TOL = 1e-12
cdef double RESID_TOL = 1e-9
cdef double MPP_RTOL = 1e-6
cdef double LOG_SPLIT = 3.0


cdef double _lambertw_exp(double logx) noexcept nogil:
    cdef double x, q, w, ew, f, wp1, step, fp, fpp, ll
    cdef int k
    if logx < LOG_SPLIT:
        x = exp(logx)
        if x == 0.0:
            return 0.0
        # Winitzki's approximation as the starting point
        q = log1p(x)
        w = q * (1.0 - log1p(q) / (2.0 + q))
        for k in range(MAX_ITER):
            ew = exp(w)
            f = w * ew - x
            wp1 = w + 1.0
            step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
            w -= step
            if fabs(step) <= W_STOP * fabs(w):
                break
        return w
    ll = log(logx)
    w = logx - ll + ll / logx
    for k in range(MAX_ITER):
        f = w + log(w) - logx
        fp = 1.0 + 1.0 / w
        fpp = -1.0 / (w * w)
        step = f / fp / (1.0 - f * fpp / (2.0 * fp * fp))
        w -= step
        if fabs(step) <= W_STOP * fabs(w):
            break
    return w


cdef inline double _residual(double V, double I, double IL, double Io, double a,
                             double Rs, double Rsh) noexcept nogil:
    cdef double vd = V + I * Rs
    return IL - Io * expm1(vd / a) - vd / Rsh - I


cdef double _bisect_i(double V, double IL, double Io, double a, double Rs, double Rsh) noexcept nogil:
    cdef double lo = 0.0, hi = IL + Io, mid
    cdef int k
    for k in range(200):
        if _residual(V, lo, IL, Io, a, Rs, Rsh) >= 0:
            break
        lo = 2.0 * lo - IL - 1.0
    for k in range(200):
        mid = 0.5 * (lo + hi)
        if _residual(V, mid, IL, Io, a, Rs, Rsh) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


cdef double _i_from_v(double V, double IL, double Io, double a, double Rs, double Rsh) noexcept nogil:
    cdef double gsh, denom, logtheta, w, I, vd, e, g, dg
    cdef int k
    if Rs == 0.0:
        return IL - Io * expm1(V / a) - V / Rsh
    gsh = 1.0 / Rsh
    denom = 1.0 + Rs * gsh
    logtheta = log(Rs * Io / (a * denom)) + (Rs * (IL + Io) + V) / (a * denom)
    w = _lambertw_exp(logtheta)
    I = (IL + Io - V * gsh) / denom - (a / Rs) * w
    g = 0.0
    for k in range(POLISH_STEPS):
        vd = V + I * Rs
        e = exp(vd / a)
        g = IL - Io * (e - 1.0) - vd / Rsh - I
        if fabs(g) <= POLISH_TOL:
            break
        dg = -Io * e * Rs / a - Rs / Rsh - 1.0
        I -= g / dg
    if not isfinite(I) or not fabs(g) <= RESID_TOL:
        I = _bisect_i(V, IL, Io, a, Rs, Rsh)
    return I


cdef double _v_oc(double IL, double Io, double a, double Rsh) noexcept nogil:
    cdef double v, e, h, dh, step
    cdef int k
    if IL <= 0:
        return 0.0
    v = a * log1p(IL / Io)
    for k in range(MAX_ITER):
        e = exp(v / a)
        h = IL - Io * (e - 1.0) - v / Rsh
        dh = -Io * e / a - 1.0 / Rsh
        step = h / dh
        v -= step
        if fabs(step) <= 1e-14 * fmax(v, 1.0):
            break
    return v


cdef void _mpp(double IL, double Io, double a, double Rs, double Rsh, double* out) noexcept nogil:
    cdef double voc, lo, hi, c, d, fc, fd, tol, vmp, imp
    if IL <= 0:
        out[0] = 0.0; out[1] = 0.0; out[2] = 0.0; out[3] = 0.0; out[4] = 0.0
        return
    voc = _v_oc(IL, Io, a, Rsh)
    lo = 0.0
    hi = voc
    c = hi - GOLDEN_R * (hi - lo)
    d = lo + GOLDEN_R * (hi - lo)
    fc = c * _i_from_v(c, IL, Io, a, Rs, Rsh)
    fd = d * _i_from_v(d, IL, Io, a, Rs, Rsh)
    tol = MPP_RTOL * voc
    while hi - lo > tol:
        if fc > fd:
            hi = d
            d = c
            fd = fc
            c = hi - GOLDEN_R * (hi - lo)
            fc = c * _i_from_v(c, IL, Io, a, Rs, Rsh)
        else:
            lo = c
            c = d
            fc = fd
            d = lo + GOLDEN_R * (hi - lo)
            fd = d * _i_from_v(d, IL, Io, a, Rs, Rsh)
    vmp = 0.5 * (lo + hi)
    imp = _i_from_v(vmp, IL, Io, a, Rs, Rsh)
    out[0] = vmp
    out[1] = imp
    out[2] = vmp * imp
    out[3] = voc
    out[4] = _i_from_v(0.0, IL, Io, a, Rs, Rsh)


def _flat(*arrays):
    b = np.broadcast_arrays(*(np.asarray(x, dtype=np.float64) for x in arrays))
    shape = b[0].shape
    return shape, [np.ascontiguousarray(x).ravel() for x in b]


def lambertw_exp(logx):
    """Principal-branch Lambert W of ``exp(logx)``, elementwise."""
    shape, (lx,) = _flat(logx)
    cdef double[::1] src = lx
    out = np.empty(lx.shape[0])
    cdef double[::1] dst = out
    cdef Py_ssize_t i, n = lx.shape[0]
    with nogil:
        for i in range(n):
            dst[i] = _lambertw_exp(src[i])
    return out.reshape(shape)


def i_from_v(V, IL, Io, a, Rs, Rsh):
    """Current at terminal voltage V for the single-diode equation."""
    shape, (v, il, io, aa, rs, rsh) = _flat(V, IL, Io, a, Rs, Rsh)
    cdef double[::1] vv = v, ill = il, ioo = io, av = aa, rsv = rs, rshv = rsh
    out = np.empty(v.shape[0])
    cdef double[::1] dst = out
    cdef Py_ssize_t i, n = v.shape[0]
    with nogil:
        for i in range(n):
            dst[i] = _i_from_v(vv[i], ill[i], ioo[i], av[i], rsv[i], rshv[i])
    return out.reshape(shape)


def v_oc(IL, Io, a, Rsh):
    """Open-circuit voltage by monotone Newton iteration on the I = 0 residual."""
    shape, (il, io, aa, rsh) = _flat(IL, Io, a, Rsh)
    cdef double[::1] ill = il, ioo = io, av = aa, rshv = rsh
    out = np.empty(il.shape[0])
    cdef double[::1] dst = out
    cdef Py_ssize_t i, n = il.shape[0]
    with nogil:
        for i in range(n):
            dst[i] = _v_oc(ill[i], ioo[i], av[i], rshv[i])
    return out.reshape(shape)


def mpp(IL, Io, a, Rs, Rsh):
    """Maximum power point by golden-section search on V in [0, V_oc].

    Returns ``(v_mp, i_mp, p_mp, v_oc, i_sc)`` arrays.
    """
    shape, (il, io, aa, rs, rsh) = _flat(IL, Io, a, Rs, Rsh)
    cdef Py_ssize_t i, n = il.shape[0]
    cdef double[::1] ill = il, ioo = io, av = aa, rsv = rs, rshv = rsh
    res = np.empty((5, n))
    cdef double[:, ::1] r = res
    cdef double buf[5]
    with nogil:
        for i in range(n):
            _mpp(ill[i], ioo[i], av[i], rsv[i], rshv[i], buf)
            r[0, i] = buf[0]
            r[1, i] = buf[1]
            r[2, i] = buf[2]
            r[3, i] = buf[3]
            r[4, i] = buf[4]
    return tuple(res[k].reshape(shape) for k in range(5))


cdef void _insertion_sort(double* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, n):
        key = a[i]
        j = i - 1
        while j >= 0 and a[j] > key:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = key


def rolling_median(x, int window):
    """Centered moving median; the window is truncated at the series ends."""
    arr = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    cdef double[::1] src = arr
    cdef Py_ssize_t n = arr.shape[0], i, j, lo, hi, m
    cdef int left = window // 2
    cdef int right = window - 1 - left
    out = np.empty(n)
    cdef double[::1] dst = out
    cdef double* buf = <double*> malloc(max(window, 1) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                lo = i - left if i - left > 0 else 0
                hi = i + right + 1 if i + right + 1 < n else n
                m = hi - lo
                for j in range(m):
                    buf[j] = src[lo + j]
                _insertion_sort(buf, m)
                if m % 2 == 1:
                    dst[i] = buf[m // 2]
                else:
                    dst[i] = 0.5 * (buf[m // 2 - 1] + buf[m // 2])
    finally:
        free(buf)
    return out
