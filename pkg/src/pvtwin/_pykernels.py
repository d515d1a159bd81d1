"""NumPy implementations of the numerical kernels.

Same contract as the compiled ``_ckernels`` module; used when the
extension is unavailable or ``PVTWIN_PURE_PYTHON`` is set.
"""
import numpy as np

GOLDEN = 0.5 * (3.0 - np.sqrt(5.0))
MAX_ITER = 60
# Halley converges cubically: a relative step below this leaves ~1e-18 error
W_STOP = 1e-6
POLISH_STEPS = 4
POLISH_TOL = 1e-12
RESID_TOL = 1e-9
MPP_RTOL = 1e-6
# exp() is safe below this; above, the Lambert W argument is handled in log space
LOG_SPLIT = 3.0


def lambertw_exp(logx):
    """Principal-branch Lambert W of ``exp(logx)``, elementwise.

    Small arguments use Halley's iteration on ``w e^w - x`` from
    Winitzki's approximation; large ones solve ``w + ln w = logx`` so the
    argument never has to be formed.
    """
    logx = np.asarray(logx, dtype=float)
    w = np.empty_like(logx)
    small = logx < LOG_SPLIT
    if np.any(small):
        x = np.exp(logx[small])
        q = np.log1p(x)
        ws = q * (1.0 - np.log1p(q) / (2.0 + q))
        pos = x > 0
        for _ in range(MAX_ITER):
            ew = np.exp(ws)
            f = ws * ew - x
            wp1 = ws + 1.0
            step = f / (ew * wp1 - (ws + 2.0) * f / (2.0 * wp1))
            ws = np.where(pos, ws - step, 0.0)
            if np.all(np.abs(step) <= W_STOP * np.abs(ws)):
                break
        w[small] = ws
    big = ~small
    if np.any(big):
        L = logx[big]
        lnL = np.log(L)
        wb = L - lnL + lnL / L
        for _ in range(MAX_ITER):
            f = wb + np.log(wb) - L
            fp = 1.0 + 1.0 / wb
            fpp = -1.0 / (wb * wb)
            step = f / fp / (1.0 - f * fpp / (2.0 * fp * fp))
            wb = wb - step
            if np.all(np.abs(step) <= W_STOP * np.abs(wb)):
                break
        w[big] = wb
    return w


def _residual(V, I, IL, Io, a, Rs, Rsh):
    vd = V + I * Rs
    return IL - Io * np.expm1(vd / a) - vd / Rsh - I


def _polish(V, I, IL, Io, a, Rs, Rsh):
    """Newton steps on the residual; returns the current and its last residual."""
    g = np.zeros_like(I)
    active = np.ones(I.shape, dtype=bool)
    for _ in range(POLISH_STEPS):
        vd = V + I * Rs
        e = np.exp(vd / a)
        g = np.where(active, IL - Io * (e - 1.0) - vd / Rsh - I, g)
        active &= ~(np.abs(g) <= POLISH_TOL)
        if not np.any(active):
            break
        dg = -Io * e * Rs / a - Rs / Rsh - 1.0
        I = np.where(active, I - g / dg, I)
    return I, g


def _bisect_i(V, IL, Io, a, Rs, Rsh):
    lo = np.zeros_like(V)
    # the residual decreases in I; push the lower bound down until it is positive
    for _ in range(200):
        bad = _residual(V, lo, IL, Io, a, Rs, Rsh) < 0
        if not np.any(bad):
            break
        lo = np.where(bad, 2.0 * lo - IL - 1.0, lo)
    hi = IL + Io + np.zeros_like(V)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pos = _residual(V, mid, IL, Io, a, Rs, Rsh) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return 0.5 * (lo + hi)


def i_from_v(V, IL, Io, a, Rs, Rsh):
    """Current at terminal voltage V for the single-diode equation."""
    V, IL, Io, a, Rs, Rsh = np.broadcast_arrays(*(np.asarray(x, dtype=float)
                                                  for x in (V, IL, Io, a, Rs, Rsh)))
    I = np.empty(V.shape)
    ideal = Rs == 0.0
    if np.any(ideal):
        v = V[ideal]
        I[ideal] = IL[ideal] - Io[ideal] * np.expm1(v / a[ideal]) - v / Rsh[ideal]
    lw = ~ideal
    if np.any(lw):
        v, il, io, aa, rs, rsh = (x[lw] for x in (V, IL, Io, a, Rs, Rsh))
        gsh = 1.0 / rsh
        denom = 1.0 + rs * gsh
        logtheta = (np.log(rs * io / (aa * denom))
                    + (rs * (il + io) + v) / (aa * denom))
        w = lambertw_exp(logtheta)
        i = (il + io - v * gsh) / denom - (aa / rs) * w
        i, g = _polish(v, i, il, io, aa, rs, rsh)
        bad = ~np.isfinite(i) | ~(np.abs(g) <= RESID_TOL)
        if np.any(bad):
            i[bad] = _bisect_i(v[bad], il[bad], io[bad], aa[bad], rs[bad], rsh[bad])
        I[lw] = i
    return I


def v_oc(IL, Io, a, Rsh):
    """Open-circuit voltage by monotone Newton iteration on the I = 0 residual."""
    IL, Io, a, Rsh = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (IL, Io, a, Rsh)))
    v = a * np.log1p(IL / Io)
    for _ in range(MAX_ITER):
        e = np.exp(v / a)
        h = IL - Io * (e - 1.0) - v / Rsh
        dh = -Io * e / a - 1.0 / Rsh
        step = h / dh
        v = v - step
        if np.all(np.abs(step) <= 1e-14 * np.maximum(v, 1.0)):
            break
    return np.where(IL > 0, v, 0.0)


def mpp(IL, Io, a, Rs, Rsh):
    """Maximum power point by golden-section search on V in [0, V_oc].

    Returns ``(v_mp, i_mp, p_mp, v_oc, i_sc)`` arrays. Points with
    non-positive photocurrent return zeros.
    """
    IL, Io, a, Rs, Rsh = np.broadcast_arrays(*(np.asarray(x, dtype=float)
                                               for x in (IL, Io, a, Rs, Rsh)))
    IL = np.array(IL)
    lit = IL > 0
    voc = v_oc(np.where(lit, IL, 1.0), Io, a, Rsh)
    isc = i_from_v(0.0, np.where(lit, IL, 1.0), Io, a, Rs, Rsh)

    IL_s = np.where(lit, IL, 1.0)

    def power(v):
        return v * i_from_v(v, IL_s, Io, a, Rs, Rsh)

    r = 1.0 - GOLDEN
    lo = np.zeros_like(voc)
    hi = voc.copy()
    c = hi - r * (hi - lo)
    d = lo + r * (hi - lo)
    fc, fd = power(c), power(d)
    tol = MPP_RTOL * voc
    while not np.all(hi - lo <= tol):
        left = fc > fd  # maximum bracketed by [lo, d]
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        probe = np.where(left, hi - r * (hi - lo), lo + r * (hi - lo))
        fp = power(probe)
        c, d = np.where(left, probe, d), np.where(left, c, probe)
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
    vmp = 0.5 * (lo + hi)
    imp = i_from_v(vmp, IL_s, Io, a, Rs, Rsh)
    out = [vmp, imp, vmp * imp, voc, isc]
    return tuple(np.where(lit, x, 0.0) for x in out)


def rolling_median(x, window):
    """Centered moving median; the window is truncated at the series ends."""
    x = np.asarray(x, dtype=float)
    n = x.size
    left = window // 2
    right = window - 1 - left
    out = np.empty(n)
    if n >= window:
        core = np.lib.stride_tricks.sliding_window_view(x, window)
        out[left:n - right] = np.median(core, axis=1)
        edges = list(range(min(left, n))) + list(range(max(n - right, 0), n))
    else:
        edges = range(n)
    for i in edges:
        out[i] = np.median(x[max(0, i - left):min(n, i + right + 1)])
    return out
