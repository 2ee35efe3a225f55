"""Hot inner loops: stochastic Heun integration and stream filtering.

Every kernel exists twice, a numba ``@njit`` version and a vectorised numpy
version with identical arithmetic.  The public aliases at the bottom pick one
according to :mod:`mtjsnn._accel`.  Both versions are importable so the
benchmark and the equivalence tests can compare them directly.

Packed device vector layout (``dev``)::

    0 Ms          saturation magnetisation, A/m
    1..3 Nxx..Nzz demagnetisation factors
    4 alpha       Gilbert damping
    5 sigma       thermal field std per component, A/m
    6 torque      damping-like torque field per amp of HM current, A/m/A
    7..9 p        injected spin direction (unit)
    10..12 hext   external field, A/m
    13 dtau       reduced time step |gamma| dt / (1 + alpha^2)
"""
import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA

DEV_LEN = 14


def _heun_batch_numpy(m, noise, current, dev, state, rec, stride, renorm, band, fail):
    n, k = current.shape
    ms, nxx, nyy, nzz, alpha, sigma, tpa = dev[0], dev[1], dev[2], dev[3], dev[4], dev[5], dev[6]
    p = dev[7:10]
    hext = dev[10:13]
    dtau = dev[13]
    ndemag = -ms * np.array([nxx, nyy, nzz])
    alive = fail < 0
    nrec = rec.shape[1]

    def rhs(v, h, b):
        c = np.cross(v, h)
        d = np.cross(v, c)
        e = np.cross(v, p)
        f = np.cross(v, e)
        return -c - alpha * d + b[:, None] * (f - alpha * e)

    for i in range(k):
        th = sigma * noise[:, i, :] + hext
        b = tpa * current[:, i]
        f1 = rhs(m, ndemag * m + th, b)
        pred = m + f1 * dtau
        f2 = rhs(pred, ndemag * pred + th, b)
        m = m + 0.5 * (f1 + f2) * dtau
        if renorm:
            m = m / np.sqrt(np.sum(m * m, axis=1))[:, None]
        bad = alive & ~np.isfinite(m).all(axis=1)
        if bad.any():
            fail[bad] = i
            alive &= ~bad
        mx = m[:, 0]
        up = (state == 0) & (mx > band)
        down = (state == 1) & (mx < -band)
        state[up] = 1
        state[down] = 0
        if nrec and (i + 1) % stride == 0:
            j = (i + 1) // stride - 1
            if j < nrec:
                rec[:, j, :] = m
    return m


def _filter_stream_numpy(x, y0, s0, decay, lo, hi, out):
    # sequential by nature; numpy path is a plain python loop
    y = y0
    s = s0
    keep = 1.0 - decay
    for i in range(x.shape[0]):
        y = y * decay + keep * x[i]
        if s == 0 and y > hi:
            s = 1
        elif s == 1 and y < lo:
            s = 0
        out[i] = s
    return y, s


def _hysteresis_numpy(x, s0, band, out):
    s = s0
    for i in range(x.shape[0]):
        v = x[i]
        if s == 0 and v > band:
            s = 1
        elif s == 1 and v < -band:
            s = 0
        out[i] = s
    return s


if HAVE_NUMBA:
    import numba as nb

    @nb.njit(cache=True, inline="always")
    def _rhs_nb(mx, my, mz, hx, hy, hz, a, b, px, py, pz):
        cx = my * hz - mz * hy
        cy = mz * hx - mx * hz
        cz = mx * hy - my * hx
        dx = my * cz - mz * cy
        dy = mz * cx - mx * cz
        dz = mx * cy - my * cx
        ex = my * pz - mz * py
        ey = mz * px - mx * pz
        ez = mx * py - my * px
        fx = my * ez - mz * ey
        fy = mz * ex - mx * ez
        fz = mx * ey - my * ex
        return (
            -cx - a * dx + b * (fx - a * ex),
            -cy - a * dy + b * (fy - a * ey),
            -cz - a * dz + b * (fz - a * ez),
        )

    @nb.njit(cache=True, parallel=True)
    def _heun_batch_numba(m, noise, current, dev, state, rec, stride, renorm, band, fail):
        n, k = current.shape
        ms = dev[0]
        kx = -ms * dev[1]
        ky = -ms * dev[2]
        kz = -ms * dev[3]
        alpha = dev[4]
        sigma = dev[5]
        tpa = dev[6]
        px, py, pz = dev[7], dev[8], dev[9]
        ex_, ey_, ez_ = dev[10], dev[11], dev[12]
        dtau = dev[13]
        nrec = rec.shape[1]
        for j in nb.prange(n):
            if fail[j] >= 0:
                continue
            mx, my, mz = m[j, 0], m[j, 1], m[j, 2]
            st = state[j]
            for i in range(k):
                tx = sigma * noise[j, i, 0] + ex_
                ty = sigma * noise[j, i, 1] + ey_
                tz = sigma * noise[j, i, 2] + ez_
                b = tpa * current[j, i]
                f0, f1, f2 = _rhs_nb(mx, my, mz, kx * mx + tx, ky * my + ty, kz * mz + tz,
                                     alpha, b, px, py, pz)
                qx = mx + f0 * dtau
                qy = my + f1 * dtau
                qz = mz + f2 * dtau
                g0, g1, g2 = _rhs_nb(qx, qy, qz, kx * qx + tx, ky * qy + ty, kz * qz + tz,
                                     alpha, b, px, py, pz)
                mx = mx + 0.5 * (f0 + g0) * dtau
                my = my + 0.5 * (f1 + g1) * dtau
                mz = mz + 0.5 * (f2 + g2) * dtau
                if renorm:
                    nn = np.sqrt(mx * mx + my * my + mz * mz)
                    mx = mx / nn
                    my = my / nn
                    mz = mz / nn
                if not (np.isfinite(mx) and np.isfinite(my) and np.isfinite(mz)):
                    fail[j] = i
                    break
                if st == 0 and mx > band:
                    st = 1
                elif st == 1 and mx < -band:
                    st = 0
                if nrec > 0 and (i + 1) % stride == 0:
                    r = (i + 1) // stride - 1
                    if r < nrec:
                        rec[j, r, 0] = mx
                        rec[j, r, 1] = my
                        rec[j, r, 2] = mz
            m[j, 0] = mx
            m[j, 1] = my
            m[j, 2] = mz
            state[j] = st
        return m

    @nb.njit(cache=True)
    def _filter_stream_numba(x, y0, s0, decay, lo, hi, out):
        y = y0
        s = s0
        keep = 1.0 - decay
        for i in range(x.shape[0]):
            y = y * decay + keep * x[i]
            if s == 0 and y > hi:
                s = 1
            elif s == 1 and y < lo:
                s = 0
            out[i] = s
        return y, s

    @nb.njit(cache=True)
    def _hysteresis_numba(x, s0, band, out):
        s = s0
        for i in range(x.shape[0]):
            v = x[i]
            if s == 0 and v > band:
                s = 1
            elif s == 1 and v < -band:
                s = 0
            out[i] = s
        return s

else:  # pragma: no cover
    _heun_batch_numba = None
    _filter_stream_numba = None
    _hysteresis_numba = None


def heun_batch(m, noise, current, dev, state, rec, stride, renorm, band, fail):
    """Advance ``n`` trajectories by ``current.shape[1]`` Heun steps in place.

    ``m`` (n, 3), ``noise`` (n, k, 3) standard normals, ``current`` (n, k) in
    amperes, ``state`` (n,) int8 hysteretic P/AP flag, ``rec`` (n, r, 3)
    recording buffer (r may be 0), ``fail`` (n,) int64, set to the failing
    step index.  Returns the updated ``m`` (same object for numba).
    """
    if USE_NUMBA:
        return _heun_batch_numba(m, noise, current, dev, state, rec, stride, renorm, band, fail)
    out = _heun_batch_numpy(m, noise, current, dev, state, rec, stride, renorm, band, fail)
    m[...] = out
    return m


def filter_stream(x, y0, s0, decay, lo, hi, out):
    if USE_NUMBA:
        return _filter_stream_numba(x, y0, s0, decay, lo, hi, out)
    return _filter_stream_numpy(x, y0, s0, decay, lo, hi, out)


def hysteresis(x, s0, band, out):
    if USE_NUMBA:
        return _hysteresis_numba(x, s0, band, out)
    return _hysteresis_numpy(x, s0, band, out)
