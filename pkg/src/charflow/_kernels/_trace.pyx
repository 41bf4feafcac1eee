# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled raster trace kernel: per-pixel backward RK4 with bilinear fields.

Mirrors numpy_backend.trace_endpoints; runs without the GIL so callers can
split a batch across threads.
"""

cdef int BISECT_ITERS = 40


cdef inline double _bilinear(const double[:, ::1] r, double fx, double fy) noexcept nogil:
    cdef Py_ssize_t ny = r.shape[0]
    cdef Py_ssize_t nx = r.shape[1]
    if fx < 0.0:
        fx = 0.0
    elif fx > nx - 1.000001:
        fx = nx - 1.000001
    if fy < 0.0:
        fy = 0.0
    elif fy > ny - 1.000001:
        fy = ny - 1.000001
    cdef Py_ssize_t j0 = <Py_ssize_t> fx
    cdef Py_ssize_t i0 = <Py_ssize_t> fy
    cdef double ax = fx - j0
    cdef double ay = fy - i0
    return ((1.0 - ay) * ((1.0 - ax) * r[i0, j0] + ax * r[i0, j0 + 1])
            + ay * ((1.0 - ax) * r[i0 + 1, j0] + ax * r[i0 + 1, j0 + 1]))


cdef inline void _rk4(const double[:, ::1] vx, const double[:, ::1] vy,
                      double ox, double oy, double sp,
                      double x, double y, double h,
                      double* xn, double* yn) noexcept nogil:
    cdef double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y
    k1x = _bilinear(vx, (x - ox) / sp, (y - oy) / sp)
    k1y = _bilinear(vy, (x - ox) / sp, (y - oy) / sp)
    k2x = _bilinear(vx, (x + 0.5 * h * k1x - ox) / sp, (y + 0.5 * h * k1y - oy) / sp)
    k2y = _bilinear(vy, (x + 0.5 * h * k1x - ox) / sp, (y + 0.5 * h * k1y - oy) / sp)
    k3x = _bilinear(vx, (x + 0.5 * h * k2x - ox) / sp, (y + 0.5 * h * k2y - oy) / sp)
    k3y = _bilinear(vy, (x + 0.5 * h * k2x - ox) / sp, (y + 0.5 * h * k2y - oy) / sp)
    k4x = _bilinear(vx, (x + h * k3x - ox) / sp, (y + h * k3y - oy) / sp)
    k4y = _bilinear(vy, (x + h * k3x - ox) / sp, (y + h * k3y - oy) / sp)
    xn[0] = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    yn[0] = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)


def trace_endpoints(const double[:, ::1] t0, const double[:, ::1] vx, const double[:, ::1] vy,
                    double ox, double oy, double spacing,
                    const double[:, ::1] starts, double step, int max_steps,
                    double stop_level, double[:, ::1] out, unsigned char[:] status):
    cdef Py_ssize_t n = starts.shape[0]
    cdef Py_ssize_t i
    cdef int k, b
    cdef double x, y, xn, yn, t0n, lo, hi, mid, xm, ym
    with nogil:
        for i in range(n):
            x = starts[i, 0]
            y = starts[i, 1]
            status[i] = 1
            if _bilinear(t0, (x - ox) / spacing, (y - oy) / spacing) <= stop_level:
                status[i] = 0
                out[i, 0] = x
                out[i, 1] = y
                continue
            for k in range(max_steps):
                _rk4(vx, vy, ox, oy, spacing, x, y, step, &xn, &yn)
                t0n = _bilinear(t0, (xn - ox) / spacing, (yn - oy) / spacing)
                if t0n > stop_level and (xn - x if xn > x else x - xn) < 1e-14 \
                        and (yn - y if yn > y else y - yn) < 1e-14:
                    status[i] = 2  # stalled on the field ridge
                    break
                if t0n <= stop_level:
                    lo = 0.0
                    hi = step
                    for b in range(BISECT_ITERS):
                        mid = 0.5 * (lo + hi)
                        _rk4(vx, vy, ox, oy, spacing, x, y, mid, &xm, &ym)
                        if _bilinear(t0, (xm - ox) / spacing, (ym - oy) / spacing) <= stop_level:
                            hi = mid
                        else:
                            lo = mid
                    _rk4(vx, vy, ox, oy, spacing, x, y, hi, &xn, &yn)
                    x = xn
                    y = yn
                    status[i] = 0
                    break
                x = xn
                y = yn
            out[i, 0] = x
            out[i, 1] = y
