# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled limiter kernels; results are bitwise equal to ``_kernels_py``."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _mm(double a, double b, double c) noexcept nogil:
    cdef double pick
    if not ((a > 0 and b > 0 and c > 0) or (a < 0 and b < 0 and c < 0)):
        return 0.0
    pick = b if abs(b) < abs(a) else a
    return c if abs(c) < abs(pick) else pick


def minmod3(a, b, c):
    """Elementwise three-argument minmod."""
    a, b, c = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(c, float))
    shape = a.shape
    cdef double[::1] x = np.ascontiguousarray(a).ravel()
    cdef double[::1] y = np.ascontiguousarray(b).ravel()
    cdef double[::1] z = np.ascontiguousarray(c).ravel()
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t k
    for k in range(x.shape[0]):
        o[k] = _mm(x[k], y[k], z[k])
    return out.reshape(shape)


def minmod_limit_1d(cext, double tvb_thresh=-1.0):
    """Slope limiter on padded coefficients (V, n + 2, q); see ``_kernels_py``."""
    cdef double[:, :, ::1] c = np.ascontiguousarray(cext, dtype=float)
    cdef Py_ssize_t V = c.shape[0], n = c.shape[1] - 2, q = c.shape[2]
    out_a = np.array(c[:, 1:n + 1, :])
    changed_a = np.zeros((V, n), dtype=bool)
    cdef double[:, :, ::1] out = out_a
    cdef cnp.npy_bool[:, ::1] changed = changed_a
    cdef Py_ssize_t v, i, m
    cdef double dp, dm, er, el, sgn
    if q < 2:
        return out_a, changed_a
    for v in range(V):
        for i in range(n):
            dp = c[v, i + 2, 0] - c[v, i + 1, 0]
            dm = c[v, i + 1, 0] - c[v, i, 0]
            # start from c_1, matching the NumPy reduction order
            er = c[v, i + 1, 1]
            el = c[v, i + 1, 1]
            sgn = -1.0
            for m in range(2, q):
                er = er + c[v, i + 1, m]
                el = el + c[v, i + 1, m] * sgn
                sgn = -sgn
            if _mm(er, dp, dm) == er and _mm(el, dp, dm) == el:
                continue
            if tvb_thresh >= 0.0 and abs(el) <= tvb_thresh:
                continue
            changed[v, i] = True
            out[v, i, 1] = _mm(c[v, i + 1, 1], dp, dm)
            for m in range(2, q):
                out[v, i, m] = 0.0
    return out_a, changed_a


def hio_limit_1d(cext, kappa):
    """Hierarchical moment limiter on padded coefficients (V, n + 2, q)."""
    cdef double[:, :, ::1] c = np.ascontiguousarray(cext, dtype=float)
    cdef double[::1] kap = np.ascontiguousarray(kappa, dtype=float)
    cdef Py_ssize_t V = c.shape[0], n = c.shape[1] - 2, q = c.shape[2]
    out_a = np.array(c[:, 1:n + 1, :])
    changed_a = np.zeros((V, n), dtype=bool)
    cdef double[:, :, ::1] out = out_a
    cdef cnp.npy_bool[:, ::1] changed = changed_a
    cdef Py_ssize_t v, i, m
    cdef double dp, dm, cur, new
    for v in range(V):
        for i in range(n):
            for m in range(q - 1, 0, -1):
                dp = kap[m] * (c[v, i + 2, m - 1] - c[v, i + 1, m - 1])
                dm = kap[m] * (c[v, i + 1, m - 1] - c[v, i, m - 1])
                cur = out[v, i, m]
                new = _mm(cur, dp, dm)
                if new == cur:
                    break
                out[v, i, m] = new
                changed[v, i] = True
    return out_a, changed_a


def hio_limit_2d(cext, kappa):
    """Directional moment limiter on padded tensor coefficients (V, nx+2, ny+2, q, q)."""
    cdef double[:, :, :, :, ::1] c = np.ascontiguousarray(cext, dtype=float)
    cdef double[::1] kap = np.ascontiguousarray(kappa, dtype=float)
    cdef Py_ssize_t V = c.shape[0], nx = c.shape[1] - 2, ny = c.shape[2] - 2, q = c.shape[3]
    out_a = np.array(c[:, 1:nx + 1, 1:ny + 1])
    changed_a = np.zeros((V, nx, ny), dtype=bool)
    cdef double[:, :, :, :, ::1] out = out_a
    cdef cnp.npy_bool[:, :, ::1] changed = changed_a
    cdef Py_ssize_t v, i, j, m, k
    cdef double dp, dm, cur, new
    for v in range(V):
        for i in range(nx):
            for j in range(ny):
                for k in range(q):  # x pass, y-mode k
                    for m in range(q - 1, 0, -1):
                        dp = kap[m] * (c[v, i + 2, j + 1, m - 1, k] - c[v, i + 1, j + 1, m - 1, k])
                        dm = kap[m] * (c[v, i + 1, j + 1, m - 1, k] - c[v, i, j + 1, m - 1, k])
                        cur = out[v, i, j, m, k]
                        new = _mm(cur, dp, dm)
                        if new == cur:
                            break
                        out[v, i, j, m, k] = new
                        changed[v, i, j] = True
                for k in range(q):  # y pass, x-mode k
                    for m in range(q - 1, 0, -1):
                        dp = kap[m] * (c[v, i + 1, j + 2, k, m - 1] - c[v, i + 1, j + 1, k, m - 1])
                        dm = kap[m] * (c[v, i + 1, j + 1, k, m - 1] - c[v, i + 1, j, k, m - 1])
                        cur = out[v, i, j, k, m]
                        new = _mm(cur, dp, dm)
                        if new == cur:
                            break
                        out[v, i, j, k, m] = new
                        changed[v, i, j] = True
    return out_a, changed_a


def minmod_limit_2d(cext):
    """Directional Minmod on tensor coefficients (V, nx+2, ny+2, q, q)."""
    cdef double[:, :, :, :, ::1] c = np.ascontiguousarray(cext, dtype=float)
    cdef Py_ssize_t V = c.shape[0], nx = c.shape[1] - 2, ny = c.shape[2] - 2, q = c.shape[3]
    out_a = np.array(c[:, 1:nx + 1, 1:ny + 1])
    changed_a = np.zeros((V, nx, ny), dtype=bool)
    cdef double[:, :, :, :, ::1] out = out_a
    cdef cnp.npy_bool[:, :, ::1] changed = changed_a
    cdef Py_ssize_t v, i, j, m, k
    cdef double dxp, dxm, dyp, dym, exr, exl, eyr, eyl, sgn, avg
    if q < 2:
        return out_a, changed_a
    for v in range(V):
        for i in range(nx):
            for j in range(ny):
                avg = c[v, i + 1, j + 1, 0, 0]
                dxp = c[v, i + 2, j + 1, 0, 0] - avg
                dxm = avg - c[v, i, j + 1, 0, 0]
                dyp = c[v, i + 1, j + 2, 0, 0] - avg
                dym = avg - c[v, i + 1, j, 0, 0]
                exr = c[v, i + 1, j + 1, 1, 0]
                exl = exr
                eyr = c[v, i + 1, j + 1, 0, 1]
                eyl = eyr
                sgn = -1.0
                for m in range(2, q):
                    exr = exr + c[v, i + 1, j + 1, m, 0]
                    exl = exl + c[v, i + 1, j + 1, m, 0] * sgn
                    eyr = eyr + c[v, i + 1, j + 1, 0, m]
                    eyl = eyl + c[v, i + 1, j + 1, 0, m] * sgn
                    sgn = -sgn
                if (_mm(exr, dxp, dxm) == exr and _mm(exl, dxp, dxm) == exl
                        and _mm(eyr, dyp, dym) == eyr and _mm(eyl, dyp, dym) == eyl):
                    continue
                changed[v, i, j] = True
                for m in range(q):
                    for k in range(q):
                        out[v, i, j, m, k] = 0.0
                out[v, i, j, 0, 0] = avg
                out[v, i, j, 1, 0] = _mm(c[v, i + 1, j + 1, 1, 0], dxp, dxm)
                out[v, i, j, 0, 1] = _mm(c[v, i + 1, j + 1, 0, 1], dyp, dym)
    return out_a, changed_a
