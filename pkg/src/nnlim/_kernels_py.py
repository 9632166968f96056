"""Pure NumPy limiter kernels.

Same signatures and results as the compiled ``_kernels`` extension; used when
the extension is not built or ``NNLIM_PURE_PYTHON=1`` is set.
"""

import numpy as np


def minmod3(a, b, c):
    """Elementwise three-argument minmod."""
    a, b, c = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(c, float))
    same = ((a > 0) & (b > 0) & (c > 0)) | ((a < 0) & (b < 0) & (c < 0))
    # pick the argument itself (not sign * |arg|) so an unchanged value is bitwise equal
    pick = np.where(np.abs(b) < np.abs(a), b, a)
    pick = np.where(np.abs(c) < np.abs(pick), c, pick)
    return np.where(same, pick, 0.0)


def _excursions(c):
    """Right and left interface excursions (u(+1) - mean, mean - u(-1))."""
    q = c.shape[-1]
    m = np.arange(1, q)
    right = c[..., 1:].sum(axis=-1)
    left = (c[..., 1:] * -((-1.0) ** m)).sum(axis=-1)
    return right, left


def minmod_limit_1d(cext, tvb_thresh=-1.0):
    """Slope limiter on padded coefficients ``cext`` (V, n + 2, q).

    A cell whose interface excursions are modified by ``minmod(e, D+, D-)``
    is rebuilt as ``mean + s P_1`` with ``s = minmod(c_1, D+, D-)``; ``c_1``
    is the mean of the two excursions, which keeps the rebuild mirror
    symmetric.  With ``tvb_thresh >= 0`` a cell with ``|e_L| <= tvb_thresh``
    (``e_L = mean - u(-1)``) is skipped.
    """
    cext = np.ascontiguousarray(cext, dtype=float)
    c = cext[:, 1:-1]
    if c.shape[-1] < 2:
        return c.copy(), np.zeros(c.shape[:2], dtype=bool)
    avg = cext[..., 0]
    dp = avg[:, 2:] - avg[:, 1:-1]
    dm = avg[:, 1:-1] - avg[:, :-2]
    e_r, e_l = _excursions(c)
    changed = (minmod3(e_r, dp, dm) != e_r) | (minmod3(e_l, dp, dm) != e_l)
    if tvb_thresh >= 0.0:
        changed &= ~(np.abs(e_l) <= tvb_thresh)
    out = c.copy()
    rebuilt = np.zeros_like(c)
    rebuilt[..., 0] = c[..., 0]
    rebuilt[..., 1] = minmod3(c[..., 1], dp, dm)
    out[changed] = rebuilt[changed]
    return out, changed


def hio_limit_1d(cext, kappa):
    """Hierarchical moment limiter on padded coefficients ``cext`` (V, n + 2, q).

    ``kappa[m]`` scales the neighbour differences of mode ``m - 1`` when
    limiting mode ``m``.  Descends from the top mode and stops in a cell at
    the first mode returned unchanged.
    """
    cext = np.ascontiguousarray(cext, dtype=float)
    q = cext.shape[-1]
    out = cext[:, 1:-1].copy()
    active = np.ones(out.shape[:2], dtype=bool)
    changed = np.zeros(out.shape[:2], dtype=bool)
    for m in range(q - 1, 0, -1):
        lower = cext[..., m - 1]
        dp = kappa[m] * (lower[:, 2:] - lower[:, 1:-1])
        dm = kappa[m] * (lower[:, 1:-1] - lower[:, :-2])
        cur = out[..., m]
        new = minmod3(cur, dp, dm)
        mod = active & (new != cur)
        out[..., m] = np.where(mod, new, cur)
        changed |= mod
        active &= mod
    return out, changed


def hio_limit_2d(cext, kappa):
    """Directional moment limiter on padded tensor coefficients (V, nx+2, ny+2, q, q).

    x pass: for each y-mode row ``n`` the x-modes are limited top-down against
    (i +- 1, j) differences of mode ``m - 1``; y pass likewise per x-mode
    column against (i, j +- 1).  Neighbour differences use the input data.
    """
    cext = np.ascontiguousarray(cext, dtype=float)
    q = cext.shape[-1]
    inner = cext[:, 1:-1, 1:-1]
    out = inner.copy()
    changed = np.zeros(out.shape[:3], dtype=bool)
    for n in range(q):
        active = np.ones(out.shape[:3], dtype=bool)
        for m in range(q - 1, 0, -1):
            lower = cext[:, :, 1:-1, m - 1, n]
            dp = kappa[m] * (lower[:, 2:] - lower[:, 1:-1])
            dm = kappa[m] * (lower[:, 1:-1] - lower[:, :-2])
            cur = out[..., m, n]
            new = minmod3(cur, dp, dm)
            mod = active & (new != cur)
            out[..., m, n] = np.where(mod, new, cur)
            changed |= mod
            active &= mod
    for m in range(q):
        active = np.ones(out.shape[:3], dtype=bool)
        for n in range(q - 1, 0, -1):
            lower = cext[:, 1:-1, :, m, n - 1]
            dp = kappa[n] * (lower[:, :, 2:] - lower[:, :, 1:-1])
            dm = kappa[n] * (lower[:, :, 1:-1] - lower[:, :, :-2])
            cur = out[..., m, n]
            new = minmod3(cur, dp, dm)
            mod = active & (new != cur)
            out[..., m, n] = np.where(mod, new, cur)
            changed |= mod
            active &= mod
    return out, changed


def minmod_limit_2d(cext):
    """Directional Minmod on tensor coefficients (V, nx+2, ny+2, q, q).

    The x check uses the y-averaged profile (row n = 0), the y check the
    x-averaged profile (column m = 0).  A cell failing either check keeps
    only its mean and the two limited slopes.
    """
    cext = np.ascontiguousarray(cext, dtype=float)
    inner = cext[:, 1:-1, 1:-1]
    if inner.shape[-1] < 2:
        return inner.copy(), np.zeros(inner.shape[:3], dtype=bool)
    avg = cext[..., 0, 0]
    dxp = avg[:, 2:, 1:-1] - avg[:, 1:-1, 1:-1]
    dxm = avg[:, 1:-1, 1:-1] - avg[:, :-2, 1:-1]
    dyp = avg[:, 1:-1, 2:] - avg[:, 1:-1, 1:-1]
    dym = avg[:, 1:-1, 1:-1] - avg[:, 1:-1, :-2]
    ex_r, ex_l = _excursions(inner[..., :, 0])
    ey_r, ey_l = _excursions(inner[..., 0, :])
    changed = (minmod3(ex_r, dxp, dxm) != ex_r) | (minmod3(ex_l, dxp, dxm) != ex_l)
    changed |= (minmod3(ey_r, dyp, dym) != ey_r) | (minmod3(ey_l, dyp, dym) != ey_l)
    rebuilt = np.zeros_like(inner)
    rebuilt[..., 0, 0] = inner[..., 0, 0]
    rebuilt[..., 1, 0] = minmod3(inner[..., 1, 0], dxp, dxm)
    rebuilt[..., 0, 1] = minmod3(inner[..., 0, 1], dyp, dym)
    out = inner.copy()
    out[changed] = rebuilt[changed]
    return out, changed
