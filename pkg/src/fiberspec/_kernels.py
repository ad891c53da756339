"""Hot numeric kernels: inversion of monotone circle-map lifts.

Every discretization in this package (Fourier collocation, Ulam cells,
expanding-constant branch trees) reduces to solving F(y) = t for large
batches of targets t, where F is a strictly increasing lift

    F(y) = degree * y + offset + sum_k [a_k sin(2 pi k y) + b_k cos(2 pi k y)] / (2 pi k).

Two interchangeable backends solve these batches:

* a numba ``@njit`` scalar loop (default whenever numba imports), and
* a vectorized pure-numpy path.

Set ``FIBERSPEC_NUMBA=0`` to force the numpy path; the selected backend is
exported as ``KERNEL_BACKEND``.  Both use the same safeguarded Newton with
a bisection bracket and must agree to ~1e-13 (tested).
"""

import os

import numpy as np

TWO_PI = 2.0 * np.pi

DEFAULT_TOL = 1e-13
DEFAULT_MAXIT = 60


def _invert_lift_numpy(degree, ks, a, b, offset, targets, tol, maxit):
    """Vectorized bracketed Newton over a flat array of lift targets.

    Returns (solutions, converged-mask).  The bracket comes from the
    closed-form bound |g| <= sum (|a_k|+|b_k|)/(2 pi k) on the periodic
    part of the lift.
    """
    t = np.asarray(targets, dtype=np.float64)
    if ks.size == 0:
        return (t - offset) / degree, np.ones(t.shape, dtype=bool)

    wk = TWO_PI * ks
    gbound = float(np.sum((np.abs(a) + np.abs(b)) / wk))
    lo = (t - offset - gbound) / degree
    hi = (t - offset + gbound) / degree
    y = 0.5 * (lo + hi)
    done = np.zeros(t.shape, dtype=bool)

    for _ in range(maxit):
        w = np.multiply.outer(y, wk)
        sw = np.sin(w)
        cw = np.cos(w)
        f = degree * y + offset + (sw @ (a / wk)) + (cw @ (b / wk)) - t
        done |= np.abs(f) < tol
        if done.all():
            break
        active = ~done
        above = active & (f > 0.0)
        below = active & (f <= 0.0)
        hi = np.where(above, y, hi)
        lo = np.where(below, y, lo)
        fp = degree + (cw @ a) - (sw @ b)
        ynew = y - f / fp
        outside = (ynew <= lo) | (ynew >= hi)
        ynew = np.where(outside, 0.5 * (lo + hi), ynew)
        y = np.where(active, ynew, y)
    return y, done


def _make_numba_impl():
    from numba import njit

    @njit(cache=True)
    def _invert_lift_numba(degree, ks, a, b, offset, targets, tol, maxit):
        n = targets.size
        out = np.empty(n, dtype=np.float64)
        ok = np.ones(n, dtype=np.bool_)
        m = ks.size
        gbound = 0.0
        for i in range(m):
            gbound += (abs(a[i]) + abs(b[i])) / (TWO_PI * ks[i])
        for j in range(n):
            t = targets[j]
            if m == 0:
                out[j] = (t - offset) / degree
                continue
            lo = (t - offset - gbound) / degree
            hi = (t - offset + gbound) / degree
            y = 0.5 * (lo + hi)
            converged = False
            for _ in range(maxit):
                g = 0.0
                gp = 0.0
                for i in range(m):
                    w = TWO_PI * ks[i] * y
                    g += (a[i] * np.sin(w) + b[i] * np.cos(w)) / (TWO_PI * ks[i])
                    gp += a[i] * np.cos(w) - b[i] * np.sin(w)
                f = degree * y + offset + g - t
                if abs(f) < tol:
                    converged = True
                    break
                if f > 0.0:
                    hi = y
                else:
                    lo = y
                ynew = y - f / (degree + gp)
                if ynew <= lo or ynew >= hi:
                    ynew = 0.5 * (lo + hi)
                y = ynew
            out[j] = y
            ok[j] = converged
        return out, ok

    return _invert_lift_numba


def numba_available():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


_want_numba = os.environ.get("FIBERSPEC_NUMBA", "1") != "0"

if _want_numba and numba_available():
    _invert_impl = _make_numba_impl()
    KERNEL_BACKEND = "numba"
else:
    _invert_impl = _invert_lift_numpy
    KERNEL_BACKEND = "numpy"


def invert_lift(degree, ks, a, b, offset, targets, tol=DEFAULT_TOL, maxit=DEFAULT_MAXIT):
    """Solve F(y) = t for every t in ``targets`` on the active backend.

    ``targets`` may have any shape; the result has the same shape.  The
    second return value flags targets whose residual |F(y) - t| reached
    ``tol`` within ``maxit`` iterations.
    """
    t = np.ascontiguousarray(targets, dtype=np.float64)
    shape = t.shape
    ys, ok = _invert_impl(
        float(degree),
        np.ascontiguousarray(ks, dtype=np.float64),
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        float(offset),
        t.ravel(),
        float(tol),
        int(maxit),
    )
    return ys.reshape(shape), ok.reshape(shape)
