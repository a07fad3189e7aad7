"""Time-stepping kernels for the distributed-delay integrator.

Two implementations of the same fixed-step scheme: a numba-compiled
kernel (default) and a vectorized pure-numpy fallback.  Selection is
automatic; set the environment variable ``DDSYN_NO_NUMBA=1`` to force
the numpy path (e.g. on platforms where JIT compilation is unwanted).
``benchmarks/bench_sim.py`` compares the two.

Scheme: classical RK4 on the non-delayed part; the delayed and
distributed terms are read from the history buffer, with half-step
values obtained by 4-point cubic interpolation and the distributed
integral by composite Simpson over the buffer grid (kernel matrix
pre-tabulated and pre-multiplied by the quadrature weights).  The
quadrature/interpolation coupling caps the global order at about h^2,
which is ample at the step sizes used here.
"""

import os

import numpy as np

__all__ = ["simpson_weights", "run_integrator", "USING_NUMBA"]

_DISABLE = os.environ.get("DDSYN_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

USING_NUMBA = False
if not _DISABLE:
    try:
        from numba import njit
        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a hard dependency
        USING_NUMBA = False


def simpson_weights(K, h):
    """Composite Simpson weights on K intervals of width h (K >= 4).

    Odd K is handled by a 3/8 rule on the last three intervals.
    """
    if K < 4:
        raise ValueError("need at least 4 history intervals (reduce the step)")
    w = np.zeros(K + 1)
    if K % 2 == 0:
        w[0] = w[K] = 1.0
        w[1:K:2] = 4.0
        w[2:K - 1:2] = 2.0
        w *= h / 3.0
    else:
        Ke = K - 3
        w[0] = w[Ke] = 1.0
        w[1:Ke:2] = 4.0
        w[2:Ke - 1:2] = 2.0
        w *= h / 3.0
        w38 = np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
        w[Ke:] += w38
    return w


# cubic interpolation stencils at the midpoint of a grid interval
_MID_CENT = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0     # nodes a-1..a+2
_MID_LEFT = np.array([5.0, 15.0, -5.0, 1.0]) / 16.0     # nodes a..a+3
_MID_RIGHT = np.array([1.0, -5.0, 15.0, 5.0]) / 16.0    # nodes a-2..a+1


def _midpoints_np(X, lo, hi):
    """Cubic midpoint values between consecutive rows X[lo:hi+1]."""
    npts = hi - lo
    out = np.empty((npts, X.shape[1]))
    a = np.arange(lo, hi)
    interior = (a - 1 >= 0) & (a + 2 <= hi)
    ai = a[interior]
    if ai.size:
        out[interior] = (
            _MID_CENT[0] * X[ai - 1] + _MID_CENT[1] * X[ai]
            + _MID_CENT[2] * X[ai + 1] + _MID_CENT[3] * X[ai + 2])
    for idx in np.nonzero(~interior)[0]:
        aa = a[idx]
        if aa - 1 < 0:
            out[idx] = (_MID_LEFT[0] * X[aa] + _MID_LEFT[1] * X[aa + 1]
                        + _MID_LEFT[2] * X[aa + 2] + _MID_LEFT[3] * X[aa + 3])
        else:
            out[idx] = (_MID_RIGHT[0] * X[aa - 2] + _MID_RIGHT[1] * X[aa - 1]
                        + _MID_RIGHT[2] * X[aa] + _MID_RIGHT[3] * X[aa + 1])
    return out


def _run_numpy(Pi1, A2, B2, AMw, W, Wh, X, steps, K, h):
    n = X.shape[1]
    for i in range(steps):
        top = K + i
        xt = X[top]
        hist0 = X[i:top + 1]
        J0 = np.einsum("jab,jb->a", AMw, hist0)
        k1 = Pi1 @ xt + A2 @ X[i] + J0 + B2 @ W[i]

        mids = _midpoints_np(X, i, top)            # x at i+j+0.5, j=0..K-1
        Jm_base = np.einsum("jab,jb->a", AMw[:K], mids)
        xdel_mid = mids[0]

        x2 = xt + 0.5 * h * k1
        k2 = Pi1 @ x2 + A2 @ xdel_mid + Jm_base + AMw[K] @ x2 + B2 @ Wh[i]
        x3 = xt + 0.5 * h * k2
        k3 = Pi1 @ x3 + A2 @ xdel_mid + Jm_base + AMw[K] @ x3 + B2 @ Wh[i]
        x4 = xt + h * k3
        J1 = np.einsum("jab,jb->a", AMw[:K], X[i + 1:top + 1]) + AMw[K] @ x4
        k4 = Pi1 @ x4 + A2 @ X[i + 1] + J1 + B2 @ W[i + 1]
        X[top + 1] = xt + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(X[top + 1])):
            return i + 1
    return steps


if USING_NUMBA:

    @njit(cache=True)
    def _contract(AMw, X, lo, count):  # pragma: no cover - jitted
        n = X.shape[1]
        out = np.zeros(n)
        for j in range(count):
            row = X[lo + j]
            for a in range(n):
                acc = 0.0
                for b in range(n):
                    acc += AMw[j, a, b] * row[b]
                out[a] += acc
        return out

    @njit(cache=True)
    def _run_numba(Pi1, A2, B2, AMw, W, Wh, X, steps, K, h):  # pragma: no cover
        n = X.shape[1]
        mids = np.empty((K, n))
        for i in range(steps):
            top = K + i
            xt = X[top].copy()
            J0 = _contract(AMw, X, i, K + 1)
            k1 = Pi1 @ xt + A2 @ X[i] + J0 + B2 @ W[i]

            for j in range(K):
                a = i + j
                if a - 1 < 0:
                    for b in range(n):
                        mids[j, b] = (5.0 * X[a, b] + 15.0 * X[a + 1, b]
                                      - 5.0 * X[a + 2, b] + X[a + 3, b]) / 16.0
                elif a + 2 > top:
                    for b in range(n):
                        mids[j, b] = (X[a - 2, b] - 5.0 * X[a - 1, b]
                                      + 15.0 * X[a, b] + 5.0 * X[a + 1, b]) / 16.0
                else:
                    for b in range(n):
                        mids[j, b] = (-X[a - 1, b] + 9.0 * X[a, b]
                                      + 9.0 * X[a + 1, b] - X[a + 2, b]) / 16.0
            Jm = _contract(AMw, mids, 0, K)
            xdel_mid = mids[0]

            x2 = xt + 0.5 * h * k1
            k2 = Pi1 @ x2 + A2 @ xdel_mid + Jm + AMw[K] @ x2 + B2 @ Wh[i]
            x3 = xt + 0.5 * h * k2
            k3 = Pi1 @ x3 + A2 @ xdel_mid + Jm + AMw[K] @ x3 + B2 @ Wh[i]
            x4 = xt + h * k3
            J1 = _contract(AMw, X, i + 1, K) + AMw[K] @ x4
            k4 = Pi1 @ x4 + A2 @ X[i + 1] + J1 + B2 @ W[i + 1]
            xn = xt + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            ok = True
            for b in range(n):
                X[top + 1, b] = xn[b]
                if not np.isfinite(xn[b]):
                    ok = False
            if not ok:
                return i + 1
        return steps


def run_integrator(Pi1, A2, B2, AMw, W, Wh, X, steps, K, h):
    """Advance the trajectory in place; returns the number of completed steps.

    ``X`` holds the K+1 history rows followed by ``steps`` rows to fill;
    ``AMw`` is the distributed kernel pre-multiplied by the Simpson
    weights; ``W``/``Wh`` are the disturbance at grid and half-grid
    times.  A return value smaller than ``steps`` signals a non-finite
    state (blow-up).
    """
    if USING_NUMBA:
        return _run_numba(np.ascontiguousarray(Pi1), np.ascontiguousarray(A2),
                          np.ascontiguousarray(B2), np.ascontiguousarray(AMw),
                          np.ascontiguousarray(W), np.ascontiguousarray(Wh),
                          X, steps, K, h)
    return _run_numpy(Pi1, A2, B2, AMw, W, Wh, X, steps, K, h)
