"""Solver-independent verification instruments.

Characteristic roots via pseudospectral differencing on Chebyshev
nodes, time-domain simulation of the delay system, probe-based lower
bounds on the L2 gain, and delay-sweep stability maps with bisection-
refined interval boundaries.  None of this shares code with the LMI
machinery, so agreement between the two is meaningful evidence.
"""

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import builders
from . import sdp as sdpmod
from .exceptions import DimensionError, InputError, NumericalFailureError
from .model import ClosedLoop, DDSystem, TuningParams, close_loop
from ._simkernel import run_integrator, simpson_weights

__all__ = [
    "SpectralReport", "Trajectory", "spectral_abscissa", "simulate",
    "empirical_l2_gain", "default_probes", "sweep_stability", "SweepResult",
    "write_sweep_csv", "write_trajectory_csv",
]


@dataclass(frozen=True)
class SpectralReport:
    """Approximate characteristic roots, sorted right to left."""

    N: int
    roots: np.ndarray

    @property
    def abscissa(self):
        return float(self.roots[0].real)


@dataclass(frozen=True)
class Trajectory:
    """Simulated response on a uniform grid."""

    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    h: float

    def norm_l2(self, signal):
        """Trapezoidal L2 norm of "x", "z" or "w" over the horizon."""
        y = getattr(self, signal)
        if y.shape[1] == 0:
            return 0.0
        return float(np.sqrt(np.trapezoid(np.sum(y * y, axis=1), dx=self.h)))


def cheb_nodes_diffmat(N):
    """Chebyshev extremal nodes on [-1, 1] and the differentiation matrix."""
    j = np.arange(N + 1)
    x = np.cos(np.pi * j / N)
    c = np.ones(N + 1)
    c[0] = c[N] = 2.0
    c = c * (-1.0) ** j
    Xg = np.tile(x, (N + 1, 1)).T
    dX = Xg - Xg.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def clenshaw_curtis_weights(N):
    """Clenshaw-Curtis quadrature weights for the Chebyshev extremal nodes.

    Computed by matching the exact Chebyshev-polynomial moments; exact
    for polynomials of degree N.
    """
    j = np.arange(N + 1)
    k = np.arange(N + 1)
    T = np.cos(np.outer(k, j) * np.pi / N)
    mom = np.zeros(N + 1)
    mom[0] = 2.0
    even = np.arange(2, N + 1, 2)
    mom[even] = 2.0 / (1.0 - even ** 2)
    return np.linalg.solve(T, mom)


def _loop_data(sys_or_cl):
    if isinstance(sys_or_cl, ClosedLoop):
        return sys_or_cl.base, sys_or_cl.Pi1, sys_or_cl.Omega1
    if isinstance(sys_or_cl, DDSystem):
        return sys_or_cl, sys_or_cl.A1, sys_or_cl.C1
    raise DimensionError("expected a DDSystem or ClosedLoop")


def spectral_abscissa(sys_or_cl, N=20):
    """Rightmost characteristic roots by pseudospectral differencing.

    The delay interval is collocated on N+1 Chebyshev extremal nodes;
    interior rows differentiate the history, the boundary row splices in
    the dynamics with the distributed term quadratured by Clenshaw-
    Curtis weights.  The eigenvalues of the resulting matrix approximate
    the characteristic roots, spectrally fast in N for the smooth
    kernels handled here.
    """
    if N < 4:
        raise InputError("discretization index must be at least 4")
    base, Pi1, _ = _loop_data(sys_or_cl)
    n, r = base.n, base.r
    x, D = cheb_nodes_diffmat(N)
    taus = (x - 1.0) * (r / 2.0)
    A = np.kron(D * (2.0 / r), np.eye(n))
    A[:n, :] = 0.0
    A[:n, :n] += Pi1
    A[:n, N * n:] += base.A2
    wts = clenshaw_curtis_weights(N) * (r / 2.0)
    if np.any(base.A3):
        for kk in range(N + 1):
            A[:n, kk * n:(kk + 1) * n] += wts[kk] * base.a3_of(taus[kk])
    roots = np.linalg.eigvals(A)
    order = np.argsort(-roots.real)
    return SpectralReport(N=int(N), roots=roots[order])


def _sample_fn(fn, times, dim):
    if fn is None:
        return np.zeros((times.shape[0], dim))
    out = np.empty((times.shape[0], dim))
    for i, t in enumerate(times):
        out[i] = np.broadcast_to(np.asarray(fn(t), dtype=float).reshape(-1), (dim,))
    return out


def simulate(cl, phi=None, w=None, T=10.0, h=1e-3):
    """Integrate the closed loop from history phi under disturbance w.

    ``phi`` maps tau in [-r, 0] to the state (None = zero history);
    ``w`` maps t to the disturbance (None = zero).  The step must divide
    the delay.  Blow-up (non-finite state) raises
    :class:`NumericalFailureError`.
    """
    base = cl.base
    n, q, m, r = base.n, base.q, base.m, base.r
    K = int(round(r / h))
    if abs(K * h - r) > 1e-9 * max(1.0, r):
        raise InputError(f"step {h} does not divide the delay {r}")
    steps = int(round(T / h))
    sw = simpson_weights(K, h)
    taus = -r + h * np.arange(K + 1)
    AMw = np.stack([sw[jj] * base.a3_of(taus[jj]) for jj in range(K + 1)])
    CMw = np.stack([sw[jj] * base.c3_of(taus[jj]) for jj in range(K + 1)]) \
        if m else np.zeros((K + 1, 0, n))

    X = np.zeros((steps + K + 1, n))
    X[:K + 1] = _sample_fn(phi, taus, n)
    tgrid = h * np.arange(steps + 1)
    W = _sample_fn(w, tgrid, q)
    Wh = _sample_fn(w, tgrid[:-1] + 0.5 * h, q)

    B2 = base.B2 if q else np.zeros((n, 0))
    done = run_integrator(cl.Pi1, base.A2, B2, AMw, W, Wh, X, steps, K, h)
    if done < steps:
        raise NumericalFailureError(
            f"instability overflow at t = {done * h:.6g} (state not finite)")

    xs = X[K:]
    if m:
        zs = xs @ cl.Omega1.T + X[:steps + 1] @ base.C2.T + W @ base.D2.T
        for i in range(steps + 1):
            zs[i] += np.einsum("jab,jb->a", CMw, X[i:i + K + 1])
    else:
        zs = np.zeros((steps + 1, 0))
    return Trajectory(t=tgrid, x=xs, z=zs, w=W, h=float(h))


def default_probes(q, T, seed=20160617, n_sin=6, n_noise=6):
    """Reproducible disturbance probe suite: log-spaced sinusoids plus
    seeded band-limited multisine noise, directions cycling the axes."""
    rng = np.random.default_rng(seed)
    probes = []
    freqs = np.logspace(-2, 1.3, n_sin)
    for k, f in enumerate(freqs):
        d = np.zeros(q)
        d[k % q] = 1.0
        probes.append(lambda t, f=f, d=d: d * np.sin(f * t))
    for _ in range(n_noise):
        nc = 24
        om = rng.uniform(0.05, 25.0, size=nc)
        ph = rng.uniform(0, 2 * np.pi, size=nc)
        amp = rng.standard_normal((nc, q)) / np.sqrt(nc)
        probes.append(lambda t, om=om, ph=ph, amp=amp:
                      np.sin(om * t + ph) @ amp)
    return probes


def empirical_l2_gain(cl, probes=None, T=60.0, h=2e-3):
    """Probe-based lower bound on the closed-loop L2 gain.

    Simulates each disturbance probe from zero history and returns the
    largest ratio of trapezoidal norms ||z|| / ||w||.  The loop must be
    stable (checked spectrally first).
    """
    rep = spectral_abscissa(cl, N=20)
    if rep.abscissa >= 0:
        raise InputError(f"loop is not stable (abscissa {rep.abscissa:+.4g})")
    if probes is None:
        probes = default_probes(cl.base.q, T)
    best = 0.0
    for probe in probes:
        traj = simulate(cl, phi=None, w=probe, T=T, h=h)
        nw = traj.norm_l2("w")
        if nw <= 1e-12:
            continue
        best = max(best, traj.norm_l2("z") / nw)
    return best


# ---------------------------------------------------------------------------
# delay sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    intervals: list
    records: list       # (r, feasible, margin)
    failures: list      # r values where the solver broke down
    ndv: int


def _condition_problem(sys, condition, supply=None, tuning=None):
    if condition == "simple":
        return builders.simple_stability_constraints(sys)
    if condition == "slack":
        return builders.slack_stability_constraints(
            sys, tuning or TuningParams())
    if condition == "analysis":
        return builders.analysis_constraints(sys, supply)
    raise InputError(f"unknown sweep condition {condition!r}")


def sweep_stability(sys, r_min, r_max, step, condition="simple", supply=None,
                    tuning=None, refine_tol=1e-4, options=None):
    """Feasibility of the chosen condition over a delay grid.

    The Gram weight is recomputed at every delay.  Boundaries between
    feasible and infeasible grid points are refined by bisection to
    ``refine_tol``; solver breakdowns count as infeasible (with the
    delay recorded in ``failures``) so a flaky point cannot silently
    extend an interval.
    """
    if not (0 < r_min <= r_max) or step <= 0:
        raise InputError("need 0 < r_min <= r_max and step > 0")
    options = options or sdpmod.DEFAULT_OPTIONS
    npts = int(round((r_max - r_min) / step)) + 1
    grid = r_min + step * np.arange(npts)
    failures = []

    def feas(r):
        try:
            prob = _condition_problem(replace(sys, r=float(r)), condition,
                                      supply, tuning)
            cert = sdpmod.solve_feasibility(prob, options)
        except Exception as exc:
            warnings.warn(f"sweep point r={r:.6g} failed: {exc}")
            failures.append(float(r))
            return False, -np.inf
        if cert.status == "numerical-failure":
            warnings.warn(f"sweep point r={r:.6g}: solver breakdown "
                          f"({cert.solver_status}); treated as infeasible")
            failures.append(float(r))
            return False, cert.margin
        return cert.feasible, cert.margin

    records = []
    flags = np.zeros(npts, dtype=bool)
    for i, r in enumerate(grid):
        ok, margin = feas(r)
        flags[i] = ok
        records.append((float(r), bool(ok), float(margin)))

    def bisect(lo, hi, lo_feas):
        # invariant: feas(lo) == lo_feas != feas(hi)
        while hi - lo > refine_tol:
            mid = 0.5 * (lo + hi)
            ok, _ = feas(mid)
            if ok == lo_feas:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    intervals = []
    i = 0
    while i < npts:
        if flags[i]:
            left = grid[i] if i == 0 else bisect(grid[i - 1], grid[i], False)
            j = i
            while j + 1 < npts and flags[j + 1]:
                j += 1
            right = grid[j] if j == npts - 1 else bisect(grid[j], grid[j + 1], True)
            intervals.append((float(left), float(right)))
            i = j + 1
        else:
            i += 1

    ndv = 0
    try:
        prob = _condition_problem(replace(sys, r=float(grid[0])), condition,
                                  supply, tuning)
        from .lmi import count_decision_variables
        ndv = count_decision_variables(prob)
    except Exception:
        pass
    return SweepResult(intervals=intervals, records=records,
                       failures=failures, ndv=ndv)


def write_sweep_csv(path, result, abscissas=None):
    """Sweep CSV: r, feasible(0/1), margin[, abscissa]."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        header = ["r", "feasible", "margin"]
        if abscissas is not None:
            header.append("abscissa")
        wr.writerow(header)
        for i, (r, ok, margin) in enumerate(result.records):
            row = [f"{r:.6g}", int(ok), f"{margin:.9g}"]
            if abscissas is not None:
                row.append(f"{abscissas[i]:.9g}")
            wr.writerow(row)


def write_trajectory_csv(path, traj):
    """Trajectory CSV: t, x..., z..., w...."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        n, m, q = traj.x.shape[1], traj.z.shape[1], traj.w.shape[1]
        wr.writerow(["t"] + [f"x{i+1}" for i in range(n)]
                    + [f"z{i+1}" for i in range(m)]
                    + [f"w{i+1}" for i in range(q)])
        for i in range(traj.t.shape[0]):
            wr.writerow([f"{traj.t[i]:.9g}"]
                        + [f"{v:.9g}" for v in traj.x[i]]
                        + [f"{v:.9g}" for v in traj.z[i]]
                        + [f"{v:.9g}" for v in traj.w[i]])
