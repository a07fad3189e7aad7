"""Property tests for the scalar-multiplier robustification blocks."""

import numpy as np
import pytest

from ddsyn import builders, sdp as sdpmod
from ddsyn.lmi import LMIProblem, const_expr


def _solve(prob):
    return sdpmod.solve_feasibility(prob)


def test_wellposed_degenerate_weight():
    # no (1,1) weight, theta3 = -I: the two-block form is feasible
    prob = builders.lemma6_wellposed(None, np.zeros((2, 2)), -np.eye(2),
                                     np.zeros((2, 2)))
    assert _solve(prob).feasible


def test_wellposed_norm_bounded_always():
    rng = np.random.default_rng(0)
    for _ in range(5):
        A = rng.standard_normal((3, 3))
        R = A @ A.T + 0.2 * np.eye(3)
        prob = builders.lemma6_wellposed(R, np.zeros((3, 3)), -np.eye(3),
                                         np.zeros((3, 3)))
        assert _solve(prob).feasible


def test_wellposed_published_uncertainty(twostate_unc):
    from ddsyn import matrixkit as mk
    xi = mk.dsum([c.Xi for c in twostate_unc.channels])
    gam = mk.dsum([c.Gam for c in twostate_unc.channels])
    z = np.zeros_like(gam)
    prob = builders.lemma6_wellposed(np.linalg.inv(xi), z, gam, z)
    assert _solve(prob).feasible


def _bound_problem(phi, g, h, f, th1, th2, th3):
    prob = LMIProblem()
    builders.lemma6_bound(prob, const_expr(phi), np.atleast_2d(g),
                          np.atleast_2d(h), np.atleast_2d(f), th1,
                          np.atleast_2d(th2), np.atleast_2d(th3))
    return prob


def test_bound_no_uncertainty_reduces_to_phi():
    # H = 0: feasibility coincides with definiteness of phi itself
    th1, th2, th3 = np.eye(2), np.zeros((2, 2)), -np.eye(2)
    g = np.ones((3, 2))
    h = np.zeros((2, 3))
    f = np.zeros((2, 2))
    neg = -np.eye(3)
    prob = _bound_problem(neg, g, h, f, th1, th2, th3)
    assert _solve(prob).feasible
    pos = np.diag([1.0, -1.0, -1.0])
    prob = _bound_problem(pos, g, h, f, th1, th2, th3)
    assert not _solve(prob).feasible


def test_bound_scalar_equivalence_against_grid():
    """1x1 data where the robust condition can be brute-forced over Delta."""
    th1, th2, th3 = [[1.0]], [[0.0]], [[-1.0]]   # |Delta| <= 1
    grid = np.linspace(-1.0, 1.0, 2001)

    def robust_by_grid(phi, g, h):
        return all(phi + 2 * g * d * h < 0 for d in grid)

    for phi, g, h in ((-1.0, 1.0, 1.0), (-1.0, 0.5, 0.5), (-2.0, 0.9, 1.0),
                      (-0.5, 0.51, 1.0)):
        prob = _bound_problem([[phi]], [[g]], [[h]], [[0.0]], th1, th2, th3)
        got = _solve(prob).feasible
        want = robust_by_grid(phi, g, h)
        assert got == want, (phi, g, h)


def _sample_delta(rng, th1_inv, th2, th3, count):
    """Rejection-free sampling from the quadratic Delta set.

    The constraint value is matrix-concave along each ray, so the
    admissible radius is found by bisection and scaled back uniformly.
    """
    pp, mm = th1_inv.shape[0], th3.shape[0]
    out = []
    for _ in range(count):
        Z = rng.standard_normal((mm, pp))

        def ok(c):
            val = th1_inv + c * (th2 @ Z + (th2 @ Z).T) + c * c * Z.T @ th3 @ Z
            return np.linalg.eigvalsh(0.5 * (val + val.T))[0] >= 0

        hi = 1.0
        while ok(hi) and hi < 1e6:
            hi *= 2.0
        lo = 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
        out.append(rng.uniform(0.0, 1.0) * lo * Z)
    return out


def test_bound_certifies_sampled_uncertainty():
    rng = np.random.default_rng(42)
    found = 0
    while found < 10:
        nn, mm, pp = 3, 2, 2
        A = rng.standard_normal((nn, nn))
        phi = -(A @ A.T) - 1.5 * np.eye(nn)
        g = 0.4 * rng.standard_normal((nn, mm))
        h = 0.4 * rng.standard_normal((pp, nn))
        f = 0.2 * rng.standard_normal((pp, mm))
        B = rng.standard_normal((pp, pp))
        th1 = B @ B.T + 0.5 * np.eye(pp)
        th2 = 0.1 * rng.standard_normal((pp, mm))
        C = rng.standard_normal((mm, mm))
        th3 = -(C @ C.T) - 0.5 * np.eye(mm)
        wp = builders.lemma6_wellposed(np.linalg.inv(th1), th2, th3, f)
        if not _solve(wp).feasible:
            continue
        prob = _bound_problem(phi, g, h, f, th1, th2, th3)
        if not _solve(prob).feasible:
            continue
        found += 1
        for delta in _sample_delta(rng, np.linalg.inv(th1), th2, th3, 40):
            closed = phi + 2.0 * _sym(g @ np.linalg.solve(
                np.eye(mm) - delta @ f, delta @ h))
            assert np.linalg.eigvalsh(closed)[-1] < 0


def _sym(a):
    return 0.5 * (a + a.T)
