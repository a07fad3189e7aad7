import json
import os

import numpy as np
import pytest
import scipy.linalg as sla

import ddsyn
from ddsyn.model import (DDSystem, TuningParams, UncertaintyChannel,
                         UncertaintySet, system_from_dict)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def load_fixture(name):
    with open(os.path.join(FIXTURES, name), "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def osc_scalar():
    """Scalar plant with oscillatory distributed kernel (analysis golden)."""
    sysm, supply, unc, tuning = system_from_dict(
        load_fixture("oscillatory_scalar_sweep.json"))
    return sysm


@pytest.fixture(scope="session")
def twostate():
    """Two-state plant with exp-trig kernel (synthesis golden)."""
    sysm, supply, unc, tuning = system_from_dict(
        load_fixture("twostate_l2_synthesis.json"))
    return sysm


@pytest.fixture(scope="session")
def twostate_supply():
    _, supply, _, _ = system_from_dict(load_fixture("twostate_l2_synthesis.json"))
    return supply


@pytest.fixture(scope="session")
def twostate_unc():
    _, _, unc, _ = system_from_dict(load_fixture("twostate_robust_synthesis.json"))
    return unc


@pytest.fixture(scope="session")
def tuning_default():
    return TuningParams(eta1=1.0, eta2=0.0, eps=())


PUBLISHED_GAIN = np.array([[1.7839, -6.3792]])
PUBLISHED_ROBUST_GAIN = np.array([[3.2847, -16.7739]])


# ---------------------------------------------------------------------------
# independent oracles shared by several test modules
# ---------------------------------------------------------------------------

def eval_kernel_grid(basis, taus):
    """Kernel values on a uniform grid by stepping one exact exponential."""
    taus = np.asarray(taus)
    dt = taus[1] - taus[0]
    step = sla.expm(basis.generator * dt)
    out = np.empty((taus.shape[0], basis.rho))
    out[0] = sla.expm(basis.generator * taus[0]) @ basis.m0
    for k in range(1, taus.shape[0]):
        out[k] = step @ out[k - 1]
    return out


def adaptive_simpson(f, a, b, tol=1e-10, depth=28):
    """Scalar adaptive Simpson quadrature (test oracle, no library reuse)."""

    def simp(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def rec(x0, x2, f0, f1, f2, whole, eps, d):
        xm = 0.5 * (x0 + x2)
        lm, rm = 0.5 * (x0 + xm), 0.5 * (xm + x2)
        fl, fr = f(lm), f(rm)
        left = simp(x0, xm, f0, fl, f1)
        right = simp(xm, x2, f1, fr, f2)
        if d <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (rec(x0, xm, f0, fl, f1, left, eps / 2.0, d - 1)
                + rec(xm, x2, f1, fr, f2, right, eps / 2.0, d - 1))

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = simp(a, b, fa, fm, fb)
    return rec(a, b, fa, fm, fb, whole, tol, depth)


def gram_by_quadrature(basis, r, tol=1e-11):
    """Entrywise adaptive-Simpson evaluation of the kernel Gram matrix."""
    rho = basis.rho
    out = np.empty((rho, rho))
    for i in range(rho):
        for j in range(i, rho):
            out[i, j] = adaptive_simpson(
                lambda t, i=i, j=j: float(basis.eval(t)[i] * basis.eval(t)[j]),
                -r, 0.0, tol=tol)
            out[j, i] = out[i, j]
    return out


def make_uncertainty(channels_by_index, n_channels=10):
    """UncertaintySet with the given {index: channel} dict, rest inactive."""
    from ddsyn.model import inactive_channel
    chans = []
    for i in range(1, n_channels + 1):
        chans.append(channels_by_index.get(i, inactive_channel()))
    return UncertaintySet(channels=tuple(chans))


def zero_channel(rows, cols, dim):
    """Active channel with zero G/H (no actual uncertainty)."""
    return UncertaintyChannel(
        G=np.zeros((rows, dim)), H=np.zeros((dim, cols)),
        F=np.zeros((dim, dim)), Xi=np.eye(dim), Lam=np.zeros((dim, dim)),
        Gam=-np.eye(dim))


def random_stable_plant(rng, rho=2, n=2, p=1, q=1, m=1, r=0.4):
    """Random plant biased toward thm1 feasibility (for property suites)."""
    A1 = rng.standard_normal((n, n))
    A1 -= (np.max(np.linalg.eigvals(A1).real) + 1.0) * np.eye(n)
    A2 = 0.3 * rng.standard_normal((n, n))
    gen = np.array([[0.0, 0.0], [0.0, -1.0 - rng.uniform(0, 1)]])[:rho, :rho]
    basis = ddsyn.make_basis(gen, np.ones(rho))
    A3 = 0.3 * rng.standard_normal((n, rho * n))
    return DDSystem(
        r=r, A1=A1, A2=A2, A3=A3,
        B1=rng.standard_normal((n, p)), B2=0.5 * rng.standard_normal((n, q)),
        C1=0.5 * rng.standard_normal((m, n)), C2=0.2 * rng.standard_normal((m, n)),
        C3=0.1 * rng.standard_normal((m, rho * n)),
        D1=0.2 * rng.standard_normal((m, p)), D2=0.1 * rng.standard_normal((m, q)),
        basis=basis)
