"""Delay-kernel bases and their Gram matrices.

A kernel basis is a vector function m(tau) on the delay window that is
closed under differentiation: dm/dtau = M m, so m(tau) = expm(M tau) m(0).
Polynomials, exponentials, trigonometrics and their products all fit.
The weighting matrix of the generalized Bessel-Legendre inequality is the
inverse of the Gram matrix int_{-r}^{0} m(tau) m(tau)^T dtau, computed
here in closed form through a block matrix exponential.
"""

from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import matrixkit as mk
from .exceptions import DependentBasisError, DimensionError, UnderdeterminedError

__all__ = [
    "KernelBasis", "GramPair", "LiftedKernel", "make_basis", "legendre_basis",
    "gram", "lift", "fit_coefficients", "scale", "ScaleMap",
    "kernel_to_dict", "kernel_from_dict",
]

#: basis rejected when min eig of the Gram matrix falls below this times its trace
GRAM_INDEPENDENCE_TOL = 1e-12

#: max generator "angle" per block-exponential piece in `gram`
_GRAM_PIECE_THETA = 1.0


@dataclass(frozen=True)
class KernelBasis:
    """Kernel vector m(tau) given by its generator pair (M, m(0))."""

    generator: np.ndarray
    m0: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        gen = mk.check_square(self.generator, "generator")
        m0 = np.asarray(self.m0, dtype=float).reshape(-1)
        if m0.shape[0] != gen.shape[0]:
            raise DimensionError(
                f"m0 length {m0.shape[0]} != generator size {gen.shape[0]}")
        if not np.all(np.isfinite(m0)):
            raise DimensionError("m0 has non-finite entries")
        object.__setattr__(self, "generator", gen)
        object.__setattr__(self, "m0", m0)
        if self.labels:
            if len(self.labels) != m0.shape[0]:
                raise DimensionError("labels length mismatch")
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def rho(self):
        return self.m0.shape[0]

    def eval(self, tau):
        """m(tau) = expm(M tau) m(0); tau may be scalar or 1-D array."""
        taus = np.atleast_1d(np.asarray(tau, dtype=float))
        out = np.empty((taus.shape[0], self.rho))
        for i, t in enumerate(taus):
            out[i] = mk.expm(self.generator * t) @ self.m0
        return out[0] if np.isscalar(tau) or np.ndim(tau) == 0 else out


@dataclass(frozen=True)
class GramPair:
    """Gram matrix of a basis over [-r, 0] and its inverse.

    ``f_inv`` is int_{-r}^{0} m m^T dtau (positive definite for an
    independent basis); ``f`` is its inverse, the inequality weight.
    """

    r: float
    f_inv: np.ndarray
    f: np.ndarray


@dataclass(frozen=True)
class LiftedKernel:
    """Kernel lifted to state dimension n: M(tau) = m(tau) (x) I_n."""

    basis: KernelBasis
    n: int
    generator_lifted: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError("state dimension must be >= 1")
        object.__setattr__(
            self, "generator_lifted",
            mk.kron(self.basis.generator, np.eye(self.n)))

    def eval_lifted(self, tau):
        """M(tau) = m(tau) (x) I_n, shape (rho*n, n)."""
        m = self.basis.eval(tau)
        return np.kron(m.reshape(-1, 1), np.eye(self.n))


def make_basis(generator, m0, labels=()):
    """Build a kernel basis from its generator and initial value."""
    return KernelBasis(np.asarray(generator, dtype=float),
                       np.asarray(m0, dtype=float), tuple(labels))


def legendre_basis(degree, r):
    """Legendre-polynomial basis of the given degree on [-r, 0].

    Component i is the shifted Legendre polynomial of degree i in
    u = (tau + r)/r, so the Gram matrix is exactly diag(r/(2i+1)).
    The generator is obtained by exact monomial differentiation
    re-expressed in the Legendre basis (a triangular solve on integer
    coefficients), not by any floating-point fitting.
    """
    if degree < 0:
        raise DimensionError("degree must be >= 0")
    if r <= 0:
        raise DimensionError("delay must be positive")
    d = int(degree)
    # C[i, k]: coefficient of u^k in component i
    C = np.zeros((d + 1, d + 1))
    for i in range(d + 1):
        for k in range(i + 1):
            C[i, k] = (-1.0) ** (i + k) * comb(i, k) * comb(i + k, k)
    # monomial coefficients of d/dtau = (1/r) d/du
    D = np.zeros((d + 1, d + 1))
    for i in range(d + 1):
        for k in range(1, i + 1):
            D[i, k - 1] = k * C[i, k] / r
    gen = np.linalg.solve(C.T, D.T).T  # gen @ C = D
    m0 = C.sum(axis=1)                 # value at tau = 0 (u = 1): all ones
    labels = tuple(f"legendre{i}" for i in range(d + 1))
    return KernelBasis(gen, m0, labels)


def gram(basis, r):
    """Gram matrix int_{-r}^{0} m m^T dtau and its inverse, in closed form.

    Uses the block-exponential construction: with
    E = expm(h [[M, m_a m_a^T], [0, -M^T]]) partitioned into rho x rho
    blocks, E11^{-1} E12 equals the Gram integral of the piece of length
    h starting at the point where the kernel equals m_a.  For small
    ``|M| r`` a single piece reproduces the textbook formula; larger
    windows are split into pieces with the kernel vector marched
    pointwise, which keeps all intermediates at the scale of the kernel
    values themselves (one long exponential of an oscillator or a
    high-degree polynomial generator would lose digits to cancellation).

    Raises
    ------
    DependentBasisError
        If the computed Gram matrix is not numerically positive
        definite, i.e. the components are dependent on [-r, 0].
    """
    if r <= 0:
        raise DimensionError("delay must be positive")
    rho = basis.rho
    M, m0 = basis.generator, basis.m0
    npieces = max(1, int(np.ceil(np.linalg.norm(M, 1) * r / _GRAM_PIECE_THETA)))
    h = r / npieces
    zero = np.zeros((rho, rho))
    eback = mk.expm(-M * h)
    g = np.zeros((rho, rho))
    m = m0.copy()
    for _ in range(npieces):
        E = mk.expm(np.block([[M, np.outer(m, m)], [zero, -M.T]]) * h)
        g += np.linalg.solve(E[:rho, :rho], E[:rho, rho:])
        m = eback @ m
    g = 0.5 * (g + g.T)
    evals = np.linalg.eigvalsh(g)
    if evals[0] <= GRAM_INDEPENDENCE_TOL * np.trace(g):
        raise DependentBasisError(
            f"kernel components are numerically dependent on [-{r}, 0] "
            f"(min eig {evals[0]:.3e}, trace {np.trace(g):.3e})")
    f = np.linalg.inv(g)
    f = 0.5 * (f + f.T)
    return GramPair(r=float(r), f_inv=g, f=f)


def lift(basis, n):
    """Lift a basis to state dimension n."""
    return LiftedKernel(basis=basis, n=int(n))


def fit_coefficients(kernel_samples, basis, n):
    """Least-squares fit of a coefficient matrix against kernel samples.

    Given samples ``(tau_k, Atilde_k)`` of an n x n matrix function known
    to lie in the span of the basis, recover the n x (rho n) coefficient
    matrix A with Atilde(tau) = A (m(tau) (x) I_n).  Exact (up to
    rounding) when the samples truly lie in the span.

    Returns
    -------
    (A, residual) : coefficient matrix and the least-squares residual
        (rms over all sample entries).

    Raises
    ------
    UnderdeterminedError
        If fewer than rho distinct sample abscissae are given, or the
        sample matrix is rank deficient.
    """
    rho = basis.rho
    samples = list(kernel_samples)
    if len(samples) < rho:
        raise UnderdeterminedError(
            f"need at least rho={rho} samples, got {len(samples)}")
    taus = np.array([float(t) for t, _ in samples])
    mats = [mk.as_matrix(a, "sample") for _, a in samples]
    for a in mats:
        if a.shape != (n, n):
            raise DimensionError(f"sample shape {a.shape}, expected {(n, n)}")
    mvals = np.stack([basis.eval(t) for t in taus])        # (K, rho)
    if np.linalg.matrix_rank(mvals, tol=1e-10 * max(1.0, np.abs(mvals).max())) < rho:
        raise UnderdeterminedError("sample abscissae do not span the basis")
    rhs = np.stack([a.reshape(-1) for a in mats])          # (K, n*n)
    sol, _, _, _ = np.linalg.lstsq(mvals, rhs, rcond=None)  # (rho, n*n)
    resid = mvals @ sol - rhs
    residual = float(np.sqrt(np.mean(resid ** 2))) if resid.size else 0.0
    a3 = np.hstack([sol[i].reshape(n, n) for i in range(rho)])
    return a3, residual


@dataclass(frozen=True)
class ScaleMap:
    """Change of coefficients accompanying a diagonal kernel rescaling.

    For m'(tau) = S m(tau) the distributed term is preserved by mapping
    A -> A (S^{-1} (x) I_n); ``apply`` performs that mapping.
    """

    s: np.ndarray

    def apply(self, coeff):
        coeff = mk.as_matrix(coeff, "coefficient matrix")
        rho = self.s.shape[0]
        if coeff.shape[1] % rho:
            raise DimensionError(
                f"coefficient columns {coeff.shape[1]} not divisible by rho={rho}")
        n = coeff.shape[1] // rho
        return coeff @ np.kron(np.diag(1.0 / self.s), np.eye(n))


def scale(basis, s):
    """Rescale basis components by a positive vector s.

    Returns the new basis (m' = S m, M' = S M S^{-1}) together with the
    coefficient map that keeps every distributed term unchanged.  Purely
    a conditioning device; it introduces no conservatism.
    """
    s = np.asarray(s, dtype=float).reshape(-1)
    if s.shape[0] != basis.rho:
        raise DimensionError("scale vector length != rho")
    if np.any(s <= 0):
        raise DimensionError("scale entries must be positive")
    S = np.diag(s)
    Sinv = np.diag(1.0 / s)
    scaled = KernelBasis(S @ basis.generator @ Sinv, s * basis.m0, basis.labels)
    return scaled, ScaleMap(s=s)


def auto_scale_vector(basis, r):
    """Scale vector equalizing the diagonal of the Gram matrix.

    With s_i = 1/sqrt(g_ii) the rescaled Gram matrix has unit diagonal,
    which keeps the inequality weight well within solver range even for
    kernels mixing O(1) and O(10) components.
    """
    g = gram(basis, r).f_inv
    return 1.0 / np.sqrt(np.diag(g))


def kernel_to_dict(basis):
    """Kernel JSON fragment: {"rho", "M", "m0", "labels"}."""
    return {
        "rho": basis.rho,
        "M": [[float(x) for x in row] for row in basis.generator],
        "m0": [float(x) for x in basis.m0],
        "labels": list(basis.labels),
    }


def kernel_from_dict(d):
    """Parse the kernel JSON fragment."""
    try:
        gen = np.asarray(d["M"], dtype=float)
        m0 = np.asarray(d["m0"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise DimensionError(f"bad kernel fragment: {exc}") from exc
    basis = KernelBasis(gen, m0, tuple(d.get("labels") or ()))
    rho = d.get("rho")
    if rho is not None and int(rho) != basis.rho:
        raise DimensionError(f"kernel fragment rho={rho} but M is {basis.rho}x{basis.rho}")
    return basis
