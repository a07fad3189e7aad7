"""Problem data model: systems, closed loops, supply rates, uncertainty.

The plant is

    dx/dt = A1 x(t) + A2 x(t-r) + int_{-r}^{0} A3 (m(tau) (x) I_n) x(t+tau) dtau
            + B1 u(t) + B2 w(t)
    z(t)  = C1 x(t) + C2 x(t-r) + int_{-r}^{0} C3 (m(tau) (x) I_n) x(t+tau) dtau
            + D1 u(t) + D2 w(t)

with a kernel basis m of size rho, state feedback u = K x, disturbance w
and regulated output z.  Performance is a quadratic supply rate in (z, w)
covering L2 gain, sector and passivity constraints; robustness enters
through ten linear-fractional uncertainty channels with full-block
quadratic constraints.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernel as kb
from . import matrixkit as mk
from .exceptions import DimensionError, InputError

__all__ = [
    "DDSystem", "ClosedLoop", "SupplyRate", "UncertaintyChannel",
    "UncertaintySet", "TuningParams", "validate", "close_loop",
    "l2_supply", "l2_objective", "sector_supply", "passivity_supply",
    "custom_supply", "system_to_dict", "system_from_dict",
]

# which state-space matrix each uncertainty channel perturbs, in order
CHANNEL_TARGETS = ("A1", "B1", "A2", "A3", "B2", "C1", "D1", "C2", "C3", "D2")


@dataclass(frozen=True)
class DDSystem:
    """State-space data of a linear distributed-delay plant."""

    r: float
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    C3: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    basis: kb.KernelBasis

    def __post_init__(self):
        for name in ("A1", "A2", "A3", "B1", "B2", "C1", "C2", "C3", "D1", "D2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def n(self):
        return self.A1.shape[0]

    @property
    def m(self):
        return self.C1.shape[0]

    @property
    def p(self):
        return self.B1.shape[1]

    @property
    def q(self):
        return self.B2.shape[1]

    @property
    def rho(self):
        return self.basis.rho

    def a3_of(self, tau):
        """Distributed state coefficient A3 (m(tau) (x) I_n)."""
        m = self.basis.eval(tau)
        return self.A3 @ np.kron(m.reshape(-1, 1), np.eye(self.n))

    def c3_of(self, tau):
        """Distributed output coefficient C3 (m(tau) (x) I_n)."""
        m = self.basis.eval(tau)
        return self.C3 @ np.kron(m.reshape(-1, 1), np.eye(self.n))


@dataclass(frozen=True)
class ClosedLoop:
    """Plant under state feedback u = K x."""

    base: DDSystem
    K: np.ndarray
    Pi1: np.ndarray
    Omega1: np.ndarray


def validate(sys):
    """Return a list of diagnostics; empty iff the system is well formed."""
    out = []
    n, m, p, q, rho = sys.n, sys.m, sys.p, sys.q, sys.rho
    if sys.r <= 0 or not np.isfinite(sys.r):
        out.append(f"delay r={sys.r} must be positive and finite")
    expected = {
        "A1": (n, n), "A2": (n, n), "A3": (n, rho * n),
        "B1": (n, p), "B2": (n, q),
        "C1": (m, n), "C2": (m, n), "C3": (m, rho * n),
        "D1": (m, p), "D2": (m, q),
    }
    for name, shape in expected.items():
        a = getattr(sys, name)
        if a.shape != shape:
            out.append(f"{name}: shape {a.shape}, expected {shape}")
        elif a.size and not np.all(np.isfinite(a)):
            out.append(f"{name}: non-finite entries")
    if n < 1:
        out.append("state dimension must be >= 1")
    if sys.r > 0 and np.isfinite(sys.r):
        try:
            kb.gram(sys.basis, sys.r)
        except Exception as exc:
            out.append(f"kernel basis dependent on [-{sys.r}, 0]: {exc}")
    return out


def close_loop(sys, K):
    """Close the loop with gain K: Pi1 = A1 + B1 K, Omega1 = C1 + D1 K."""
    K = np.asarray(K, dtype=float)
    if K.shape != (sys.p, sys.n):
        raise DimensionError(f"gain shape {K.shape}, expected {(sys.p, sys.n)}")
    return ClosedLoop(base=sys, K=K, Pi1=sys.A1 + sys.B1 @ K,
                      Omega1=sys.C1 + sys.D1 @ K)


@dataclass(frozen=True)
class SupplyRate:
    """Quadratic supply s(z, w) = -[z; w]^T [[J1inv, J2], [*, J3]] [z; w].

    ``J1`` is the inverse of the (1,1) weight; it is what enters the
    synthesis conditions after the Schur step.  ``J1 is None`` encodes
    the passivity shape J1inv = 0, where no Schur block exists.  For the
    L2-gain kind with ``gamma is None`` the attenuation level is left as
    a decision variable to be minimized.
    """

    kind: str
    m: int
    q: int
    J1: np.ndarray | None
    J2: np.ndarray
    J3: np.ndarray
    gamma: float | None = None
    alpha: float | None = None

    @property
    def is_gamma_variable(self):
        return self.kind == "l2gain" and self.gamma is None

    @property
    def has_schur_block(self):
        return self.J1 is not None


def l2_supply(gamma, m, q):
    """L2-gain supply: J1 = gamma I_m, J2 = 0, J3 = -gamma I_q."""
    if gamma is None:
        return l2_objective(m, q)
    if gamma <= 0:
        raise InputError(f"gamma must be positive, got {gamma}")
    return SupplyRate(kind="l2gain", m=m, q=q, J1=gamma * np.eye(m),
                      J2=np.zeros((m, q)), J3=-gamma * np.eye(q), gamma=float(gamma))


def l2_objective(m, q):
    """L2-gain supply with gamma as the optimization variable."""
    return SupplyRate(kind="l2gain", m=m, q=q, J1=np.eye(m),
                      J2=np.zeros((m, q)), J3=-np.eye(q), gamma=None)


def sector_supply(alpha, gamma, m):
    """Sector-constraint supply (requires m = q)."""
    return SupplyRate(kind="sector", m=m, q=m,
                      J1=np.eye(m),
                      J2=-0.5 * (alpha + gamma) * np.eye(m),
                      J3=-alpha * gamma * np.eye(m),
                      gamma=float(gamma), alpha=float(alpha))


def passivity_supply(m):
    """Strict passivity supply: J1inv = 0, J2 = -I, J3 = 0 (m = q)."""
    return SupplyRate(kind="passivity", m=m, q=m, J1=None,
                      J2=-np.eye(m), J3=np.zeros((m, m)))


def custom_supply(J1, J2, J3, m, q):
    """Arbitrary supply with J1 > 0 (required by the Schur step)."""
    J1 = mk.symmetrize(np.asarray(J1, dtype=float))
    J3 = mk.symmetrize(np.asarray(J3, dtype=float))
    J2 = np.asarray(J2, dtype=float)
    if J1.shape != (m, m) or J3.shape != (q, q) or J2.shape != (m, q):
        raise DimensionError("custom supply: bad shapes")
    if m and mk.min_eig_sym(J1) <= 0:
        raise InputError("custom supply requires J1 positive definite")
    return SupplyRate(kind="custom", m=m, q=q, J1=J1, J2=J2, J3=J3)


@dataclass(frozen=True)
class UncertaintyChannel:
    """One linear-fractional channel G (I - Delta F)^{-1} Delta H.

    Delta has shape (a, b); the quadratic constraint on Delta is
    [I; Delta]^T [[Xi^{-1}, Lam], [*, Gam]] [I; Delta] >= 0 with Xi > 0
    and Gam <= 0.  A channel with a = b = 0 is inactive.
    """

    G: np.ndarray
    H: np.ndarray
    F: np.ndarray
    Xi: np.ndarray
    Lam: np.ndarray
    Gam: np.ndarray

    @property
    def a(self):
        return self.G.shape[1]

    @property
    def b(self):
        return self.H.shape[0]

    @property
    def active(self):
        return self.a > 0 and self.b > 0


def inactive_channel():
    z = np.zeros((0, 0))
    return UncertaintyChannel(G=z, H=z, F=z, Xi=z, Lam=z, Gam=z)


@dataclass(frozen=True)
class UncertaintySet:
    """The ten per-matrix uncertainty channels, in the order of
    ``CHANNEL_TARGETS``."""

    channels: tuple

    def __post_init__(self):
        if len(self.channels) != 10:
            raise DimensionError("uncertainty set needs exactly 10 channels")
        object.__setattr__(self, "channels", tuple(self.channels))

    def validate(self, sys):
        """Diagnostics (empty iff consistent with the given system)."""
        out = []
        n, m, p, q, rho = sys.n, sys.m, sys.p, sys.q, sys.rho
        rows = [n, n, n, n, n, m, m, m, m, m]
        cols = [n, p, n, rho * n, q, n, p, n, rho * n, q]
        for i, ch in enumerate(self.channels):
            tag = f"channel {i + 1} ({CHANNEL_TARGETS[i]})"
            if not ch.active:
                continue
            a, b = ch.a, ch.b
            if ch.G.shape != (rows[i], a):
                out.append(f"{tag}: G shape {ch.G.shape}, expected ({rows[i]}, {a})")
            if ch.H.shape != (b, cols[i]):
                out.append(f"{tag}: H shape {ch.H.shape}, expected ({b}, {cols[i]})")
            if ch.F.shape != (b, a):
                out.append(f"{tag}: F shape {ch.F.shape}, expected ({b}, {a})")
            if ch.Xi.shape != (b, b):
                out.append(f"{tag}: Xi shape {ch.Xi.shape}, expected ({b}, {b})")
            elif not mk.is_symmetric(ch.Xi) or mk.min_eig_sym(ch.Xi) <= 0:
                out.append(f"{tag}: Xi must be symmetric positive definite")
            if ch.Lam.shape != (b, a):
                out.append(f"{tag}: Lam shape {ch.Lam.shape}, expected ({b}, {a})")
            if ch.Gam.shape != (a, a):
                out.append(f"{tag}: Gam shape {ch.Gam.shape}, expected ({a}, {a})")
            elif not mk.is_symmetric(ch.Gam) or mk.max_eig_sym(ch.Gam) > 1e-12:
                out.append(f"{tag}: Gam must be symmetric negative semidefinite")
        return out


@dataclass(frozen=True)
class TuningParams:
    """Slack-structure tuning factors of the synthesis condition."""

    eta1: float = 1.0
    eta2: float = 0.0
    eps: tuple = ()

    def eps_for(self, rho):
        if not self.eps:
            return np.zeros(rho)
        e = np.asarray(self.eps, dtype=float)
        if e.shape[0] != rho:
            raise DimensionError(f"eps length {e.shape[0]} != rho {rho}")
        return e


# ---------------------------------------------------------------------------
# JSON (de)serialization
# ---------------------------------------------------------------------------

def _mat_list(a):
    return [[float(x) for x in row] for row in np.atleast_2d(a)]


def system_to_dict(sys, supply=None, unc=None, tuning=None):
    """System JSON with optional supply / uncertainty / tuning sections."""
    d = {
        "n": sys.n, "m": sys.m, "p": sys.p, "q": sys.q, "r": float(sys.r),
        "kernel": kb.kernel_to_dict(sys.basis),
    }
    for name in ("A1", "A2", "A3", "B1", "B2", "C1", "C2", "C3", "D1", "D2"):
        d[name] = _mat_list(getattr(sys, name))
    if supply is not None:
        s = {"kind": supply.kind}
        if supply.kind == "l2gain":
            s["gamma"] = supply.gamma
        elif supply.kind == "sector":
            s["alpha"], s["gamma"] = supply.alpha, supply.gamma
        elif supply.kind == "custom":
            s["J1"], s["J2"], s["J3"] = (_mat_list(supply.J1),
                                         _mat_list(supply.J2), _mat_list(supply.J3))
        d["supply"] = s
    if unc is not None:
        d["uncertainty"] = [
            None if not ch.active else {
                "G": _mat_list(ch.G), "H": _mat_list(ch.H), "F": _mat_list(ch.F),
                "Xi": _mat_list(ch.Xi), "Lambda": _mat_list(ch.Lam),
                "Gamma": _mat_list(ch.Gam),
            }
            for ch in unc.channels]
    if tuning is not None:
        d["tuning"] = {"eta1": tuning.eta1, "eta2": tuning.eta2,
                       "eps": list(tuning.eps)}
    return d


def _req_mat(d, name, shape):
    try:
        a = np.asarray(d[name], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"missing or malformed matrix {name!r}") from exc
    a = np.atleast_2d(a)
    if a.shape != shape:
        # allow empty matrices spelled as []
        if 0 in shape and a.size == 0:
            return np.zeros(shape)
        raise InputError(f"{name}: shape {a.shape}, expected {shape}")
    return a


def system_from_dict(d):
    """Parse the system JSON; returns (system, supply, uncertainty, tuning).

    ``supply`` is None when the config carries no supply section (pure
    stability analysis); likewise for uncertainty and tuning.
    """
    try:
        n, m, p, q = int(d["n"]), int(d["m"]), int(d["p"]), int(d["q"])
        r = float(d["r"])
        basis = kb.kernel_from_dict(d["kernel"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad system config: {exc}") from exc
    rho = basis.rho
    shapes = {
        "A1": (n, n), "A2": (n, n), "A3": (n, rho * n), "B1": (n, p),
        "B2": (n, q), "C1": (m, n), "C2": (m, n), "C3": (m, rho * n),
        "D1": (m, p), "D2": (m, q),
    }
    mats = {name: _req_mat(d, name, shape) for name, shape in shapes.items()}
    sys = DDSystem(r=r, basis=basis, **mats)

    supply = None
    s = d.get("supply")
    if s is not None:
        kind = s.get("kind")
        if kind == "l2gain":
            supply = l2_supply(s.get("gamma"), m, q)
        elif kind == "sector":
            if m != q:
                raise InputError("sector supply requires m == q")
            supply = sector_supply(float(s["alpha"]), float(s["gamma"]), m)
        elif kind == "passivity":
            if m != q:
                raise InputError("passivity supply requires m == q")
            supply = passivity_supply(m)
        elif kind == "custom":
            supply = custom_supply(np.asarray(s["J1"], dtype=float),
                                   np.asarray(s["J2"], dtype=float),
                                   np.asarray(s["J3"], dtype=float), m, q)
        else:
            raise InputError(f"unknown supply kind {kind!r}")

    unc = None
    u = d.get("uncertainty")
    if u is not None:
        if len(u) != 10:
            raise InputError("uncertainty must list exactly 10 channels (null allowed)")
        channels = []
        for i, ch in enumerate(u):
            if ch is None:
                channels.append(inactive_channel())
                continue
            try:
                channels.append(UncertaintyChannel(
                    G=np.atleast_2d(np.asarray(ch["G"], dtype=float)),
                    H=np.atleast_2d(np.asarray(ch["H"], dtype=float)),
                    F=np.atleast_2d(np.asarray(ch["F"], dtype=float)),
                    Xi=np.atleast_2d(np.asarray(ch["Xi"], dtype=float)),
                    Lam=np.atleast_2d(np.asarray(ch["Lambda"], dtype=float)),
                    Gam=np.atleast_2d(np.asarray(ch["Gamma"], dtype=float))))
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"bad uncertainty channel {i + 1}: {exc}") from exc
        unc = UncertaintySet(channels=tuple(channels))
        diag = unc.validate(sys)
        if diag:
            raise InputError("; ".join(diag))

    tuning = None
    t = d.get("tuning")
    if t is not None:
        tuning = TuningParams(eta1=float(t.get("eta1", 1.0)),
                              eta2=float(t.get("eta2", 0.0)),
                              eps=tuple(t.get("eps", ())))
    return sys, supply, unc, tuning


def with_delay(sys, r):
    """Copy of the system with a different delay length."""
    return replace(sys, r=float(r))
