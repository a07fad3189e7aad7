"""Semidefinite feasibility/optimization backend and synthesis extraction.

Problems are compiled into cvxopt's conic form.  Strict inequalities are
handled through a margin formulation: feasibility solves
``maximize t  s.t.  +/-(expr) - t I >= 0`` with t capped at 1 (the
stability conditions are homogeneous, so an uncapped margin would be
unbounded), and declares feasibility from an eigenvalue margin
recomputed directly from the returned assignment, independent of any
solver internals.  That re-verification is what makes the backend
swappable.
"""

import io
import json
from contextlib import redirect_stdout
from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix as cvxmat
from cvxopt import solvers as cvxsolvers

from .exceptions import ExtractionError, NumericalFailureError
from .lmi import compile_constraint

__all__ = [
    "SolverOptions", "Certificate", "SynthesisResult",
    "solve_feasibility", "minimize_linear", "extract_synthesis",
    "certificate_margins",
]


@dataclass(frozen=True)
class SolverOptions:
    abstol: float = 1e-8
    reltol: float = 1e-8
    feastol: float = 1e-8
    maxiters: int = 200
    margin_cap: float = 1.0
    feas_threshold_coeff: float = 1e-7
    trace_path: str | None = None

    def as_dict(self):
        return {"abstol": self.abstol, "reltol": self.reltol,
                "feastol": self.feastol, "maxiters": self.maxiters}


DEFAULT_OPTIONS = SolverOptions()


@dataclass
class Certificate:
    """Solved assignment with an independently recomputed margin."""

    status: str                      # "feasible" | "infeasible" | "numerical-failure"
    values: dict                     # variable name -> ndarray
    margin: float
    objective_value: float | None
    iterations: int
    solver_status: str
    threshold: float
    message: str = ""
    constraint_margins: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return self.status == "feasible"


@dataclass(frozen=True)
class SynthesisResult:
    """Controller and functional matrices recovered from a synthesis solve."""

    K: np.ndarray
    gamma: float | None
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray
    U: np.ndarray
    x_cond: float
    kappa1: float | None = None
    kappa2: float | None = None


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------

class _Compiled:
    def __init__(self, problem):
        self.problem = problem
        self.offsets = {}
        off = 0
        for v in problem.variables:
            self.offsets[v.vid] = (off, off + v.nscalars)
            off += v.nscalars
        self.nx = off
        self.cons = []
        self.const_scale = 1.0
        for con in problem.constraints:
            k0, coeffs = compile_constraint(con, problem.variables)
            scale = max(np.abs(k0).max() if k0.size else 0.0, 1.0)
            self.const_scale = max(self.const_scale,
                                   np.abs(k0).max() if k0.size else 0.0)
            self.cons.append((con, k0, coeffs, scale))

    def assignment_from_x(self, x):
        by_vid, by_name = {}, {}
        for v in self.problem.variables:
            a, b = self.offsets[v.vid]
            val = v.from_scalars(x[a:b])
            by_vid[v.vid] = val
            by_name[v.name] = val
        return by_vid, by_name

    def cvxopt_data(self, with_margin):
        """Build (c, Gl, hl, Gs, hs); the margin variable is appended last."""
        nx = self.nx + (1 if with_margin else 0)
        gl_rows, hl = [], []
        gs, hs = [], []
        if with_margin:
            row = np.zeros(nx)
            row[-1] = 1.0
            gl_rows.append(row)
            hl.append(DEFAULT_OPTIONS.margin_cap)
        for con, k0, coeffs, scale in self.cons:
            d = con.dim
            if d == 0:
                continue
            sgn = float(con.sense)
            if d == 1:
                # scalar inequality folded into the LP cone
                row = np.zeros(nx)
                for vid, stack in coeffs.items():
                    a, _ = self.offsets[vid]
                    row[a:a + stack.shape[0]] = -sgn * stack[:, 0, 0] / scale
                if with_margin:
                    row[-1] = 1.0
                gl_rows.append(row)
                hl.append(sgn * k0[0, 0] / scale)
                continue
            G = np.zeros((d * d, nx))
            for vid, stack in coeffs.items():
                a, _ = self.offsets[vid]
                G[:, a:a + stack.shape[0]] = \
                    (-sgn / scale) * stack.reshape(stack.shape[0], d * d).T
            if with_margin:
                G[:, -1] = np.eye(d).reshape(-1)
            gs.append(cvxmat(G))
            hs.append(cvxmat(sgn * k0 / scale))
        Gl = cvxmat(np.vstack(gl_rows)) if gl_rows else None
        hlv = cvxmat(np.array(hl)) if hl else None
        return nx, Gl, hlv, gs, hs


def _run_cvxopt(c, Gl, hl, Gs, hs, options):
    """Run cvxopt, retrying once with relaxed tolerances on breakdown.

    The certificate is re-verified from eigenvalues afterwards, so a
    laxer solver run can never produce a silently wrong answer; it can
    only rescue an iterate the tight run would have lost.
    """
    buf = io.StringIO()
    last_exc = None
    for tol in (None, 10.0, 1000.0):
        opts = {"show_progress": options.trace_path is not None,
                "maxiters": options.maxiters,
                "abstol": options.abstol * (tol or 1.0),
                "reltol": options.reltol * (tol or 1.0),
                "feastol": options.feastol * (tol or 1.0)}
        try:
            with redirect_stdout(buf):
                sol = cvxsolvers.sdp(cvxmat(c), Gl=Gl, hl=hl, Gs=Gs, hs=hs,
                                     options=opts)
            if options.trace_path:
                _write_trace(options.trace_path, buf.getvalue())
            return sol
        except (ValueError, ArithmeticError, ZeroDivisionError) as exc:
            last_exc = exc
    raise NumericalFailureError(f"conic solver failed: {last_exc}")


def _write_trace(path, text):
    with open(path, "a", encoding="utf-8") as fh:
        for line in text.splitlines():
            parts = line.split()
            if len(parts) >= 6 and parts[0].rstrip(":").isdigit():
                fh.write(json.dumps({
                    "iter": int(parts[0].rstrip(":")),
                    "pcost": float(parts[1]), "dcost": float(parts[2]),
                    "gap": float(parts[3]), "pres": float(parts[4]),
                    "dres": float(parts[5])}) + "\n")


def certificate_margins(problem, values):
    """Per-constraint definiteness margins at a named assignment."""
    by_vid = {problem.var_by_name(name).vid: val for name, val in values.items()}
    return {con.label: con.residual(by_vid) for con in problem.constraints}


def _certify(compiled, x, iterations, solver_status, options, objective=None):
    problem = compiled.problem
    by_vid, by_name = compiled.assignment_from_x(x)
    margins = {c.label: c.residual(by_vid) for c in problem.constraints}
    margin = min(margins.values()) if margins else np.inf
    threshold = options.feas_threshold_coeff * (1.0 + compiled.const_scale)
    status = "feasible" if margin > threshold else "infeasible"
    obj = problem.objective_value(by_vid) if objective is None else objective
    return Certificate(status=status, values=by_name, margin=float(margin),
                       objective_value=obj, iterations=iterations,
                       solver_status=solver_status, threshold=threshold,
                       constraint_margins=margins)


def solve_feasibility(problem, options=DEFAULT_OPTIONS):
    """Maximize the uniform definiteness margin and certify the result.

    Returns a feasible certificate only when the recomputed eigenvalue
    margin clears the strictness threshold; a solver breakdown with a
    verifiable assignment is still accepted, otherwise the certificate
    carries status "numerical-failure".
    """
    compiled = _Compiled(problem)
    nx, Gl, hl, gs, hs = compiled.cvxopt_data(with_margin=True)
    c = np.zeros(nx)
    c[-1] = -1.0  # maximize margin
    try:
        sol = _run_cvxopt(c, Gl, hl, gs, hs, options)
    except NumericalFailureError as exc:
        return Certificate(status="numerical-failure", values={},
                           margin=-np.inf, objective_value=None, iterations=0,
                           solver_status="breakdown", threshold=np.nan,
                           message=str(exc))
    status = sol["status"]
    if sol["x"] is None:
        if status == "primal infeasible":
            # cannot happen for the margin form (t -> -inf is feasible);
            # treat defensively as a failed run
            return Certificate(status="numerical-failure", values={},
                               margin=-np.inf, objective_value=None,
                               iterations=sol.get("iterations", 0),
                               solver_status=status, threshold=np.nan,
                               message="solver returned no iterate")
        return Certificate(status="numerical-failure", values={},
                           margin=-np.inf, objective_value=None,
                           iterations=sol.get("iterations", 0),
                           solver_status=status, threshold=np.nan,
                           message="solver returned no iterate")
    x = np.array(sol["x"]).reshape(-1)[:compiled.nx]
    cert = _certify(compiled, x, sol.get("iterations", 0), status, options)
    if status not in ("optimal",) and not cert.feasible:
        # unable to certify and solver did not converge: inconclusive
        cert.status = "numerical-failure"
        cert.message = f"solver status {status!r} and margin {cert.margin:.3e}"
    return cert


def minimize_linear(problem, options=DEFAULT_OPTIONS):
    """Minimize the problem's linear objective subject to its constraints."""
    if problem.objective is None:
        raise NumericalFailureError("problem has no objective")
    compiled = _Compiled(problem)
    nx, Gl, hl, gs, hs = compiled.cvxopt_data(with_margin=False)
    c = np.zeros(nx)
    for vid, C in problem.objective:
        a, b = compiled.offsets[vid]
        var = problem.variables[vid]
        if var.kind == "symmetric":
            # objective <C, V> with both triangles folded onto the scalars
            Cs = C + C.T - np.diag(np.diag(C))
            c[a:b] = var.to_scalars(Cs)
        else:
            c[a:b] = C.reshape(-1)
    sol = _run_cvxopt(c, Gl, hl, gs, hs, options)
    status = sol["status"]
    if status == "dual infeasible":
        raise NumericalFailureError("objective is unbounded below")
    if sol["x"] is None:
        if status == "primal infeasible":
            return Certificate(status="infeasible", values={}, margin=-np.inf,
                               objective_value=None,
                               iterations=sol.get("iterations", 0),
                               solver_status=status, threshold=np.nan,
                               message="primal infeasible")
        return Certificate(status="numerical-failure", values={},
                           margin=-np.inf, objective_value=None,
                           iterations=sol.get("iterations", 0),
                           solver_status=status, threshold=np.nan)
    x = np.array(sol["x"]).reshape(-1)
    by_vid, by_name = compiled.assignment_from_x(x)
    margins = {c_.label: c_.residual(by_vid) for c_ in problem.constraints}
    margin = min(margins.values()) if margins else np.inf
    # the optimum sits on the constraint boundary; accept tiny violations
    tol = 10 * options.feastol * (1.0 + compiled.const_scale)
    ok = status == "optimal" and margin > -tol
    return Certificate(status="feasible" if ok else "numerical-failure",
                       values=by_name, margin=float(margin),
                       objective_value=problem.objective_value(by_vid),
                       iterations=sol.get("iterations", 0),
                       solver_status=status,
                       threshold=-tol, constraint_margins=margins)


def extract_synthesis(cert, problem):
    """Recover the gain K = V X^{-1} and the functional matrices.

    Inverts the congruence change of variables of the synthesis
    condition, so the returned (P, Q, R, S, U) certify the analysis form
    of the solved inequality for the closed loop under K.
    """
    meta = problem.meta
    if meta.get("kind") not in ("synthesis", "robust_synthesis"):
        raise ExtractionError("problem was not built by a synthesis builder")
    if not cert.values:
        raise ExtractionError("certificate carries no assignment")
    X = cert.values["X"]
    V = cert.values["V"]
    x_cond = float(np.linalg.cond(X))
    if not np.isfinite(x_cond) or x_cond > 1e12:
        raise ExtractionError(f"slack X numerically singular (cond {x_cond:.3e})")
    K = np.linalg.solve(X.T, V.T).T
    n = X.shape[0]
    rho = cert.values["Q"].shape[1] // n
    Xi = np.linalg.inv(X)
    IXi = np.kron(np.eye(rho), Xi)
    P = Xi.T @ cert.values["P"] @ Xi
    Q = Xi.T @ cert.values["Q"] @ IXi
    R = IXi.T @ cert.values["R"] @ IXi
    S = Xi.T @ cert.values["S"] @ Xi
    U = Xi.T @ cert.values["U"] @ Xi
    gamma = None
    if meta.get("gamma_var") is not None:
        gamma = float(cert.values["gamma"].reshape(()))
    kappa1 = kappa2 = None
    if "kappa1_var" in meta and meta["kappa1_var"] is not None:
        kappa1 = float(cert.values["kappa1"].reshape(()))
    if meta.get("nu_var") is not None:
        kappa2 = 1.0 / float(cert.values["nu"].reshape(()))
    return SynthesisResult(K=K, gamma=gamma, P=0.5 * (P + P.T), Q=Q,
                           R=0.5 * (R + R.T), S=0.5 * (S + S.T),
                           U=0.5 * (U + U.T), x_cond=x_cond,
                           kappa1=kappa1, kappa2=kappa2)
