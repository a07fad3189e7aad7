"""Affine matrix expressions and LMI problem containers.

An :class:`AffExpr` is a matrix-valued expression, affine in a set of
registered decision variables, stored as a constant plus a list of
``L @ V @ R`` terms (plus a scalar-times-constant form for scalar
variables).  Builders assemble block inequalities out of these; the
solver backend compiles them into per-scalar coefficient matrices.

All expressions are immutable value objects; assembling and compiling
never mutates shared state, so problems can be built and solved
concurrently.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError

__all__ = [
    "VarRef", "AffExpr", "Constraint", "LMIProblem",
    "const_expr", "var_expr", "smul_expr", "sy_expr", "bmat", "dsum_expr",
    "kron_const", "ikron_var", "count_decision_variables",
]


@dataclass(frozen=True)
class VarRef:
    """A registered decision variable (matrix, symmetric matrix or scalar)."""

    vid: int
    name: str
    rows: int
    cols: int
    kind: str  # "symmetric" | "rectangular" | "scalar"

    def __post_init__(self):
        if self.kind not in ("symmetric", "rectangular", "scalar"):
            raise DimensionError(f"unknown variable kind {self.kind!r}")
        if self.kind == "symmetric" and self.rows != self.cols:
            raise DimensionError("symmetric variable must be square")
        if self.kind == "scalar" and (self.rows, self.cols) != (1, 1):
            raise DimensionError("scalar variable must be 1x1")

    @property
    def nscalars(self):
        if self.kind == "symmetric":
            return self.rows * (self.rows + 1) // 2
        return self.rows * self.cols

    def to_scalars(self, value):
        """Flatten a matrix value into this variable's scalar vector."""
        value = np.asarray(value, dtype=float).reshape(self.rows, self.cols)
        if self.kind == "symmetric":
            iu = np.triu_indices(self.rows)
            return value[iu]
        return value.reshape(-1)

    def from_scalars(self, vec):
        """Rebuild the matrix value from the scalar vector."""
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.shape[0] != self.nscalars:
            raise DimensionError(f"{self.name}: scalar vector length mismatch")
        if self.kind == "symmetric":
            out = np.zeros((self.rows, self.rows))
            iu = np.triu_indices(self.rows)
            out[iu] = vec
            out = out + out.T - np.diag(np.diag(out))
            return out
        return vec.reshape(self.rows, self.cols)


# term encodings: ("lvr", L, vid, R, transposed) and ("smul", C, vid)
@dataclass(frozen=True)
class AffExpr:
    """Matrix expression, affine in the registered variables."""

    shape: tuple
    const: np.ndarray
    terms: tuple = ()

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def zero(rows, cols):
        return AffExpr((rows, cols), np.zeros((rows, cols)))

    # -- algebra -------------------------------------------------------------

    def __add__(self, other):
        other = _as_expr(other, self.shape)
        if other.shape != self.shape:
            raise DimensionError(f"add: {self.shape} vs {other.shape}")
        return AffExpr(self.shape, self.const + other.const,
                       self.terms + other.terms)

    def __sub__(self, other):
        return self + (-_as_expr(other, self.shape))

    def __neg__(self):
        return self * (-1.0)

    def __mul__(self, c):
        c = float(c)
        terms = []
        for t in self.terms:
            if t[0] == "lvr":
                terms.append(("lvr", c * t[1], t[2], t[3], t[4]))
            else:
                terms.append(("smul", c * t[1], t[2]))
        return AffExpr(self.shape, c * self.const, tuple(terms))

    __rmul__ = __mul__

    @property
    def T(self):
        terms = []
        for t in self.terms:
            if t[0] == "lvr":
                _, L, vid, R, tr = t
                terms.append(("lvr", R.T, vid, L.T, not tr))
            else:
                terms.append(("smul", t[1].T, t[2]))
        return AffExpr((self.shape[1], self.shape[0]), self.const.T, tuple(terms))

    def lmul(self, C):
        """C @ expr for a constant C."""
        C = np.asarray(C, dtype=float)
        if C.shape[1] != self.shape[0]:
            raise DimensionError(f"lmul: {C.shape} @ {self.shape}")
        terms = []
        for t in self.terms:
            if t[0] == "lvr":
                terms.append(("lvr", C @ t[1], t[2], t[3], t[4]))
            else:
                terms.append(("smul", C @ t[1], t[2]))
        return AffExpr((C.shape[0], self.shape[1]), C @ self.const, tuple(terms))

    def rmul(self, C):
        """expr @ C for a constant C."""
        C = np.asarray(C, dtype=float)
        if self.shape[1] != C.shape[0]:
            raise DimensionError(f"rmul: {self.shape} @ {C.shape}")
        terms = []
        for t in self.terms:
            if t[0] == "lvr":
                terms.append(("lvr", t[1], t[2], t[3] @ C, t[4]))
            else:
                terms.append(("smul", t[1] @ C, t[2]))
        return AffExpr((self.shape[0], C.shape[1]), self.const @ C, tuple(terms))

    def at(self, big_rows, big_cols, r0, c0):
        """Embed into a larger zero matrix at block offset (r0, c0)."""
        rows, cols = self.shape
        Er = np.zeros((big_rows, rows))
        Er[r0:r0 + rows, :] = np.eye(rows)
        Ec = np.zeros((cols, big_cols))
        Ec[:, c0:c0 + cols] = np.eye(cols)
        return self.lmul(Er).rmul(Ec)

    # -- evaluation ----------------------------------------------------------

    def value(self, assignment):
        """Evaluate at an assignment mapping vid -> ndarray value."""
        out = self.const.copy()
        for t in self.terms:
            if t[0] == "lvr":
                _, L, vid, R, tr = t
                V = np.asarray(assignment[vid], dtype=float)
                out += L @ (V.T if tr else V) @ R
            else:
                _, C, vid = t
                out += C * float(np.asarray(assignment[vid]).reshape(()))
        return out


def _as_expr(x, shape=None):
    if isinstance(x, AffExpr):
        return x
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        if shape is None:
            raise DimensionError("cannot infer shape of scalar constant")
        arr = arr * np.ones(shape)
    return AffExpr(arr.shape, arr)


def const_expr(a):
    """Wrap a constant matrix as an expression."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return AffExpr(a.shape, a)


def var_expr(var):
    """The expression consisting of the bare variable."""
    L = np.eye(var.rows)
    R = np.eye(var.cols)
    return AffExpr((var.rows, var.cols), np.zeros((var.rows, var.cols)),
                   (("lvr", L, var.vid, R, False),))


def smul_expr(C, var):
    """C times a scalar variable, for a constant matrix C."""
    if var.kind != "scalar":
        raise DimensionError("smul_expr needs a scalar variable")
    C = np.atleast_2d(np.asarray(C, dtype=float))
    return AffExpr(C.shape, np.zeros(C.shape), (("smul", C, var.vid),))


def sy_expr(e):
    """e + e.T for a square expression."""
    e = _as_expr(e)
    if e.shape[0] != e.shape[1]:
        raise DimensionError(f"sy_expr: non-square {e.shape}")
    return e + e.T


def bmat(blocks):
    """Assemble a block matrix from a 2-D grid of expressions/constants."""
    grid = [[_as_expr(b) for b in row] for row in blocks]
    row_h = [row[0].shape[0] for row in grid]
    col_w = [b.shape[1] for b in grid[0]]
    for i, row in enumerate(grid):
        if len(row) != len(col_w):
            raise DimensionError("bmat: ragged rows")
        for j, b in enumerate(row):
            if b.shape != (row_h[i], col_w[j]):
                raise DimensionError(
                    f"bmat: block ({i},{j}) has shape {b.shape}, "
                    f"expected {(row_h[i], col_w[j])}")
    R, C = sum(row_h), sum(col_w)
    out = AffExpr.zero(R, C)
    r0 = 0
    for i, row in enumerate(grid):
        c0 = 0
        for j, b in enumerate(row):
            if b.shape[0] and b.shape[1] and (np.any(b.const) or b.terms):
                out = out + b.at(R, C, r0, c0)
            c0 += col_w[j]
        r0 += row_h[i]
    return out


def dsum_expr(blocks):
    """Block-diagonal direct sum of square expressions."""
    blocks = [_as_expr(b) for b in blocks]
    dims = [b.shape[0] for b in blocks]
    for b in blocks:
        if b.shape[0] != b.shape[1]:
            raise DimensionError("dsum_expr: blocks must be square")
    D = sum(dims)
    out = AffExpr.zero(D, D)
    off = 0
    for b in blocks:
        if b.shape[0]:
            out = out + b.at(D, D, off, off)
        off += b.shape[0]
    return out


def kron_const(F, e):
    """Kronecker product F (x) e with constant F and expression e."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    e = _as_expr(e)
    grid = [[F[i, j] * e for j in range(F.shape[1])] for i in range(F.shape[0])]
    return bmat(grid)


def ikron_var(rho, e):
    """I_rho (x) e."""
    return kron_const(np.eye(rho), e)


@dataclass(frozen=True)
class Constraint:
    """An affine symmetric matrix constrained definite.

    ``sense`` is +1 for "> 0" and -1 for "< 0".
    """

    expr: AffExpr
    sense: int
    label: str

    @property
    def dim(self):
        return self.expr.shape[0]

    def residual(self, assignment):
        """Signed definiteness margin at an assignment (positive = satisfied).

        For a "> 0" constraint this is the smallest eigenvalue; for a
        "< 0" constraint, minus the largest.
        """
        val = self.expr.value(assignment)
        val = 0.5 * (val + val.T)
        if val.size == 0:
            return np.inf
        ev = np.linalg.eigvalsh(val)
        return float(ev[0]) if self.sense > 0 else float(-ev[-1])


class LMIProblem:
    """A set of affine definiteness constraints over registered variables."""

    def __init__(self):
        self.variables = []
        self.constraints = []
        self.objective = None  # list of (vid, coefficient matrix)
        self.meta = {}         # builder-specific context (extraction, reporting)

    # -- variables -----------------------------------------------------------

    def add_var(self, name, rows, cols=None, kind="rectangular"):
        if kind == "scalar":
            rows, cols = 1, 1
        if cols is None:
            cols = rows
        var = VarRef(vid=len(self.variables), name=name, rows=rows,
                     cols=cols, kind=kind)
        self.variables.append(var)
        return var

    def sym(self, name, dim):
        return self.add_var(name, dim, dim, "symmetric")

    def rect(self, name, rows, cols):
        return self.add_var(name, rows, cols, "rectangular")

    def scalar(self, name):
        return self.add_var(name, 1, 1, "scalar")

    def var_by_name(self, name):
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    # -- constraints & objective ----------------------------------------------

    def require_pos(self, expr, label):
        if expr.shape[0] != expr.shape[1]:
            raise DimensionError(f"{label}: constraint must be square")
        self.constraints.append(Constraint(expr=expr, sense=+1, label=label))

    def require_neg(self, expr, label):
        if expr.shape[0] != expr.shape[1]:
            raise DimensionError(f"{label}: constraint must be square")
        self.constraints.append(Constraint(expr=expr, sense=-1, label=label))

    def minimize(self, pairs):
        """Set a linear objective sum_i <C_i, V_i> to be minimized."""
        self.objective = [(v.vid, np.atleast_2d(np.asarray(C, dtype=float)))
                          for v, C in pairs]

    # -- introspection ---------------------------------------------------------

    def random_assignment(self, rng, scale=1.0):
        """Random (symmetry-respecting) assignment for invariant checks."""
        out = {}
        for v in self.variables:
            a = rng.standard_normal((v.rows, v.cols)) * scale
            if v.kind == "symmetric":
                a = 0.5 * (a + a.T)
            out[v.vid] = a
        return out

    def evaluate(self, assignment):
        """Values of all constraint expressions at an assignment."""
        return [c.expr.value(assignment) for c in self.constraints]

    def margin(self, assignment):
        """Worst definiteness margin over all constraints."""
        if not self.constraints:
            return np.inf
        return min(c.residual(assignment) for c in self.constraints)

    def objective_value(self, assignment):
        if self.objective is None:
            return None
        tot = 0.0
        for vid, C in self.objective:
            tot += float(np.sum(C * np.asarray(assignment[vid], dtype=float)))
        return tot

    def dump(self):
        """Debug dump: dense per-variable coefficient matrices per constraint."""
        out = {"variables": [
            {"name": v.name, "rows": v.rows, "cols": v.cols, "kind": v.kind,
             "nscalars": v.nscalars} for v in self.variables]}
        cons = []
        for c in self.constraints:
            k0, coeffs = compile_constraint(c, self.variables)
            cons.append({
                "label": c.label,
                "sense": ">0" if c.sense > 0 else "<0",
                "dim": c.dim,
                "const": k0.tolist(),
                "coeffs": {self.variables[vid].name: a.tolist()
                           for vid, a in coeffs.items()},
            })
        out["constraints"] = cons
        if self.objective is not None:
            out["objective"] = {self.variables[vid].name: C.tolist()
                                for vid, C in self.objective}
        return out


def count_decision_variables(problem):
    """Total scalar degrees of freedom (symmetric k x k counts k(k+1)/2)."""
    return sum(v.nscalars for v in problem.variables)


# ---------------------------------------------------------------------------
# compilation to per-scalar coefficient matrices
# ---------------------------------------------------------------------------

def _term_tensor(L, R, transposed, var):
    """Per-entry coefficient tensor (rows, cols, d1, d2) of L @ V(^T) @ R."""
    if transposed:
        # contribution of E_ij in V is L E_ji R
        return np.einsum("aj,ib->ijab", L, R, optimize=True)
    return np.einsum("ai,jb->ijab", L, R, optimize=True)


def compile_constraint(con, variables):
    """Compile a constraint into (const matrix, {vid: (nscalars, d, d)}).

    The returned coefficient matrices are symmetrized; a genuinely
    asymmetric expression (an assembly bug) raises.
    """
    d = con.dim
    k0 = con.expr.const
    _check_sym(k0, f"{con.label}: constant term")
    k0 = 0.5 * (k0 + k0.T)
    acc = {}
    for t in con.expr.terms:
        if t[0] == "lvr":
            _, L, vid, R, tr = t
            var = variables[vid]
            T4 = _term_tensor(L, R, tr, var)
            if var.kind == "symmetric":
                k = var.rows
                iu, ju = np.triu_indices(k)
                stack = T4[iu, ju] + np.where(
                    (iu != ju)[:, None, None], T4[ju, iu], 0.0)
            elif var.kind == "scalar":
                stack = T4.reshape(1, d, d)
            else:
                stack = T4.reshape(var.rows * var.cols, d, d)
        else:
            _, C, vid = t
            stack = C.reshape(1, d, d)
        if vid in acc:
            acc[vid] = acc[vid] + stack
        else:
            acc[vid] = stack.copy()
    for vid, stack in acc.items():
        name = variables[vid].name
        for s in range(stack.shape[0]):
            _check_sym(stack[s], f"{con.label}: coefficient of {name}[{s}]")
        acc[vid] = 0.5 * (stack + stack.transpose(0, 2, 1))
    return k0, acc


def _check_sym(a, what, tol=1e-10):
    if a.size == 0:
        return
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > tol * scale:
        raise DimensionError(f"{what} is not symmetric "
                             f"(asymmetry {np.abs(a - a.T).max():.3e})")
