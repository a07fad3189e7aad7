"""Builders for every matrix-inequality condition of the toolbox.

Each builder returns an :class:`~ddsyn.lmi.LMIProblem`:

* ``thm1_constraints``      -- dissipative state-feedback synthesis,
* ``analysis_constraints``  -- open-loop dissipativity analysis,
* ``simple_stability_constraints`` -- stability only, no supply,
* ``slack_stability_constraints``  -- stability with structured slack,
* ``thm2_constraints``      -- robust synthesis under full-block
  linear-fractional uncertainty,
* ``robust_analysis_constraints`` -- robust open-loop analysis,
* ``lemma6_wellposed`` / ``lemma6_bound`` -- the scalar-multiplier
  building blocks used by the robust conditions.

All conditions are affine in the registered decision variables.  The
robust synthesis condition is assembled in an equivalent congruence-
scaled form (multiplier nu = 1/kappa2) because the uncertainty input map
contains the slack variables X, V; scaling the multiplier rows by
1/kappa2 moves the scalar onto constant blocks and keeps the condition
jointly affine.  The reported kappa2 is recovered as 1/nu.
"""

import numpy as np

from . import kernel as kb
from . import matrixkit as mk
from .exceptions import DimensionError, InputError
from .lmi import (AffExpr, LMIProblem, bmat, const_expr, dsum_expr,
                  ikron_var, kron_const, smul_expr, sy_expr, var_expr)
from .model import validate

__all__ = [
    "thm1_constraints", "analysis_constraints", "simple_stability_constraints",
    "slack_stability_constraints", "thm2_constraints",
    "robust_analysis_constraints", "lemma6_wellposed", "lemma6_bound",
]


def _lifted_constants(sys):
    """Gram weight and lifted kernel constants for the current delay."""
    gp = kb.gram(sys.basis, sys.r)
    In = np.eye(sys.n)
    M0 = np.kron(sys.basis.m0.reshape(-1, 1), In)
    Mr = np.kron(sys.basis.eval(-sys.r).reshape(-1, 1), In)
    Mhat = np.kron(sys.basis.generator, In)
    return gp, M0, Mr, Mhat


def _check_valid(sys):
    diag = validate(sys)
    if diag:
        raise InputError("invalid system: " + "; ".join(diag))


def _supply_exprs(prob, supply, m, q):
    """(J1_expr | None, J2 const, J3_expr, gamma_var | None).

    For the variable-gamma L2 kind, J1 = gamma I and J3 = -gamma I enter
    through a shared scalar variable with objective "minimize gamma".
    """
    if supply is None:
        if m or q:
            raise InputError("a supply rate is required when m > 0 or q > 0")
        return None, np.zeros((0, 0)), const_expr(np.zeros((0, 0))), None
    if supply.m != m or supply.q != q:
        raise DimensionError(
            f"supply dims ({supply.m},{supply.q}) != system ({m},{q})")
    if supply.is_gamma_variable:
        gamma = prob.scalar("gamma")
        J1_expr = smul_expr(np.eye(m), gamma)
        J3_expr = smul_expr(-np.eye(q), gamma)
        prob.minimize([(gamma, np.ones((1, 1)))])
        return J1_expr, supply.J2, J3_expr, gamma
    J1_expr = None if supply.J1 is None else const_expr(supply.J1)
    return J1_expr, supply.J2, const_expr(supply.J3), None


# ---------------------------------------------------------------------------
# synthesis (Theorem-1 shape)
# ---------------------------------------------------------------------------

def _synthesis_core(prob, sys, supply, tuning):
    """Register synthesis variables and assemble the big block Theta.

    Returns the Theta expression (not yet constrained) so the robust
    builder can wrap it; positivity constraints and the objective are
    added here.
    """
    _check_valid(sys)
    n, m, p, q, rho, r = sys.n, sys.m, sys.p, sys.q, sys.rho, sys.r
    gp, M0, Mr, Mhat = _lifted_constants(sys)
    F = gp.f
    eta1, eta2 = tuning.eta1, tuning.eta2
    eps = tuning.eps_for(rho)

    P = prob.sym("P", n)
    X = prob.rect("X", n, n)
    V = prob.rect("V", p, n)
    Q = prob.rect("Q", n, rho * n)
    R = prob.sym("R", rho * n)
    S = prob.sym("S", n)
    U = prob.sym("U", n)
    J1e, J2, J3e, gamma = _supply_exprs(prob, supply, m, q)
    schur = supply is not None and supply.has_schur_block
    ms = m if schur else 0

    In = np.eye(n)
    Z = AffExpr.zero
    Xe, Ve = var_expr(X), var_expr(V)
    Pe, Qe, Re, Se, Ue = (var_expr(v) for v in (P, Q, R, S, U))
    IX = ikron_var(rho, Xe)

    # slack row structure [I, eta1 I, eta2 I, eps_i I, 0, 0]
    itil = np.hstack([In, eta1 * In, eta2 * In]
                     + [eps[i] * In for i in range(rho)]
                     + [np.zeros((n, q + ms))])
    ytil = bmat([[-1.0 * Xe, Xe.lmul(sys.A1) + Ve.lmul(sys.B1), Xe.lmul(sys.A2),
                  IX.lmul(sys.A3), const_expr(sys.B2), Z(n, ms)]])
    sy_slack = sy_expr(ytil.lmul(itil.T))

    ptil = bmat([[Pe, Z(n, n), Qe, Z(n, q), Z(n, ms)]])

    col_qr = bmat([[Qe], [Z(n, rho * n)], [Re], [Z(q + ms, rho * n)]])
    row_m = np.hstack([M0, -Mr, -Mhat, np.zeros((rho * n, q + ms))])
    t_kernel = sy_expr(col_qr.rmul(row_m))

    diag_blocks = [Se + r * Ue, -1.0 * Se, -1.0 * kron_const(F, Ue), J3e]
    if schur:
        diag_blocks.append(-1.0 * J1e)
    t_diag = dsum_expr(diag_blocks)

    out_rows = [Xe.lmul(sys.C1) + Ve.lmul(sys.D1), Xe.lmul(sys.C2),
                IX.lmul(sys.C3), const_expr(sys.D2)]
    if schur:
        out_rows.append(Z(m, m))
        col_j = np.vstack([np.zeros((2 * n + rho * n, m)), J2.T, np.eye(m)])
    else:
        col_j = np.vstack([np.zeros((2 * n + rho * n, m)), J2.T])
    row_c = bmat([out_rows])
    t_supply = sy_expr(row_c.lmul(col_j)) if m else Z(2 * n + rho * n + q + ms,
                                                      2 * n + rho * n + q + ms)

    phitil = t_kernel + t_diag + t_supply
    theta = sy_slack + bmat([[Z(n, n), ptil], [ptil.T, phitil]])

    prob.require_pos(bmat([[Pe, Qe], [Qe.T, Re + kron_const(F, Se)]]),
                     "lkf_positivity")
    prob.require_pos(Se, "S_pos")
    prob.require_pos(Ue, "U_pos")

    prob.meta.update({
        "kind": "synthesis",
        "vars": {"P": P, "X": X, "V": V, "Q": Q, "R": R, "S": S, "U": U},
        "gamma_var": gamma,
        "gram": gp,
        "schur": schur,
    })
    return theta


def thm1_constraints(sys, supply, tuning):
    """Dissipative state-feedback synthesis conditions.

    Feasibility certifies a stabilizing gain K = V X^{-1} making the
    closed loop dissipative with the given supply; for the variable-
    gamma L2 kind the attenuation level is minimized.
    """
    prob = LMIProblem()
    theta = _synthesis_core(prob, sys, supply, tuning)
    prob.require_neg(theta, "synthesis")
    return prob


# ---------------------------------------------------------------------------
# open-loop analysis
# ---------------------------------------------------------------------------

def _analysis_core(prob, sys, supply):
    """Analysis variables plus the dissipation block Psi (not constrained)."""
    _check_valid(sys)
    n, m, q, rho, r = sys.n, sys.m, sys.q, sys.rho, sys.r
    gp, M0, Mr, Mhat = _lifted_constants(sys)
    F = gp.f

    P = prob.sym("P", n)
    Q = prob.rect("Q", n, rho * n)
    R = prob.sym("R", rho * n)
    S = prob.sym("S", n)
    U = prob.sym("U", n)
    J1e, J2, J3e, gamma = _supply_exprs(prob, supply, m, q)
    schur = supply is not None and supply.has_schur_block

    Z = AffExpr.zero
    Pe, Qe, Re, Se, Ue = (var_expr(v) for v in (P, Q, R, S, U))

    col_pq = bmat([[Pe, Qe],
                   [Z(n, n), Z(n, rho * n)],
                   [Qe.T, Re],
                   [Z(q, n), Z(q, rho * n)]])
    rows = np.block([[sys.A1, sys.A2, sys.A3, sys.B2],
                     [M0, -Mr, -Mhat, np.zeros((rho * n, q))]])
    t_dyn = sy_expr(col_pq.rmul(rows))
    t_diag = dsum_expr([Se + r * Ue, -1.0 * Se, -1.0 * kron_const(F, Ue), J3e])
    z_row = np.hstack([sys.C1, sys.C2, sys.C3, sys.D2])
    if m:
        col_j = np.vstack([np.zeros((2 * n + rho * n, m)), J2.T])
        t_supply = sy_expr(const_expr(z_row).lmul(col_j))
    else:
        d = 2 * n + rho * n + q
        t_supply = Z(d, d)
    phi = t_dyn + t_diag + t_supply

    if schur:
        psi = bmat([[phi, const_expr(z_row.T)],
                    [const_expr(z_row), -1.0 * J1e]])
    else:
        psi = phi

    prob.require_pos(bmat([[Pe, Qe], [Qe.T, Re + kron_const(F, Se)]]),
                     "lkf_positivity")
    prob.require_pos(Se, "S_pos")
    prob.require_pos(Ue, "U_pos")

    prob.meta.update({
        "kind": "analysis",
        "vars": {"P": P, "Q": Q, "R": R, "S": S, "U": U},
        "gamma_var": gamma,
        "gram": gp,
        "schur": schur,
    })
    return psi


def analysis_constraints(sys, supply):
    """Open-loop dissipativity analysis conditions (no slack variables).

    The control channels B1, D1 are ignored (u = 0).
    """
    prob = LMIProblem()
    psi = _analysis_core(prob, sys, supply)
    prob.require_neg(psi, "dissipation")
    return prob


def simple_stability_constraints(sys):
    """Stability-only analysis: supply and output rows removed."""
    _check_valid(sys)
    n, rho, r = sys.n, sys.rho, sys.r
    gp, M0, Mr, Mhat = _lifted_constants(sys)
    F = gp.f

    prob = LMIProblem()
    P = prob.sym("P", n)
    Q = prob.rect("Q", n, rho * n)
    R = prob.sym("R", rho * n)
    S = prob.sym("S", n)
    U = prob.sym("U", n)
    Z = AffExpr.zero
    Pe, Qe, Re, Se, Ue = (var_expr(v) for v in (P, Q, R, S, U))

    col_pq = bmat([[Pe, Qe], [Z(n, n), Z(n, rho * n)], [Qe.T, Re]])
    rows = np.block([[sys.A1, sys.A2, sys.A3],
                     [M0, -Mr, -Mhat]])
    phi = sy_expr(col_pq.rmul(rows)) + dsum_expr(
        [Se + r * Ue, -1.0 * Se, -1.0 * kron_const(F, Ue)])

    prob.require_neg(phi, "stability")
    prob.require_pos(bmat([[Pe, Qe], [Qe.T, Re + kron_const(F, Se)]]),
                     "lkf_positivity")
    prob.require_pos(Se, "S_pos")
    prob.require_pos(Ue, "U_pos")
    prob.meta.update({"kind": "simple", "gram": gp,
                      "vars": {"P": P, "Q": Q, "R": R, "S": S, "U": U}})
    return prob


def slack_stability_constraints(sys, tuning):
    """Stability analysis through the one-constraint slack-variable form.

    Uses the structured slack [W; eta1 W; eta2 W; eps_i W] mirroring the
    synthesis condition, so feasibility depends on the tuning factors.
    """
    _check_valid(sys)
    n, rho, r = sys.n, sys.rho, sys.r
    gp, M0, Mr, Mhat = _lifted_constants(sys)
    F = gp.f
    eta1, eta2 = tuning.eta1, tuning.eta2
    eps = tuning.eps_for(rho)

    prob = LMIProblem()
    P = prob.sym("P", n)
    Q = prob.rect("Q", n, rho * n)
    R = prob.sym("R", rho * n)
    S = prob.sym("S", n)
    U = prob.sym("U", n)
    W = prob.rect("W", n, n)
    Z = AffExpr.zero
    Pe, Qe, Re, Se, Ue, We = (var_expr(v) for v in (P, Q, R, S, U, W))

    w_col = bmat([[We], [eta1 * We], [eta2 * We]]
                 + [[eps[i] * We] for i in range(rho)])
    y_row = np.hstack([-np.eye(n), sys.A1, sys.A2, sys.A3])
    sy_slack = sy_expr(w_col.rmul(y_row))

    p_row = bmat([[Pe, Z(n, n), Qe]])
    col_qr = bmat([[Qe], [Z(n, rho * n)], [Re]])
    row_m = np.hstack([M0, -Mr, -Mhat])
    phi_hat = sy_expr(col_qr.rmul(row_m)) + dsum_expr(
        [Se + r * Ue, -1.0 * Se, -1.0 * kron_const(F, Ue)])
    theta = sy_slack + bmat([[Z(n, n), p_row], [p_row.T, phi_hat]])

    prob.require_neg(theta, "stability_slack")
    prob.require_pos(bmat([[Pe, Qe], [Qe.T, Re + kron_const(F, Se)]]),
                     "lkf_positivity")
    prob.require_pos(Se, "S_pos")
    prob.require_pos(Ue, "U_pos")
    prob.meta.update({"kind": "slack", "gram": gp,
                      "vars": {"P": P, "Q": Q, "R": R, "S": S, "U": U, "W": W}})
    return prob


# ---------------------------------------------------------------------------
# scalar-multiplier building blocks
# ---------------------------------------------------------------------------

def lemma6_wellposed(theta1_inv, theta2, theta3, f):
    """Well-posedness certificate for (I - Delta F)^{-1} over the Delta set.

    ``theta1_inv is None`` encodes the degenerate (1,1) weight of zero,
    which drops the third block row/column.  The returned problem is
    feasible iff some alpha > 0 certifies invertibility for every Delta
    in the constraint set.
    """
    theta2 = np.atleast_2d(np.asarray(theta2, dtype=float))
    theta3 = mk.symmetrize(np.atleast_2d(np.asarray(theta3, dtype=float)))
    f = np.atleast_2d(np.asarray(f, dtype=float))
    mm = theta3.shape[0]
    if f.shape[1] != mm or theta2.shape[1] != mm:
        raise DimensionError("lemma6_wellposed: inconsistent shapes")
    prob = LMIProblem()
    alpha = prob.scalar("alpha")
    Im = np.eye(mm)
    b11 = const_expr(Im)
    b12 = const_expr(-Im) + smul_expr(-f.T @ theta2, alpha)
    b22 = const_expr(Im) + smul_expr(-theta3, alpha)
    if theta1_inv is None:
        cond = bmat([[b11, b12], [b12.T, b22]])
    else:
        theta1_inv = mk.symmetrize(np.atleast_2d(np.asarray(theta1_inv,
                                                            dtype=float)))
        if mk.min_eig_sym(theta1_inv) <= 0:
            raise InputError("lemma6_wellposed: theta1_inv must be positive "
                             "definite (or None for the degenerate case)")
        theta1 = np.linalg.inv(theta1_inv)
        pp = theta1.shape[0]
        cond = bmat([[b11, b12, smul_expr(f.T, alpha)],
                     [b12.T, b22, AffExpr.zero(mm, pp)],
                     [smul_expr(f, alpha), AffExpr.zero(pp, mm),
                      smul_expr(theta1, alpha)]])
    prob.require_pos(cond, "wellposed")
    prob.require_pos(var_expr(alpha), "alpha_pos")
    prob.meta.update({"kind": "lemma6_wellposed", "alpha_var": alpha})
    return prob


def lemma6_bound(prob, phi_expr, g, h, f, theta1, theta2, theta3,
                 label="robustified"):
    """Replace "phi < 0" by its robust counterpart with a new multiplier.

    ``phi_expr`` is the affine block to be robustified, ``g`` its
    (possibly affine) uncertainty output map, ``h``/``f`` the constant
    input maps and ``theta*`` the constraint weights of the Delta set.
    ``theta1 is None`` selects the two-block degenerate form.  Appends a
    scalar kappa > 0 and the robust constraint to ``prob``; returns the
    kappa variable.
    """
    g = g if isinstance(g, AffExpr) else const_expr(g)
    h = np.atleast_2d(np.asarray(h, dtype=float))
    f = np.atleast_2d(np.asarray(f, dtype=float))
    theta2 = np.atleast_2d(np.asarray(theta2, dtype=float))
    theta3 = mk.symmetrize(np.atleast_2d(np.asarray(theta3, dtype=float)))
    nn = phi_expr.shape[0]
    mm = theta3.shape[0]
    if g.shape != (nn, mm) or h.shape[1] != nn or f.shape[1] != mm:
        raise DimensionError("lemma6_bound: inconsistent shapes")
    kappa = prob.scalar(f"kappa_{label}")
    mid = f.T @ theta2
    mid = mid + mid.T + theta3
    b12 = g + smul_expr(h.T @ theta2, kappa)
    b22 = smul_expr(mid, kappa)
    if theta1 is None:
        cond = bmat([[phi_expr, b12], [b12.T, b22]])
    else:
        theta1 = mk.symmetrize(np.atleast_2d(np.asarray(theta1, dtype=float)))
        pp = theta1.shape[0]
        cond = bmat([[phi_expr, b12, smul_expr(h.T, kappa)],
                     [b12.T, b22, smul_expr(f.T, kappa)],
                     [smul_expr(h, kappa), smul_expr(f, kappa),
                      smul_expr(-theta1, kappa)]])
    prob.require_neg(cond, label)
    prob.require_pos(var_expr(kappa), f"kappa_{label}_pos")
    return kappa


# ---------------------------------------------------------------------------
# robust conditions
# ---------------------------------------------------------------------------

def _aggregate(unc, indices):
    """Stack the selected active channels: (channels, F, Xi, Lam, Gam)."""
    chans = [(i, unc.channels[i - 1]) for i in indices
             if unc.channels[i - 1].active]
    Fb = mk.dsum([ch.F for _, ch in chans])
    Xib = mk.dsum([ch.Xi for _, ch in chans])
    Lamb = mk.dsum([ch.Lam for _, ch in chans])
    Gamb = mk.dsum([ch.Gam for _, ch in chans])
    return chans, Fb, Xib, Lamb, Gamb


def _wellposed_condition(prob, Fb, Xib, Lamb, Gamb, label="uncertainty_wellposed"):
    """Aggregated invertibility certificate with its own multiplier."""
    ma = Gamb.shape[0]
    if ma == 0:
        return None
    kap1 = prob.scalar("kappa1")
    Im = np.eye(ma)
    b12 = const_expr(-Im) + smul_expr(-Fb.T @ Lamb, kap1)
    b22 = const_expr(Im) + smul_expr(-Gamb, kap1)
    pp = Xib.shape[0]
    cond = bmat([[const_expr(Im), b12, smul_expr(Fb.T, kap1)],
                 [b12.T, b22, AffExpr.zero(ma, pp)],
                 [smul_expr(Fb, kap1), AffExpr.zero(pp, ma),
                  smul_expr(Xib, kap1)]])
    prob.require_pos(cond, label)
    prob.require_pos(var_expr(kap1), "kappa1_pos")
    return kap1


def thm2_constraints(sys, supply, unc, tuning):
    """Robust dissipative synthesis under the ten-channel uncertainty.

    All ten channels enter (the gain channels through H2 V and H7 V).
    The second robust condition is posed in the congruence-scaled
    multiplier form (variable nu = 1/kappa2), which is affine jointly in
    all decision variables; kappa2 is reported as 1/nu.
    """
    diag = unc.validate(sys)
    if diag:
        raise InputError("invalid uncertainty: " + "; ".join(diag))
    prob = LMIProblem()
    theta = _synthesis_core(prob, sys, supply, tuning)
    n, m, p, q, rho = sys.n, sys.m, sys.p, sys.q, sys.rho
    schur = prob.meta["schur"]
    ms = m if schur else 0
    D = 3 * n + rho * n + q + ms

    chans, Fb, Xib, Lamb, Gamb = _aggregate(unc, range(1, 11))
    if not chans:
        prob.require_neg(theta, "synthesis")
        prob.meta["kind"] = "robust_synthesis"
        prob.meta["nu_var"] = None
        return prob

    kap1 = _wellposed_condition(prob, Fb, Xib, Lamb, Gamb)

    tuning_eps = tuning.eps_for(rho)
    In = np.eye(n)
    J2 = np.zeros((m, q)) if supply is None else supply.J2
    itil_col = np.vstack([In, tuning.eta1 * In, tuning.eta2 * In]
                         + [tuning_eps[i] * In for i in range(rho)]
                         + [np.zeros((q + ms, n))])
    out_col = np.vstack([np.zeros((3 * n + rho * n, m)), J2.T]
                        + ([np.eye(m)] if schur else []))
    left = np.hstack([itil_col, out_col])
    g_state = np.hstack([ch.G for i, ch in chans if i <= 5]) \
        if any(i <= 5 for i, _ in chans) else np.zeros((n, 0))
    g_out = np.hstack([ch.G for i, ch in chans if i >= 6]) \
        if any(i >= 6 for i, _ in chans) else np.zeros((m, 0))
    gbold = left @ mk.dsum(g_state, g_out)

    # uncertainty input map in the Theta coordinates (affine in X, V)
    vars_ = prob.meta["vars"]
    Xe, Ve = var_expr(vars_["X"]), var_expr(vars_["V"])
    IX = ikron_var(rho, Xe)
    col0 = {1: n, 2: n, 3: 2 * n, 4: 3 * n, 5: 3 * n + rho * n,
            6: n, 7: n, 8: 2 * n, 9: 3 * n, 10: 3 * n + rho * n}
    h_rows = []
    for i, ch in chans:
        if i in (1, 3, 6, 8):
            e = Xe.lmul(ch.H)
        elif i in (2, 7):
            e = Ve.lmul(ch.H)
        elif i in (4, 9):
            e = IX.lmul(ch.H)
        else:
            e = const_expr(ch.H)
        c0 = col0[i]
        h_rows.append(bmat([[AffExpr.zero(ch.b, c0), e,
                             AffExpr.zero(ch.b, D - c0 - e.shape[1])]]))
    hbold = bmat([[row] for row in h_rows])

    nu = prob.scalar("nu")
    mid = Fb.T @ Lamb
    mid = mid + mid.T + Gamb
    b12 = smul_expr(gbold, nu) + hbold.T.rmul(Lamb)
    cond2 = bmat([[theta, b12, hbold.T],
                  [b12.T, smul_expr(mid, nu), smul_expr(Fb.T, nu)],
                  [hbold, smul_expr(Fb, nu), smul_expr(-Xib, nu)]])
    prob.require_neg(cond2, "robust_synthesis")
    prob.require_pos(var_expr(nu), "nu_pos")
    prob.meta.update({"kind": "robust_synthesis", "nu_var": nu,
                      "kappa1_var": kap1})
    return prob


# channels excluded from open-loop robust analysis (gain channels B1, D1)
ANALYSIS_CHANNELS = (1, 3, 4, 5, 6, 8, 9, 10)


def robust_analysis_constraints(sys, supply, unc):
    """Robust open-loop analysis: Lemma-6 wrap of the dissipation block.

    The B1/D1 uncertainty channels (2 and 7) do not enter since u = 0.
    """
    diag = unc.validate(sys)
    if diag:
        raise InputError("invalid uncertainty: " + "; ".join(diag))
    prob = LMIProblem()
    psi = _analysis_core(prob, sys, supply)
    n, m, q, rho = sys.n, sys.m, sys.q, sys.rho
    schur = prob.meta["schur"]
    ms = m if schur else 0

    chans, Fb, Xib, Lamb, Gamb = _aggregate(unc, ANALYSIS_CHANNELS)
    if not chans:
        prob.require_neg(psi, "dissipation")
        prob.meta["kind"] = "robust_analysis"
        return prob

    kap1 = _wellposed_condition(prob, Fb, Xib, Lamb, Gamb)

    vars_ = prob.meta["vars"]
    Pe, Qe = var_expr(vars_["P"]), var_expr(vars_["Q"])
    Z = AffExpr.zero
    J2 = np.zeros((m, q)) if supply is None else supply.J2
    rows = [[Pe, Z(n, m)],
            [Z(n, n), Z(n, m)],
            [Qe.T, Z(rho * n, m)],
            [Z(q, n), const_expr(J2.T)]]
    if schur:
        rows.append([Z(m, n), const_expr(np.eye(m))])
    left = bmat(rows)
    g_state = np.hstack([ch.G for i, ch in chans if i <= 5]) \
        if any(i <= 5 for i, _ in chans) else np.zeros((n, 0))
    g_out = np.hstack([ch.G for i, ch in chans if i >= 6]) \
        if any(i >= 6 for i, _ in chans) else np.zeros((m, 0))
    gexpr = left.rmul(mk.dsum(g_state, g_out))

    # input map in the Psi coordinates [x, x(t-r), distributed, w, (z)]
    col0 = {1: 0, 3: n, 4: 2 * n, 5: 2 * n + rho * n,
            6: 0, 8: n, 9: 2 * n, 10: 2 * n + rho * n}
    Dpsi = psi.shape[0]
    h_blocks = []
    for i, ch in chans:
        row = np.zeros((ch.b, Dpsi))
        row[:, col0[i]:col0[i] + ch.H.shape[1]] = ch.H
        h_blocks.append(row)
    hb = np.vstack(h_blocks)

    kap2 = lemma6_bound(prob, psi, gexpr, hb, Fb, Xib, Lamb, Gamb,
                        label="robust_dissipation")
    prob.meta.update({"kind": "robust_analysis", "kappa1_var": kap1,
                      "kappa2_var": kap2})
    return prob
