"""Pure-Python mirror of the compiled stepping kernel.

Implements the material-point incremental minimization (scaled gradient
descent with Armijo backtracking) with plain-float arithmetic in exactly the
same operation order as ``_step_kernels.pyx``, so both backends produce the
same iterates up to compiler rounding.

Status codes: 0 converged, 1 max_iter exceeded, 2 line search stalled,
3 infeasible start, 4 nonfinite objective.
"""

from __future__ import annotations

BACKEND = "python"

_INF = float("inf")
_MIN_STEP = 1e-18


def _psi(d_v, p_psi, x):
    if p_psi == 2.0:
        return 0.5 * d_v * x * x
    return 0.5 * d_v * abs(x) ** p_psi


def _dpsi(d_v, p_psi, x):
    if p_psi == 2.0:
        return d_v * x
    m = 0.5 * d_v * p_psi * abs(x) ** (p_psi - 1.0)
    return m if x >= 0.0 else -m


def _value(c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r, F, Fv):
    if Fv <= 0.0:
        return False, 0.0
    svi = Fv - 1.0
    if svi > k_radius or svi < -k_radius:
        return False, 0.0
    s = F / Fv - 1.0
    s2 = s * s
    w = 0.5 * c_e * s2 + 0.25 * a4 * s2 * s2
    wv = 0.5 * c_v * svi * svi
    rate = (Fv - anchor) / (r * anchor)
    dis = r * _psi(d_v, p_psi, rate)
    return True, w + wv + dis - load * F


def _value_grad(c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r, F, Fv):
    ok, f = _value(c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r, F, Fv)
    if not ok:
        return False, 0.0, 0.0, 0.0
    s = F / Fv - 1.0
    s2 = s * s
    dw = c_e * s + a4 * s * s2
    svi = Fv - 1.0
    rate = (Fv - anchor) / (r * anchor)
    gF = dw / Fv - load
    gFv = -dw * F / (Fv * Fv) + c_v * svi + _dpsi(d_v, p_psi, rate) / anchor
    return True, f, gF, gFv


def mp_minimize(
    c_e,
    a4,
    c_v,
    d_v,
    p_psi,
    k_radius,
    load,
    F,
    Fv,
    anchor,
    r,
    scale_F,
    scale_Fv,
    grad_tol,
    max_iter,
    armijo_c,
    backtrack,
):
    """Minimize the material-point incremental objective from (F, Fv).

    Returns ``(F, Fv, value, grad_inf, iterations, status)``.
    """
    ok, f, gF, gFv = _value_grad(
        c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r, F, Fv
    )
    if not ok:
        return F, Fv, 0.0, 0.0, 0, 3
    if f != f or f == _INF or f == -_INF:
        return F, Fv, f, 0.0, 0, 4

    iterations = 0
    while True:
        aF = gF if gF >= 0.0 else -gF
        aFv = gFv if gFv >= 0.0 else -gFv
        grad_inf = aF if aF >= aFv else aFv
        if grad_inf <= grad_tol:
            return F, Fv, f, grad_inf, iterations, 0
        if iterations >= max_iter:
            return F, Fv, f, grad_inf, iterations, 1

        dF = -scale_F * gF
        dFv = -scale_Fv * gFv
        slope = gF * dF + gFv * dFv
        alpha = 1.0
        while True:
            tF = F + alpha * dF
            tFv = Fv + alpha * dFv
            ok, ft = _value(
                c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r, tF, tFv
            )
            if not ok or ft != ft:
                ft = _INF
            if ft <= f + armijo_c * alpha * slope:
                break
            alpha *= backtrack
            if alpha < _MIN_STEP:
                return F, Fv, f, grad_inf, iterations, 2
        F = tF
        Fv = tFv
        ok, f, gF, gFv = _value_grad(
            c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r, F, Fv
        )
        if not ok:
            return F, Fv, 0.0, 0.0, iterations, 3
        if f != f or f == _INF or f == -_INF:
            return F, Fv, f, 0.0, iterations, 4
        iterations += 1


def mp_objective(c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r, F, Fv):
    """Objective value at (F, Fv); raises nothing, returns (feasible, value)."""
    return _value(c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r, F, Fv)
