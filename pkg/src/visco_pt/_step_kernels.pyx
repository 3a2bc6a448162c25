# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled material-point stepping kernel.

Arithmetic twin of ``_kernels_py``: the same scaled gradient descent with
Armijo backtracking, in C doubles. See that module for the contract.
"""

from libc.math cimport INFINITY, fabs, isfinite, pow

BACKEND = "compiled"

cdef double _MIN_STEP = 1e-18


cdef inline double _psi(double d_v, double p_psi, double x) nogil:
    if p_psi == 2.0:
        return 0.5 * d_v * x * x
    return 0.5 * d_v * pow(fabs(x), p_psi)


cdef inline double _dpsi(double d_v, double p_psi, double x) nogil:
    cdef double m
    if p_psi == 2.0:
        return d_v * x
    m = 0.5 * d_v * p_psi * pow(fabs(x), p_psi - 1.0)
    return m if x >= 0.0 else -m


cdef inline bint _value(double c_e, double a4, double c_v, double d_v,
                        double p_psi, double k_radius, double load,
                        double anchor, double r, double F, double Fv,
                        double* out) nogil:
    cdef double svi, s, s2, w, wv, rate, dis
    if Fv <= 0.0:
        return False
    svi = Fv - 1.0
    if svi > k_radius or svi < -k_radius:
        return False
    s = F / Fv - 1.0
    s2 = s * s
    w = 0.5 * c_e * s2 + 0.25 * a4 * s2 * s2
    wv = 0.5 * c_v * svi * svi
    rate = (Fv - anchor) / (r * anchor)
    dis = r * _psi(d_v, p_psi, rate)
    out[0] = w + wv + dis - load * F
    return True


cdef inline bint _value_grad(double c_e, double a4, double c_v, double d_v,
                             double p_psi, double k_radius, double load,
                             double anchor, double r, double F, double Fv,
                             double* f, double* gF, double* gFv) nogil:
    cdef double s, s2, dw, svi, rate
    if not _value(c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r, F, Fv, f):
        return False
    s = F / Fv - 1.0
    s2 = s * s
    dw = c_e * s + a4 * s * s2
    svi = Fv - 1.0
    rate = (Fv - anchor) / (r * anchor)
    gF[0] = dw / Fv - load
    gFv[0] = -dw * F / (Fv * Fv) + c_v * svi + _dpsi(d_v, p_psi, rate) / anchor
    return True


def mp_minimize(double c_e, double a4, double c_v, double d_v, double p_psi,
                double k_radius, double load, double F, double Fv,
                double anchor, double r, double scale_F, double scale_Fv,
                double grad_tol, long max_iter, double armijo_c,
                double backtrack):
    """Minimize the material-point incremental objective from (F, Fv).

    Returns ``(F, Fv, value, grad_inf, iterations, status)``.
    """
    cdef double f = 0.0, gF = 0.0, gFv = 0.0
    cdef double aF, aFv, grad_inf, dF, dFv, slope, alpha, tF, tFv, ft
    cdef long iterations = 0
    cdef bint ok

    ok = _value_grad(c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r,
                     F, Fv, &f, &gF, &gFv)
    if not ok:
        return F, Fv, 0.0, 0.0, 0, 3
    if not isfinite(f):
        return F, Fv, f, 0.0, 0, 4

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
            ok = _value(c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r,
                        tF, tFv, &ft)
            if not ok or ft != ft:
                ft = INFINITY
            if ft <= f + armijo_c * alpha * slope:
                break
            alpha *= backtrack
            if alpha < _MIN_STEP:
                return F, Fv, f, grad_inf, iterations, 2
        F = tF
        Fv = tFv
        ok = _value_grad(c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r,
                         F, Fv, &f, &gF, &gFv)
        if not ok:
            return F, Fv, 0.0, 0.0, iterations, 3
        if not isfinite(f):
            return F, Fv, f, 0.0, iterations, 4
        iterations += 1


def mp_objective(double c_e, double a4, double c_v, double d_v, double p_psi,
                 double k_radius, double load, double anchor, double r,
                 double F, double Fv):
    """Objective value at (F, Fv); returns (feasible, value)."""
    cdef double out = 0.0
    cdef bint ok = _value(c_e, a4, c_v, d_v, p_psi, k_radius, load, anchor, r,
                          F, Fv, &out)
    return bool(ok), out
