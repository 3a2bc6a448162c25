"""Incremental minimization time stepping.

One step from state (y, y_vi) at time t_{i-1} to time t_i solves

    min  E(t_i, y, y_vi) + tau * Psi(y_vi_old, (y_vi - y_vi_old)/tau)

over the packed dofs, warm-started from the previous state. Minimality
against the stay-put competitor (the previous state itself, which carges no
dissipation) is asserted on every step: E(t_i, new) + tau*Psi <= E(t_i, old)
up to 1e-8, and violations reject the step.

Routing: material-point scenarios go through the stepping kernel (compiled
or pure-Python mirror); shear-column scenarios with quadratic densities are
a single SPD solve with a factorization cached across steps; anything else
runs damped Newton with Armijo backtracking on the element-local analytic
Hessian.

The same solver evaluated at a substep r in (0, tau] gives phi_tau(r), the
value function of the De Giorgi interpolation; its minimizer is the De
Giorgi interpolant and the integral of the rate dissipation over r in
[0, tau] (Chebyshev-clustered trapezoid) supplies the improved dissipation
term of the sharp energy identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import kernels
from .domain import (
    Loading,
    State,
    TimeGrid,
    dissipation_increment,
    dissipation_rates,
    dissipation_rate_value,
    elastic_strain,
    incremental_hessian_diag,
    pack_dofs,
    total_energy,
    trapezoid_weights,
    unpack_dofs,
    viscous_strain,
)
from .errors import (
    InfeasibleState,
    NonFiniteObjective,
    StepRejected,
    ValidationError,
)
from .minimize import (
    CONVERGED,
    LINE_SEARCH_STALLED,
    MAX_ITER_EXCEEDED,
    CholeskyOperator,
    MinimizeSettings,
    minimize_newton,
)
from .rheology import MATERIAL_POINT, SHEAR_COLUMN, MaterialModel

STAY_PUT_TOL = 1e-8
DIRECT = "direct"

_KERNEL_STATUS = {0: CONVERGED, 1: MAX_ITER_EXCEEDED, 2: LINE_SEARCH_STALLED}


@dataclass(frozen=True)
class StepReport:
    index: int
    t: float
    iterations: int
    status: str
    stay_put_margin: float
    diss_increment: float


@dataclass(frozen=True)
class PhiTau:
    """Value and minimizer of the incremental functional at substep r."""

    value: float
    state: State
    rate_dissipation: float
    iterations: int
    status: str


@dataclass
class Trajectory:
    model: MaterialModel
    loading: Loading
    grid: TimeGrid
    states: List[State]
    diss_increments: np.ndarray
    step_reports: List[StepReport]
    settings: MinimizeSettings

    @property
    def delta(self) -> np.ndarray:
        """Cumulative dissipation: delta[n] = sum of the first n increments."""
        return np.concatenate([[0.0], np.cumsum(self.diss_increments)])

    def energy(self, i: int) -> float:
        return total_energy(
            self.model, self.states[i], self.loading, float(self.grid.times[i])
        )[0]


# -- incremental objective on packed dofs --------------------------------------


def incremental_value_and_grad(
    model: MaterialModel,
    old: State,
    loading: Loading,
    t: float,
    r: float,
):
    """(value, grad) and value-only callables of the incremental objective."""
    template = old

    def value_and_grad(x: np.ndarray):
        state = unpack_dofs(template, x)
        value, grad = total_energy(model, state, loading, t)
        rate = dissipation_rates(model, state, old, r)
        if model.mode == MATERIAL_POINT:
            value += r * float(model.psi(rate))
            grad[1] += float(model.dpsi(rate)) / old.F_vi
        else:
            value += r * state.mesh.h * float(np.sum(model.psi(rate)))
            n = state.mesh.n_elements
            dpsi = np.asarray(model.dpsi(rate))
            add = np.zeros(n + 1)
            add[:-1] -= dpsi
            add[1:] += dpsi
            grad[n:] += add[1:]
        return value, grad

    def value_only(x: np.ndarray):
        state = unpack_dofs(template, x)
        value, _ = total_energy(model, state, loading, t)
        return value + dissipation_increment(model, state, old, r)

    return value_and_grad, value_only


# -- shear-column Hessians -------------------------------------------------------


def _difference_matrix(n: int) -> np.ndarray:
    """Nodal-to-element difference map with the clamped bottom node removed."""
    D = np.zeros((n, n))
    for e in range(n):
        D[e, e] = 1.0
        if e >= 1:
            D[e, e - 1] = -1.0
    return D


def _ddpsi(model: MaterialModel, rate: np.ndarray) -> np.ndarray:
    """Second derivative of the built-in dissipation density."""
    rate = np.asarray(rate, dtype=float)
    if model.p_psi == 2.0:
        return model.d_v * np.ones_like(rate)
    return (
        0.5
        * model.d_v
        * model.p_psi
        * (model.p_psi - 1.0)
        * np.abs(rate) ** (model.p_psi - 2.0)
    )


def shear_incremental_hessian(
    model: MaterialModel, old: State, r: float
):
    """Dense-Hessian callable of the shear incremental objective.

    Element-local curvatures in the slopes assemble to the packed-dof blocks
    [[A, -A], [-A, A + B + C]] with A the elastic, B the viscous-energy and
    C the dissipation curvature; the sum is positive definite because the
    elastic curvature is bounded below by c_e and the slope map is
    invertible.
    """
    mesh = old.mesh
    n = mesh.n_elements
    h = mesh.h
    D = _difference_matrix(n)
    s_old = viscous_strain(old)

    def hessian(x: np.ndarray) -> np.ndarray:
        state = unpack_dofs(old, x)
        a = model.c_e + 3.0 * model.a4 * elastic_strain(state) ** 2
        rate = (viscous_strain(state) - s_old) / r
        bc = model.c_v + _ddpsi(model, rate) / r
        A = D.T @ (a[:, None] * D) / h
        H = np.zeros((2 * n, 2 * n))
        H[:n, :n] = A
        H[:n, n:] = -A
        H[n:, :n] = -A
        H[n:, n:] = A + D.T @ (bc[:, None] * D) / h
        return H

    return hessian


# -- shear-column quadratic fast path ------------------------------------------


class ShearQuadraticOperator:
    """Cached SPD solve for shear scenarios with quadratic densities.

    The Hessian depends only on (coefficients, mesh, r), so one Cholesky
    factorization serves the whole evolution; the right-hand side carries
    the load values and the previous viscous slopes.
    """

    def __init__(self, c_el: float, c_vi: float, d: float, mesh, r: float):
        n = mesh.n_elements
        h = mesh.h
        D = _difference_matrix(n)
        K = D.T @ D / h
        H = np.zeros((2 * n, 2 * n))
        H[:n, :n] = c_el * K
        H[:n, n:] = -c_el * K
        H[n:, :n] = -c_el * K
        H[n:, n:] = (c_el + c_vi + d / r) * K
        self.mesh = mesh
        self.r = r
        self.d = d
        self._D = D
        self._w = trapezoid_weights(mesh)
        self._op = CholeskyOperator(H)

    def rhs(self, old_slopes: np.ndarray, f_val: float, g_val: float) -> np.ndarray:
        n = self.mesh.n_elements
        b = np.zeros(2 * n)
        b[:n] = f_val * self._w[1:]
        b[n - 1] += g_val
        b[n:] = (self.d / self.r) * (self._D.T @ old_slopes)
        return b

    def solve_slopes(self, old_slopes: np.ndarray, f_val: float, g_val: float):
        """Packed minimizer given the previous viscous slopes directly."""
        return self._op.solve(self.rhs(old_slopes, f_val, g_val))

    def solve(self, old: State, f_val: float, g_val: float) -> np.ndarray:
        return self.solve_slopes(viscous_strain(old), f_val, g_val)


def _is_shear_quadratic(model: MaterialModel) -> bool:
    return (
        model.mode == SHEAR_COLUMN
        and model.a4 == 0.0
        and model.p_psi == 2.0
        and not model.has_custom_densities
    )


# -- single incremental solve ---------------------------------------------------


def _solve_incremental(
    model: MaterialModel,
    old: State,
    loading: Loading,
    t: float,
    r: float,
    settings: MinimizeSettings,
    operator: Optional[ShearQuadraticOperator] = None,
):
    """Minimize the incremental functional; returns (state, value, iterations,
    status)."""
    if not (r > 0.0 and np.isfinite(r)):
        raise ValidationError(f"substep length must be > 0, got {r!r}")

    if model.mode == MATERIAL_POINT:
        if model.has_custom_densities:
            raise ValidationError("time stepping requires the built-in density family")
        diag = incremental_hessian_diag(model, old, old, loading, t, r)
        load = loading.f(t) + loading.g(t)
        F, Fv, value, _, iterations, status = kernels.mp_minimize(
            model.c_e,
            model.a4,
            model.c_v,
            model.d_v,
            model.p_psi,
            model.k_radius,
            load,
            old.F,
            old.F_vi,
            old.F_vi,
            r,
            1.0 / diag[0],
            1.0 / diag[1],
            settings.grad_tol,
            settings.max_iter,
            settings.armijo_c,
            settings.backtrack_factor,
        )
        if status == 3:
            raise InfeasibleState("infeasible warm start for the incremental step")
        if status == 4:
            raise NonFiniteObjective("incremental objective is not finite")
        return State.material_point(F, Fv), value, iterations, _KERNEL_STATUS[status]

    if _is_shear_quadratic(model):
        if operator is None:
            operator = ShearQuadraticOperator(
                model.c_e, model.c_v, model.d_v, old.mesh, r
            )
        x = operator.solve(old, loading.f(t), loading.g(t))
        state = unpack_dofs(old, x)
        value = total_energy(model, state, loading, t)[0] + dissipation_increment(
            model, state, old, r
        )
        return state, value, 1, DIRECT

    if model.has_custom_densities:
        raise ValidationError("time stepping requires the built-in density family")
    value_and_grad, value_only = incremental_value_and_grad(model, old, loading, t, r)
    result = minimize_newton(
        value_and_grad,
        shear_incremental_hessian(model, old, r),
        pack_dofs(old),
        settings,
        value_only=value_only,
    )
    return unpack_dofs(old, result.x), result.value, result.iterations, result.status


def incremental_step(
    model: MaterialModel,
    old: State,
    loading: Loading,
    t: float,
    tau: float,
    settings: MinimizeSettings = MinimizeSettings(),
    operator: Optional[ShearQuadraticOperator] = None,
    index: int = 0,
):
    """One incremental minimization step; returns ``(state, StepReport)``.

    Raises :class:`StepRejected` if the minimality inequality against the
    stay-put competitor fails beyond 1e-8.
    """
    state, value, iterations, status = _solve_incremental(
        model, old, loading, t, tau, settings, operator
    )
    diss = dissipation_increment(model, state, old, tau)
    energy_old = total_energy(model, old, loading, t)[0]
    margin = energy_old - value
    if margin < -STAY_PUT_TOL:
        raise StepRejected(index, margin)
    report = StepReport(
        index=index,
        t=t,
        iterations=iterations,
        status=status,
        stay_put_margin=margin,
        diss_increment=diss,
    )
    return state, report


def run_evolution(
    model: MaterialModel,
    state0: State,
    loading: Loading,
    grid: TimeGrid,
    settings: MinimizeSettings = MinimizeSettings(),
) -> Trajectory:
    """March the incremental scheme across the whole grid."""
    operator = None
    if _is_shear_quadratic(model):
        operator = ShearQuadraticOperator(
            model.c_e, model.c_v, model.d_v, state0.mesh, grid.tau
        )
    states = [state0]
    diss = np.zeros(grid.n_steps)
    reports: List[StepReport] = []
    times = grid.times
    for i in range(1, grid.n_steps + 1):
        state, report = incremental_step(
            model,
            states[-1],
            loading,
            float(times[i]),
            grid.tau,
            settings,
            operator=operator,
            index=i,
        )
        states.append(state)
        diss[i - 1] = report.diss_increment
        reports.append(report)
    return Trajectory(
        model=model,
        loading=loading,
        grid=grid,
        states=states,
        diss_increments=diss,
        step_reports=reports,
        settings=settings,
    )


# -- elastic equilibration ------------------------------------------------------


def equilibrate_elastic(
    model: MaterialModel,
    state: State,
    loading: Loading,
    t: float,
    settings: MinimizeSettings = MinimizeSettings(),
) -> State:
    """Minimize the energy over the elastic variable at frozen viscous state.

    Used to prepare initial data (and as the r -> 0 limit state of phi_tau).
    """
    if model.mode == MATERIAL_POINT:
        load = loading.f(t) + loading.g(t)
        s = _invert_stress(model, load * state.F_vi)
        return State.material_point((1.0 + s) * state.F_vi, state.F_vi)

    mesh = state.mesh
    n = mesh.n_elements
    h = mesh.h
    beta_slopes = viscous_strain(state)
    f_val, g_val = loading.f(t), loading.g(t)
    D = _difference_matrix(n)
    if model.a4 == 0.0:
        K = model.c_e * (D.T @ D) / h
        b = model.c_e * (D.T @ beta_slopes)
        b += f_val * trapezoid_weights(mesh)[1:]
        b[-1] += g_val
        gamma = np.concatenate([[0.0], CholeskyOperator(K).solve(b)])
        return State(mode=SHEAR_COLUMN, gamma=gamma, beta=state.beta, mesh=mesh)

    def value_and_grad(xg: np.ndarray):
        trial = State(
            mode=SHEAR_COLUMN,
            gamma=np.concatenate([[0.0], xg]),
            beta=state.beta,
            mesh=mesh,
        )
        value, grad = total_energy(model, trial, loading, t)
        return value, grad[:n]

    def hessian(xg: np.ndarray) -> np.ndarray:
        s_el = (D @ xg) / h - beta_slopes
        a = model.c_e + 3.0 * model.a4 * s_el**2
        return D.T @ (a[:, None] * D) / h

    result = minimize_newton(value_and_grad, hessian, state.gamma[1:].copy(), settings)
    return State(
        mode=SHEAR_COLUMN,
        gamma=np.concatenate([[0.0], result.x]),
        beta=state.beta,
        mesh=mesh,
    )


def _invert_stress(model: MaterialModel, target: float) -> float:
    """Solve c_e s + a4 s^3 = target (monotone; Newton with bisection guard)."""
    if model.a4 == 0.0:
        return target / model.c_e
    lo, hi = -1.0, 1.0
    while model.c_e * lo + model.a4 * lo**3 > target:
        lo *= 2.0
    while model.c_e * hi + model.a4 * hi**3 < target:
        hi *= 2.0
    s = target / model.c_e
    s = min(max(s, lo), hi)
    for _ in range(200):
        residual = model.c_e * s + model.a4 * s**3 - target
        if abs(residual) <= 1e-14 * (1.0 + abs(target)):
            return s
        step = residual / (model.c_e + 3.0 * model.a4 * s * s)
        candidate = s - step
        if candidate <= lo or candidate >= hi:
            candidate = 0.5 * (lo + hi)
        if model.c_e * candidate + model.a4 * candidate**3 > target:
            hi = candidate
        else:
            lo = candidate
        s = candidate
    return s


# -- interpolants ---------------------------------------------------------------


def interpolant(traj: Trajectory, which: str, t: float) -> State:
    """Piecewise interpolants of the discrete trajectory.

    ``backward`` is right-continuous at the nodes from the left
    (value states[i] on (t_{i-1}, t_i]), ``forward`` takes states[i-1] on
    [t_{i-1}, t_i), and ``affine`` interpolates the dofs linearly.
    """
    grid = traj.grid
    if not (0.0 <= t <= grid.t_final + 1e-12):
        raise ValidationError(f"t={t!r} outside [0, {grid.t_final}]")
    tau = grid.tau
    if which == "backward":
        i = int(math.ceil(t / tau - 1e-12))
        return traj.states[min(max(i, 0), grid.n_steps)]
    if which == "forward":
        i = int(math.floor(t / tau + 1e-12))
        return traj.states[min(i, grid.n_steps)]
    if which == "affine":
        i = int(math.ceil(t / tau - 1e-12))
        i = min(max(i, 1), grid.n_steps)
        t0 = (i - 1) * tau
        theta = min(max((t - t0) / tau, 0.0), 1.0)
        x = (1.0 - theta) * pack_dofs(traj.states[i - 1]) + theta * pack_dofs(
            traj.states[i]
        )
        return unpack_dofs(traj.states[i - 1], x)
    raise ValidationError(f"unknown interpolant {which!r}")


# -- De Giorgi interpolation ----------------------------------------------------


def phi_tau(
    model: MaterialModel,
    old: State,
    loading: Loading,
    t: float,
    r: float,
    settings: MinimizeSettings = MinimizeSettings(),
    operator: Optional[ShearQuadraticOperator] = None,
) -> PhiTau:
    """Value, minimizer and rate dissipation of the substep functional."""
    state, value, iterations, status = _solve_incremental(
        model, old, loading, t, r, settings, operator
    )
    return PhiTau(
        value=value,
        state=state,
        rate_dissipation=dissipation_rate_value(model, state, old, r),
        iterations=iterations,
        status=status,
    )


def de_giorgi_interpolant(
    traj: Trajectory, i: int, r: float, settings: Optional[MinimizeSettings] = None
) -> State:
    """Minimizer of the substep functional between grid points i-1 and i."""
    if not (1 <= i <= traj.grid.n_steps):
        raise ValidationError(f"step index {i} outside 1..{traj.grid.n_steps}")
    return phi_tau(
        traj.model,
        traj.states[i - 1],
        traj.loading,
        float(traj.grid.times[i]),
        r,
        settings or traj.settings,
    ).state


def de_giorgi_nodes(tau: float, m: int) -> np.ndarray:
    """Chebyshev-like substep samples clustered at r -> 0, ending at tau."""
    j = np.arange(1, m + 1, dtype=float)
    return tau * np.sin(j * math.pi / (2.0 * m)) ** 2


def de_giorgi_integral(
    traj: Trajectory,
    i: int,
    m: int,
    settings: Optional[MinimizeSettings] = None,
):
    """Integral over r in [0, tau] of the substep rate dissipation.

    Composite trapezoid on the clustered nodes plus a left-edge rectangle on
    [0, r_1] (the integrand extends continuously to 0, and r_1 = O(tau/m^2)
    makes the edge error higher order than the trapezoid's O(m^-2)).
    Returns ``(integral, nodes, samples)``.
    """
    if m < 2:
        raise ValidationError(f"need at least 2 substep samples, got {m}")
    settings = settings or traj.settings
    operator = None
    model, loading = traj.model, traj.loading
    old = traj.states[i - 1]
    t = float(traj.grid.times[i])
    nodes = de_giorgi_nodes(traj.grid.tau, m)
    samples = np.zeros(m)
    for j, r in enumerate(nodes):
        if _is_shear_quadratic(model):
            operator = ShearQuadraticOperator(
                model.c_e, model.c_v, model.d_v, old.mesh, float(r)
            )
        samples[j] = phi_tau(
            model, old, loading, t, float(r), settings, operator
        ).rate_dissipation
    integral = float(nodes[0]) * float(samples[0])
    integral += float(
        np.sum(0.5 * (samples[1:] + samples[:-1]) * np.diff(nodes))
    )
    return integral, nodes, samples
