"""Variational solvers: the frequency minimization at prescribed action, the
zero-frequency threshold minimization, and the prescribed-mass problem.

All three run the same machinery: Barzilai-Borwein gradient descent with an
Armijo backtracking safeguard, the gradient taken in the weighted discrete
inner product and projected along the current ray.  Exact amplitude
rescalings (fibering / constraint retraction) are applied to every accepted
iterate, so the objective is nonincreasing across accepted steps.
"""
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import quotients as qt
from ._kernels import apply_lap, functionals_kernel, thomas_solve
from .errors import ConvergenceError, DomainError, RegimeError
from .grid import (Field, Functionals, boundary_mass_fraction, functionals,
                   gaussian_field, gradients, resample, weighted_norm)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class Solution:
    """A computed prescribed-action solution (or a flagged non-result).

    admissible is False when the infimum came out nonnegative, i.e. the
    parameters sit in the nonexistence regime; the other fields then carry
    the best spreading estimate rather than a solution.
    """
    field: Field
    lambda_hat: float
    S: float
    mu: float
    alpha: float
    T: float
    Q: float
    A: float
    B: float
    el_residual: float
    iterations: int
    converged: bool
    admissible: bool
    params: qt.Params
    boundary_mass: float
    checks: dict = dc_field(default_factory=dict)


@dataclass
class ThresholdResult:
    """Zero-frequency minimizer and the threshold coupling it defines."""
    mu_hat_s: float
    bar_mu: float
    field: Field
    s_check: float
    el_residual: float
    S: float
    iterations: int
    converged: bool
    boundary_mass: float


@dataclass
class MassResult:
    """Prescribed-mass minimizer of the energy on the sphere Q = alpha."""
    alpha: float
    h_hat: float
    field: Field
    lagrange_lambda: float
    tau: float
    no_minimizer: bool
    converged: bool
    iterations: int
    el_residual: float
    boundary_mass: float


# ---------------------------------------------------------------------------
# descent engine
# ---------------------------------------------------------------------------

def _ray_project(grid, g, u):
    """Remove the amplitude direction from the gradient (w-orthogonal)."""
    w = grid.weights
    return g - (np.dot(w, g * u) / max(np.dot(w, u * u), 1e-300)) * u


def _scale_free_project(grid, g, u):
    """Remove both invariance directions of the scale-free quotients: the
    amplitude generator u and the dilation generator, taken as the exact
    tangent of the grid resampling flow (centered difference over sigma).
    The discrete quotient is flat to rounding along these, but its residual
    slope would otherwise drag iterates toward sub-grid scales and deadlock
    against the core-scale pin."""
    w = grid.weights

    def wdot(a, b):
        return float(np.dot(w, a * b))

    b1 = u / np.sqrt(max(wdot(u, u), 1e-300))
    g = g - wdot(g, b1) * b1
    eps = 1e-4
    fld = Field(grid, u)
    d = (resample(fld, 1.0 + eps).values - resample(fld, 1.0 - eps).values) / (2 * eps)
    d[-1] = 0.0
    d = d - wdot(d, b1) * b1
    nd = np.sqrt(max(wdot(d, d), 0.0))
    if nd > 0:
        b2 = d / nd
        g = g - wdot(g, b2) * b2
    return g


def _descend(u0, evaluate, post, grid, stop, max_iter, max_backtracks=60,
             precond=None, project=None, stall_window=60, stall_rtol=1e-13):
    """Minimize evaluate()[0] over field values.

    evaluate(u, need_grad) -> (J, g or None); post(u) -> u applies exact
    rescalings (never increases J); stop(J, gnorm, u) ends the loop;
    precond maps the projected gradient to the search direction (an SPD
    map, e.g. an inverse Helmholtz smoother, keeps it a descent direction);
    project strips invariance directions (default: the amplitude ray).

    Ends either by the stop criterion, by value stagnation (relative
    progress below stall_rtol over stall_window accepted steps: the scale
    degeneracy of the quotient objectives leaves an O(h)-size gradient
    component along which the value is flat to rounding), or by exhausting
    the line search.  Returns (values, J, gnorm, iterations, converged).
    """
    w = grid.weights
    if project is None:
        project = _ray_project

    def wdot(a, b):
        return float(np.dot(w, a * b))

    u = post(np.array(u0, dtype=float))
    J, g = evaluate(u, True)
    u_prev = d_prev = None
    step = None
    it = 0
    J_marker = J
    since_marker = 0
    for it in range(max_iter + 1):
        gt = project(grid, g, u)
        gnorm = np.sqrt(max(wdot(gt, gt), 0.0))
        if stop(J, gnorm, u):
            return u, J, gnorm, it, True
        since_marker += 1
        if since_marker >= stall_window:
            if J_marker - J <= stall_rtol * max(abs(J), 1e-300):
                return u, J, gnorm, it, True
            J_marker, since_marker = J, 0
        if it == max_iter:
            break
        d = precond(gt) if precond is not None else gt
        gd = wdot(gt, d)
        if gd <= 0:  # smoother lost positivity to rounding: fall back
            d, gd = gt, gnorm * gnorm
        # BB step in the search-direction geometry
        if u_prev is not None:
            s = u - u_prev
            y = d - d_prev
            sy = wdot(s, y)
            if sy > 0:
                step = wdot(s, s) / sy if it % 2 else sy / wdot(y, y)
            # else keep previous step
        if step is None or not np.isfinite(step) or step <= 0:
            step = 0.01 * np.sqrt(wdot(u, u)) / max(np.sqrt(gd), 1e-300)
        step = min(step, 1e12)
        accepted = False
        for _ in range(max_backtracks):
            trial = post(u - step * d)
            Jt, _ = evaluate(trial, False)
            if Jt <= J - 1e-4 * step * gd:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # line search exhausted: rounding floor reached
            return u, J, gnorm, it, True
        u_prev, d_prev = u, d
        u = trial
        J, g = evaluate(u, True)
    return u, J, gnorm, it, False


def _h1_preconditioner(grid):
    """Inverse Helmholtz smoother v -> (I - L)^{-1} v, SPD in the weighted
    inner product; one tridiagonal solve per application."""
    key = "h1_precond"
    cache = grid._cache
    if key not in cache:
        sub, diag, sup = grid.lap_bands
        psub, pdiag, psup = -sub.copy(), 1.0 - diag, -sup.copy()
        psub[-1] = 0.0
        pdiag[-1] = 1.0
        psup[-1] = 0.0
        cache[key] = (psub, pdiag, psup)
    psub, pdiag, psup = cache[key]

    def precond(v):
        rhs = v.copy()
        rhs[-1] = 0.0
        return thomas_solve(psub, pdiag, psup, rhs)

    return precond


def _half_mass_radius(grid, u, p):
    """Radius enclosing half of the |u|^p integral; a tail-insensitive
    measure of the profile's core scale."""
    dens = grid.weights * np.abs(u) ** p
    cum = np.cumsum(dens)
    if cum[-1] <= 0:
        return grid.R / 2
    k = int(np.searchsorted(cum, 0.5 * cum[-1]))
    return max(grid.r[min(k, grid.n)], grid.h)


def _bordered_newton(grid, u, theta, p, q, residual_fn, border_fn, pot_fn,
                     dF_dtheta_fn, max_newton=40, tol=1e-12):
    """Damped Newton for the discrete Euler-Lagrange system with one scalar
    unknown theta and one scalar normalization:

        F(u, theta) = 0   (one equation per interior node),
        G(u, theta) = 0   (the normalization border row).

    The Jacobian is tridiagonal plus a border; block elimination needs two
    banded solves per iteration.  residual_fn(u, theta) -> (F, G);
    pot_fn(u, theta) -> diagonal of dF/du beyond -L; border_fn(u, theta) ->
    (dG/du, dG/dtheta); dF_dtheta_fn(u) -> the border column.
    """
    from ._kernels import thomas_np
    sub, diag, sup = grid.lap_bands
    w = grid.weights

    def merit(uu, th):
        F, G = residual_fn(uu, th)
        return float(np.sqrt(np.dot(w, F * F) + G * G)), F, G

    res, F, G = merit(u, theta)
    for _ in range(max_newton):
        if res <= tol * max(1.0, float(np.sqrt(np.dot(w, u * u)))):
            break
        dpot = pot_fn(u, theta)
        a_sub = -sub[:-1].copy()
        a_diag = (-diag + dpot)[:-1]
        a_sup = -sup[:-1].copy()
        b = dF_dtheta_fn(u)[:-1]
        dGdu, dGdth = border_fn(u, theta)
        x1 = thomas_np(a_sub, a_diag, a_sup, F[:-1])
        x2 = thomas_np(a_sub, a_diag, a_sup, b)
        cT = dGdu[:-1]
        schur = dGdth - float(np.dot(cT, x2))
        if schur == 0:
            break
        dth = -(G - float(np.dot(cT, x1))) / schur
        du = -(x1 + x2 * dth)
        step = 1.0
        improved = False
        for _ in range(40):
            u_try = u.copy()
            u_try[:-1] += step * du
            th_try = theta + step * dth
            res_try, F_try, G_try = merit(u_try, th_try)
            if res_try < res * (1.0 - 1e-4 * step) or res_try < tol:
                u, theta, res, F, G = u_try, th_try, res_try, F_try, G_try
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return u, theta, res


def _newton_zero_frequency(grid, u, m, S, p, q):
    """Polish (field, threshold coupling) on the lam = 0 equation with the
    action pinned to S."""
    sub, diag, sup = grid.lap_bands
    w = grid.weights

    def residual(uu, mm):
        au = np.abs(uu)
        F = (-apply_lap(uu, sub, diag, sup) - mm * au ** (p - 2.0) * uu
             + au ** (q - 2.0) * uu)
        F[-1] = 0.0
        f = _raw_functionals(grid, uu, p, q)
        G = 0.5 * f.T - mm / p * f.A + f.B / q - S
        return F, G

    def pot(uu, mm):
        au = np.abs(uu)
        return -mm * (p - 1.0) * au ** (p - 2.0) + (q - 1.0) * au ** (q - 2.0)

    def border(uu, mm):
        F, _ = residual(uu, mm)
        f = _raw_functionals(grid, uu, p, q)
        return w * F, -f.A / p

    def dF_dm(uu):
        return -np.abs(uu) ** (p - 2.0) * uu

    return _bordered_newton(grid, u, m, p, q, residual, border, pot, dF_dm)


def _newton_fixed_action(grid, u, lam, mu, S, p, q):
    """Polish (field, frequency) on the stationary equation with the action
    pinned to S."""
    sub, diag, sup = grid.lap_bands
    w = grid.weights

    def residual(uu, ll):
        au = np.abs(uu)
        F = (-apply_lap(uu, sub, diag, sup) - ll * uu
             - mu * au ** (p - 2.0) * uu + au ** (q - 2.0) * uu)
        F[-1] = 0.0
        f = _raw_functionals(grid, uu, p, q)
        G = (0.5 * f.T - ll * 0.5 * f.Q - mu / p * f.A + f.B / q) - S
        return F, G

    def pot(uu, ll):
        au = np.abs(uu)
        return (-ll - mu * (p - 1.0) * au ** (p - 2.0)
                + (q - 1.0) * au ** (q - 2.0))

    def border(uu, ll):
        F, _ = residual(uu, ll)
        f = _raw_functionals(grid, uu, p, q)
        return w * F, -0.5 * f.Q

    def dF_dlam(uu):
        return -uu

    return _bordered_newton(grid, u, lam, p, q, residual, border, pot,
                            dF_dlam)


def _newton_fixed_mass(grid, u, lam, mu, alpha, p, q):
    """Polish (field, frequency) on the stationary equation with the mass
    pinned to alpha."""
    sub, diag, sup = grid.lap_bands
    w = grid.weights

    def residual(uu, ll):
        au = np.abs(uu)
        F = (-apply_lap(uu, sub, diag, sup) - ll * uu
             - mu * au ** (p - 2.0) * uu + au ** (q - 2.0) * uu)
        F[-1] = 0.0
        f = _raw_functionals(grid, uu, p, q)
        return F, f.Q - alpha

    def pot(uu, ll):
        au = np.abs(uu)
        return (-ll - mu * (p - 1.0) * au ** (p - 2.0)
                + (q - 1.0) * au ** (q - 2.0))

    def border(uu, ll):
        return 2.0 * w * uu, 0.0

    def dF_dlam(uu):
        return -uu

    return _bordered_newton(grid, u, lam, p, q, residual, border, pot,
                            dF_dlam)


def _tapered_resample(grid, u, sigma):
    """Dilation with a smooth roll-off to zero over the outer 10% of the
    radius, so slowly decaying tails meet the Dirichlet wall without a
    one-cell jump."""
    v = resample(Field(grid, u), sigma).values
    r = grid.r
    a, b = 0.9 * grid.R, 0.995 * grid.R
    mask = r > a
    x = np.clip((r[mask] - a) / (b - a), 0.0, 1.0)
    v[mask] *= np.cos(0.5 * np.pi * x) ** 2
    v[-1] = 0.0
    return v


def _raw_functionals(grid, u, p, q):
    return Functionals(*functionals_kernel(u, grid.weights, grid.mid_weights,
                                           grid.h, p, q))


def _abs_if_signed(u):
    return np.abs(u) if u.min() < 0.0 else u


# ---------------------------------------------------------------------------
# objective builders
# ---------------------------------------------------------------------------

def _lambda_objective(grid, params, mu, S):
    N, p, q = grid.N, params.p, params.q
    nu = N / (N - 2.0)
    cns = qt.c_ns(N, S)
    sub, diag, sup = grid.lap_bands

    def evaluate(u, need_grad):
        f = _raw_functionals(grid, u, p, q)
        J = qt.ng_rayleigh(f, mu, S, params)
        if not need_grad:
            return J, None
        au = np.abs(u)
        Lu = apply_lap(u, sub, diag, sup)
        g = (2.0 / f.Q) * (-cns * nu * f.T ** (nu - 1.0) * Lu
                           - mu * au ** (p - 2.0) * u + au ** (q - 2.0) * u
                           - J * u)
        g[-1] = 0.0
        return J, g

    def post(u):
        u = _abs_if_signed(u)
        u[-1] = 0.0
        f = _raw_functionals(grid, u, p, q)
        rep = qt.fibering(f, mu, S, params)
        if params.focusing_below:
            t = rep.t0
        else:
            t = rep.t1 if rep.kind in ("two-critical", "tangent") else None
        return u * t if t else u

    return evaluate, post


def _mu_objective(grid, params, core_target=None):
    """Scale-free quotient objective with lazy core-width renormalization.

    The quotient is invariant under amplitude and dilation, so on a fixed
    grid a descent can slide along the flat dilation direction into sub-grid
    concentration, where the discrete quotient undercuts the continuum
    infimum.  Re-dilating the iterate back to a resolved core scale is free
    in the continuum and pins the descent to grid-resolved shapes.
    """
    p, q = params.p, params.q
    ts = params.two_star
    beta = 2.0 * q * (ts - p) / (ts * (p - q))
    rho = 2.0 * p * (ts - q) / (ts * (p - q))
    sub, diag, sup = grid.lap_bands
    if core_target is None:
        core_target = max(grid.R / 40.0, 20.0 * grid.h)

    def evaluate(u, need_grad):
        f = _raw_functionals(grid, u, p, q)
        m = f.B ** (beta / q) * f.T / f.A ** (rho / p)
        if not need_grad:
            return m, None
        au = np.abs(u)
        Lu = apply_lap(u, sub, diag, sup)
        g = m * (beta * au ** (q - 2.0) * u / f.B - 2.0 * Lu / f.T
                 - rho * au ** (p - 2.0) * u / f.A)
        g[-1] = 0.0
        return m, g

    def post(u):
        u = _abs_if_signed(u)
        u[-1] = 0.0
        core = _half_mass_radius(grid, u, p)
        if not 0.8 <= core / core_target <= 1.25:
            u = resample(Field(grid, u), core_target / core).values
            u = np.abs(u)
            u[-1] = 0.0
        f = _raw_functionals(grid, u, p, q)
        return u * f.A ** (-1.0 / p)

    return evaluate, post


def _mass_objective(grid, params, mu, alpha):
    p, q = params.p, params.q
    sub, diag, sup = grid.lap_bands

    def evaluate(u, need_grad):
        f = _raw_functionals(grid, u, p, q)
        H = 0.5 * f.T - mu / p * f.A + f.B / q
        if not need_grad:
            return H, None
        au = np.abs(u)
        Lu = apply_lap(u, sub, diag, sup)
        g = -Lu - mu * au ** (p - 2.0) * u + au ** (q - 2.0) * u
        g[-1] = 0.0
        return H, g

    def post(u):
        u = _abs_if_signed(u)
        u[-1] = 0.0
        f = _raw_functionals(grid, u, p, q)
        return u * np.sqrt(alpha / f.Q)

    return evaluate, post


# ---------------------------------------------------------------------------
# prescribed-action frequency minimization
# ---------------------------------------------------------------------------

def _init_values(grid, init):
    if init is None:
        return gaussian_field(grid).values.copy()
    if isinstance(init, Field):
        if not init.grid.compatible(grid):
            raise DomainError("warm-start field lives on a different grid")
        return np.abs(init.values.astype(float))
    return np.abs(np.asarray(init, dtype=float))


def _pohozaev_normalize(grid, u, params, mu, S, rounds=3):
    """sigma-resample plus fibering rescale until T = N S, then snap exactly."""
    N, p, q = grid.N, params.p, params.q
    for _ in range(rounds):
        f = _raw_functionals(grid, u, p, q)
        sig = qt.sigma_opt(f.T, S, N)
        u = resample(Field(grid, u), sig).values
        f = _raw_functionals(grid, u, p, q)
        rep = qt.fibering(f, mu, S, params)
        t = rep.t0 if params.focusing_below else (
            rep.t1 if rep.kind in ("two-critical", "tangent") else None)
        if t:
            u = u * t
    f = _raw_functionals(grid, u, p, q)
    u = u * np.sqrt(N * S / f.T)
    return u


def minimize_lambda(params, grid, init=None, tol=1e-8, max_iter=50_000,
                    boundary_tol=1e-6):
    """Minimize the dilation-optimized frequency quotient at action S.

    In the existence regimes this returns the positive radial minimizer,
    normalized so that T = N S to rounding and the reported frequency is
    exactly the action-level quotient of the field (hence the action
    identity holds exactly).  When the infimum is nonnegative (q < p with
    mu below the threshold) the returned Solution is flagged non-admissible.
    """
    if params.S is None or params.mu is None:
        raise DomainError("minimize_lambda needs S and mu in params")
    if params.mu < 0:
        raise DomainError("mu must be nonnegative")
    S, mu = float(params.S), float(params.mu)
    p, q, N = params.p, params.q, grid.N
    if N != params.N:
        raise DomainError("params.N and grid.N differ")
    u = _init_values(grid, init)
    pre_iters = 0

    if not params.focusing_below:
        f = _raw_functionals(grid, u, p, q)
        if mu == 0.0 or qt.mu_quotient(f, S, params) >= mu:
            # hunt for a shape with mu^S below mu; bottoms out at the threshold
            ev, post = _mu_objective(grid, params)
            target = mu * (1.0 - 1e-3)
            u, m_best, _, pre_iters, ok = _descend(
                u, ev, post, grid,
                stop=lambda J, gn, x: (J <= target) or
                     (gn * _unorm(grid, x) <= 1e-9 * J),
                max_iter=max_iter // 2, precond=_h1_preconditioner(grid),
                project=_scale_free_project)
            if m_best > target:
                if abs(m_best - mu) <= 1e-6 * mu:
                    raise RegimeError(
                        "mu sits at the zero-frequency threshold for this "
                        "action; use the threshold solver instead")
                return _inadmissible_solution(grid, u, params, mu, S,
                                              m_best, pre_iters)

    ev, post = _lambda_objective(grid, params, mu, S)
    u, J, gnorm, iters, converged = _descend(
        u, ev, post, grid,
        stop=lambda J, gn, x: gn <= tol * max(abs(J), 1e-2),
        max_iter=max_iter, stall_window=80, stall_rtol=1e-11)
    if J >= 0:  # nonnegative infimum: nonexistence side
        return _inadmissible_solution(grid, u, params, mu, S, None,
                                      pre_iters + iters)

    u = _pohozaev_normalize(grid, u, params, mu, S)
    # joint Newton polish of (field, frequency) at the pinned action, then
    # restore the exact Pohozaev amplitude (the snap perturbs the residual
    # only by the discrete Pohozaev defect, a few parts in 1e6)
    f = _raw_functionals(grid, u, p, q)
    lam0 = qt.action_level_quotient(f, mu, S, p, q)
    u_new, lam_new, nres = _newton_fixed_action(grid, u.copy(), lam0, mu, S,
                                                p, q)
    if lam_new < 0 and np.all(u_new[:-1] > 0):
        u = u_new
        converged = True
        f = _raw_functionals(grid, u, p, q)
        u = u * np.sqrt(N * S / f.T)
    return _build_solution(grid, u, params, mu, S, pre_iters + iters,
                           converged, boundary_tol)


def _unorm(grid, u):
    return float(np.sqrt(np.dot(grid.weights, u * u)))


def _inadmissible_solution(grid, u, params, mu, S, m_best, iters):
    p, q = params.p, params.q
    f = _raw_functionals(grid, u, p, q)
    rep = qt.fibering(f, mu, S, params)
    if rep.kind in ("two-critical", "tangent"):
        inf_est = max(rep.value_at_t1, 0.0)
    else:
        inf_est = 0.0  # fiber values positive, approaching zero at small amplitude
    fld = Field(grid, u)
    return Solution(field=fld, lambda_hat=inf_est, S=S, mu=mu, alpha=f.Q,
                    T=f.T, Q=f.Q, A=f.A, B=f.B,
                    el_residual=float("nan"), iterations=iters,
                    converged=False, admissible=False, params=params,
                    boundary_mass=boundary_mass_fraction(fld),
                    checks={"mu_quotient_floor": m_best})


def _build_solution(grid, u, params, mu, S, iters, converged, boundary_tol):
    p, q, N = params.p, params.q, grid.N
    fld = Field(grid, u)
    f = functionals(fld, p, q)
    lam = qt.action_level_quotient(f, mu, S, p, q)
    res = gradients(fld, lam, mu, p, q)
    el_res = weighted_norm(res) / weighted_norm(fld)
    bmass = boundary_mass_fraction(fld)
    checks = {
        "sigma_gap": abs(f.T - N * S) / (N * S),
        "action_gap": abs(qt.action(f, lam, mu, p, q) - S) / S,
        "positive": fld.is_positive(),
        "nonincreasing": bool(np.all(np.diff(u) <= 1e-8 * np.max(np.abs(u)))),
    }
    if converged and bmass > boundary_tol:
        raise ConvergenceError(
            f"grid too small: boundary mass fraction {bmass:.3e} exceeds "
            f"{boundary_tol:.1e}; enlarge R")
    return Solution(field=fld, lambda_hat=float(lam), S=S, mu=mu,
                    alpha=f.Q, T=f.T, Q=f.Q, A=f.A, B=f.B,
                    el_residual=float(el_res), iterations=iters,
                    converged=converged, admissible=lam < 0,
                    params=params, boundary_mass=bmass, checks=checks)


# ---------------------------------------------------------------------------
# zero-frequency threshold
# ---------------------------------------------------------------------------

def minimize_mu(S, params, grid, init=None, tol=1e-8, max_iter=50_000,
                boundary_tol=0.1):
    """Minimize the scale-free quotient whose infimum is the zero-frequency
    threshold; rescale the minimizer to action S so it solves the lam = 0
    equation with mu = mu_hat^S.

    Only meaningful for q < p: with the focusing power below the defocusing
    one the amplitude fiber of M^S is monotone and no zero-frequency
    solution exists for any mu > 0.
    """
    if params.focusing_below:
        raise RegimeError("no zero-frequency solution regime: the problem "
                          "with lam = 0 has no solutions for p < q")
    if not S > 0:
        raise DomainError("S must be positive")
    p, q, N = params.p, params.q, grid.N
    ts = params.two_star
    u = _init_values(grid, init)
    ev, post = _mu_objective(grid, params)
    u, m, gnorm, iters, converged = _descend(
        u, ev, post, grid,
        stop=lambda J, gn, x: gn * _unorm(grid, x) <= tol * J,
        max_iter=max_iter, precond=_h1_preconditioner(grid),
        project=_scale_free_project)
    if not converged:
        raise ConvergenceError("threshold minimization did not converge")

    rho = 2.0 * p * (ts - q) / (ts * (p - q))
    e = 2.0 * (p - q) / ((ts - q) * (N - 2.0))
    mu_hat = qt.c_pqn(N, p, q) / S**e * m ** (p / rho)
    sp = qt.Params(N=N, p=p, q=q, mu=mu_hat, S=S)

    # move to the physical scale for action S (taper: a hard Dirichlet chop
    # of the stretched algebraic tail would cost O(u(R)^2 R^{N-1}/h) of
    # kinetic energy), snap the amplitude, then polish the field and the
    # threshold coupling jointly by Newton on the lam = 0 equation with the
    # action pinned to S
    f = _raw_functionals(grid, u, p, q)
    s = qt.s_opt(f, S, sp)
    sig = (N * S / (s * s * f.T)) ** (1.0 / (N - 2.0))
    core_phys = sig * _half_mass_radius(grid, u, p)
    if core_phys > grid.R / 6.0:
        raise ConvergenceError(
            f"physical core scale {core_phys:.3g} too close to the "
            f"truncation radius {grid.R}; enlarge R")
    u = _tapered_resample(grid, s * u, sig)
    f = _raw_functionals(grid, u, p, q)
    u = u * qt.s_opt(f, S, sp)
    u, mu_hat_final, newton_res = _newton_zero_frequency(grid, u, mu_hat, S,
                                                         p, q)
    if not mu_hat_final > 0 or not np.all(u[:-1] >= 0):
        raise ConvergenceError("zero-frequency polish left the positive cone")

    fld = Field(grid, u)
    f = functionals(fld, p, q)
    # report the Newton-certified pair: the field solves the lam = 0
    # equation with mu_hat_final at action S; bar_mu via the exact relation
    bar_mu = (mu_hat_final * S**e / qt.c_pqn(N, p, q)) ** (rho / p)
    s_check = qt.action(f, 0.0, mu_hat_final, p, q)
    res = gradients(fld, 0.0, mu_hat_final, p, q)
    el_res = weighted_norm(res) / weighted_norm(fld)
    bmass = boundary_mass_fraction(fld)
    if bmass > boundary_tol:
        raise ConvergenceError(
            f"boundary mass fraction {bmass:.3e}: algebraic decay needs a "
            "larger truncation radius")
    return ThresholdResult(mu_hat_s=float(mu_hat_final), bar_mu=float(bar_mu),
                           field=fld, s_check=float(s_check),
                           el_residual=float(el_res), S=S, iterations=iters,
                           converged=converged, boundary_mass=bmass)


# ---------------------------------------------------------------------------
# prescribed-mass minimization
# ---------------------------------------------------------------------------

def grid_ground_eigenvalue(grid):
    """Smallest Dirichlet eigenvalue of -L, by inverse power iteration."""
    cache = grid._cache
    if "lam1" not in cache:
        sub, diag, sup = (b.copy() for b in grid.lap_bands)
        # solve on nodes 0..n-1; row n is the Dirichlet row
        sub, diag, sup = -sub[:-1], -diag[:-1], -sup[:-1]
        w = grid.weights[:-1]
        x = np.ones(grid.n)
        lam = None
        for _ in range(200):
            # generalized problem -L x = lam x in the w-inner product is
            # plain tridiagonal here because W(-L) is symmetric
            y = thomas_solve(sub, diag, sup, x)
            y /= np.sqrt(np.dot(w, y * y))
            sub_, diag_, sup_ = sub, diag, sup
            Ly = np.empty_like(y)
            Ly[0] = diag_[0] * y[0] + sup_[0] * y[1]
            Ly[1:-1] = sub_[1:-1] * y[:-2] + diag_[1:-1] * y[1:-1] + sup_[1:-1] * y[2:]
            Ly[-1] = sub_[-1] * y[-2] + diag_[-1] * y[-1]
            new = float(np.dot(w, y * Ly))
            if lam is not None and abs(new - lam) <= 1e-12 * abs(new):
                lam = new
                break
            lam = new
            x = y
        cache["lam1"] = lam
    return cache["lam1"]


def mass_zero_band(grid, alpha):
    """Discrete zero for the vanishing regime: on a truncated domain the
    spreading branch bottoms out near half the lowest Dirichlet eigenvalue
    times the mass, not at exactly zero."""
    return 0.55 * grid_ground_eigenvalue(grid) * alpha + 1e-8 * max(1.0, alpha)


def mass_minimize(alpha, mu, params, grid, init=None, tol=1e-8,
                  max_iter=50_000, spread_tol=1e-2):
    """Minimize the energy over the sphere Q = alpha.

    Detects the vanishing regime (infimum zero, mass spreading) and flags
    no_minimizer; otherwise returns the negative-energy minimizer with the
    Lagrange frequency extracted from the constrained criticality relation.
    """
    if not params.is_shibata():
        raise RegimeError(
            f"prescribed-mass minimization needs 2 < q < p < 2 + 4/N "
            f"(got p={params.p}, q={params.q}, N={params.N})")
    if not alpha > 0 or not mu > 0:
        raise DomainError("alpha and mu must be positive")
    p, q = params.p, params.q
    u = _init_values(grid, init)
    ev, post = _mass_objective(grid, params, mu, alpha)

    def stop(H, gn, x):
        return gn * _unorm(grid, x) <= tol * max(abs(H), 0.01 * (1.0 + alpha))

    u, H, gnorm, iters, converged = _descend(u, ev, post, grid, stop=stop,
                                             max_iter=max_iter,
                                             precond=_h1_preconditioner(grid),
                                             stall_window=100,
                                             stall_rtol=1e-10)
    band = mass_zero_band(grid, alpha)
    no_min = bool(H >= -band)
    if not no_min:
        # polish the minimizer and its Lagrange frequency jointly
        f = _raw_functionals(grid, u, p, q)
        g0 = gradients(Field(grid, u), 0.0, mu, p, q)
        lam0 = float(np.dot(grid.weights, g0.values * u) / f.Q)
        u_new, lam_new, _ = _newton_fixed_mass(grid, u.copy(), lam0, mu,
                                               alpha, p, q)
        if np.all(u_new[:-1] > 0) and lam_new < 0:
            u = u_new
        f = _raw_functionals(grid, u, p, q)
        H = 0.5 * f.T - mu / p * f.A + f.B / q
    fld = Field(grid, u)
    f = functionals(fld, p, q)
    g = gradients(fld, 0.0, mu, p, q)  # lam = 0 gives the raw energy gradient
    lag = float(np.dot(grid.weights, g.values * u) / f.Q)
    res = gradients(fld, lag, mu, p, q)
    el_res = weighted_norm(res) / weighted_norm(fld)
    bmass = boundary_mass_fraction(fld, window=0.05)
    return MassResult(alpha=float(alpha), h_hat=float(H), field=fld,
                      lagrange_lambda=lag, tau=-lag, no_minimizer=no_min,
                      converged=converged, iterations=iters,
                      el_residual=float(el_res), boundary_mass=bmass)


def estimate_alpha0(mu, params, grid, alpha_range=(1e-3, 1e5), rel_width=1e-3,
                    scan_points=13, tol=1e-7, max_iter=30_000):
    """Bisection on alpha over the sign of the constrained energy minimum.

    The energy counts as zero while it stays above the discrete zero band;
    alpha_0 is the edge where it first dips strictly below.  Each probe
    tries several initial widths plus the last negative-branch field: the
    energy landscape has a spreading branch and a localized one, and a
    converged state of the wrong branch is a critical point that would trap
    a single warm-started descent.
    """
    if not params.is_shibata():
        raise RegimeError("alpha_0 estimation needs the 2 < q < p < 2 + 4/N regime")
    lo = hi = None
    warm_neg = None

    def probe(a):
        nonlocal warm_neg
        inits = [] if warm_neg is None else [warm_neg]
        inits += [gaussian_field(grid, width=1.0).values,
                  gaussian_field(grid, width=0.3).values]
        best = None
        for init in inits:
            r = mass_minimize(a, mu, params, grid, init=init, tol=tol,
                              max_iter=max_iter)
            if best is None or r.h_hat < best.h_hat:
                best = r
            if not r.no_minimizer:
                break
        if not best.no_minimizer:
            warm_neg = best.field
        return best

    alphas = np.geomspace(alpha_range[0], alpha_range[1], scan_points)
    prev = None
    for a in alphas:
        isneg = not probe(a).no_minimizer
        if prev is not None and not prev[1] and isneg:
            lo, hi = prev[0], a
            break
        prev = (a, isneg)
    if lo is None:
        raise ConvergenceError(
            f"no sign change of the constrained energy in alpha range "
            f"{alpha_range}")
    while hi - lo > rel_width * hi:
        mid = np.sqrt(lo * hi)
        if not probe(mid).no_minimizer:
            hi = mid
        else:
            lo = mid
    return float(np.sqrt(lo * hi))
