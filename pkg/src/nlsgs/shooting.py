"""Independent verification by shooting on the radial ODE

    u'' + (N-1)/r u' + lam u + mu |u|^{p-2} u - |u|^{q-2} u = 0,
    u(0) = u0,  u'(0) = 0.

The profile solver bisects on u0 between trajectories that cross zero and
trajectories that stay positive; the separatrix is the (unique, for q < p)
positive decaying solution.  Everything here is independent of the
variational solvers, so agreement between the two is a real check.

Mechanics of the scan, in Newton-particle terms (position u, time r,
friction (N-1)/r): the effective potential lam u^2/2 + mu u^p/p - u^q/q has
a hilltop at 0 for lam < 0.  Starts below the separatrix fall back and stay
positive forever; starts above it overshoot the hilltop and cross zero.
Small u0 therefore does NOT decay: the regular solution of the linearized
equation grows like the modified Bessel function i_0.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, RegimeError
from .grid import Field, make_grid, functionals, gradients, weighted_norm
from .quotients import action, sigma_opt

CROSSED = "crossed-zero"
BLEWUP = "blew-up-positive"
DECAYED = "decayed"


@dataclass
class ShotOutcome:
    kind: str
    crossing_radius: Optional[float]
    profile: Field


@dataclass
class ShootingConfig:
    rtol: float = 1e-10
    atol: float = 1e-14
    r_start: float = 1e-6
    blow_factor: float = 50.0
    u0_min: float = 1e-6
    u0_max: float = 1e4
    scan_points: int = 200
    bisect_rel: float = 1e-12
    # lam = 0 tail matching: decayed when r u'/u <= -slope*(1 - slope_tol).
    # None picks max(N-2, 2/(q-2)): the far field is governed by the lower
    # power q when 2/(q-2) > N-2, giving algebraic decay r^(-2/(q-2)).
    zero_slope: Optional[float] = None
    zero_slope_tol: float = 0.10


@dataclass
class ShootingProfile:
    """Separatrix profile with the parameters it was computed at."""
    field: Field
    u0: float
    lam: float
    mu: float
    N: int
    p: float
    q: float


def _integrate(u0, lam, mu, N, p, q, R, cfg):
    def rhs(r, y):
        u, v = y
        au = abs(u)
        return (v, -(N - 1) / r * v - lam * u - mu * au ** (p - 2) * u + au ** (q - 2) * u)

    r0 = cfg.r_start
    upp0 = -(lam * u0 + mu * u0 ** (p - 1) - u0 ** (q - 1)) / N
    y0 = (u0 + 0.5 * upp0 * r0**2, upp0 * r0)
    cap = cfg.blow_factor * max(1.0, u0)

    def ev_cross(r, y):
        return y[0]
    ev_cross.terminal = True
    ev_cross.direction = -1

    def ev_blow(r, y):
        return abs(y[0]) - cap
    ev_blow.terminal = True

    sol = solve_ivp(rhs, (r0, R), y0, method="DOP853", rtol=cfg.rtol,
                    atol=cfg.atol * max(1.0, u0), events=[ev_cross, ev_blow],
                    dense_output=True)
    if sol.status == -1:
        from .errors import ConvergenceError
        raise ConvergenceError(f"integrator failed at u0={u0}: {sol.message}")
    return sol


def shoot(u0, lam, mu, N, p, q, R=40.0, config=None):
    """Integrate one shot and classify it.

    kinds: crossed-zero (u hit 0 going down), blew-up-positive (exceeded the
    blow-up cap, or reached R still positive without meeting the decay
    criterion), decayed (reached R below the decay envelope; for lam = 0,
    algebraic tail-slope matching instead).
    """
    if u0 <= 0:
        raise DomainError("shooting amplitude u0 must be positive")
    if lam > 0:
        raise RegimeError("no decaying radial profiles with lam > 0")
    cfg = config or ShootingConfig()
    sol = _integrate(u0, lam, mu, N, p, q, R, cfg)
    profile = _to_field(sol, lam, N, R, cfg)
    if sol.t_events[0].size:
        return ShotOutcome(CROSSED, float(sol.t_events[0][0]), profile)
    if sol.t_events[1].size:
        return ShotOutcome(BLEWUP, None, profile)
    u_end, v_end = sol.y[0, -1], sol.y[1, -1]
    if lam < 0:
        decayed = abs(u_end) <= np.exp(-np.sqrt(-lam) * R / 2.0) * u0
    else:
        slope_target = cfg.zero_slope
        if slope_target is None:
            slope_target = max(N - 2.0, 2.0 / (q - 2.0))
        slope = R * v_end / u_end if u_end != 0 else 0.0
        decayed = slope <= -slope_target * (1.0 - cfg.zero_slope_tol)
    return ShotOutcome(DECAYED if decayed else BLEWUP, None, profile)


def _to_field(sol, lam, N, R, cfg, n=2048):
    grid = make_grid(N, R, n)
    r = grid.r
    vals = np.zeros(n + 1)
    rmax = sol.t[-1]
    inside = r <= rmax
    vals[inside] = sol.sol(np.maximum(r[inside], sol.t[0]))[0]
    vals[0] = sol.sol(sol.t[0])[0]
    return Field(grid, vals)


def _classify(u0, lam, mu, N, p, q, R, cfg):
    sol = _integrate(u0, lam, mu, N, p, q, R, cfg)
    if sol.t_events[0].size:
        return CROSSED, sol
    return "stayed-positive", sol


def find_ground_profile(lam, mu, N, p, q, grid=None, R=None, n=4096, config=None):
    """Bisect on u0 for the separatrix; return the profile on `grid`.

    Raises ConvergenceError("no solution detected ...") when the u0 scan
    shows no stayed-positive -> crossed-zero transition, which is what the
    nonexistence regimes look like from the shooting side.
    """
    from .errors import ConvergenceError
    cfg = config or ShootingConfig()
    if grid is None:
        grid = make_grid(N, R if R is not None else 40.0, n)
    R_int = grid.R

    u0s = np.geomspace(cfg.u0_min, cfg.u0_max, cfg.scan_points)
    kinds = []
    for u0 in u0s:
        kinds.append(_classify(u0, lam, mu, N, p, q, R_int, cfg)[0])
    lo = hi = None
    for i in range(len(u0s) - 1):
        if kinds[i] == "stayed-positive" and kinds[i + 1] == CROSSED:
            lo, hi = u0s[i], u0s[i + 1]
            break
    if lo is None:
        raise ConvergenceError(
            "no solution detected: the u0 scan has no stayed-positive to "
            "crossed-zero transition at these parameters")

    while hi - lo > cfg.bisect_rel * hi:
        mid = np.sqrt(lo * hi)
        kind, _ = _classify(mid, lam, mu, N, p, q, R_int, cfg)
        if kind == CROSSED:
            hi = mid
        else:
            lo = mid
    u0_star = np.sqrt(lo * hi)

    sol = _integrate(u0_star, lam, mu, N, p, q, R_int, cfg)
    vals = _sample_with_tail(sol, lam, N, grid)
    field = Field(grid, vals)
    return ShootingProfile(field, float(u0_star), lam, mu, N, p, q)


def _sample_with_tail(sol, lam, N, grid):
    """Sample the separatrix shot on the grid, grafting the asymptotic tail.

    Past the point where the bisected trajectory decays below ~1e-8 of its
    start, exponential instability of the separatrix makes the raw shot
    meaningless; the linearized decaying branch e^{-kr} r^{-(N-1)/2}
    (k = sqrt(-lam)) is grafted there.  For lam = 0 the raw samples are kept
    (algebraic decay carries real information across the domain).
    """
    r = grid.r
    vals = np.zeros(grid.n + 1)
    rmax = sol.t[-1]
    inside = r <= rmax
    rq = np.minimum(np.maximum(r, sol.t[0]), rmax)
    vals[inside] = sol.sol(rq[inside])[0]
    if lam < 0:
        k = np.sqrt(-lam)
        u0 = vals[0]
        dense_r = np.linspace(sol.t[0], rmax, 4000)
        dense_u = sol.sol(dense_r)[0]
        bad = np.nonzero((dense_u <= 1e-8 * u0) | (dense_u < 0))[0]
        r_graft = dense_r[bad[0]] if bad.size else rmax
        i_graft = min(int(r_graft / grid.h), grid.n - 1)
        if i_graft >= 2:
            rg = r[i_graft]
            ug = vals[i_graft]
            tail = r[i_graft:]
            shape = np.exp(-k * (tail - rg)) * (rg / tail) ** ((N - 1) / 2.0)
            vals[i_graft:] = ug * shape
    vals[-1] = 0.0
    return vals


def verify(sol, profile, p=None, q=None):
    """Cross-check a variational Solution against a shooting profile.

    Reports the relative weighted-L2 field gap, the action gap, and the
    Pohozaev gap |T - N S|/(N S) of the oracle profile.  Raises on
    mismatched parameters (the oracle must be computed at sol.lambda_hat).
    """
    sp = sol.params
    if (profile.N, profile.p, profile.q) != (sp.N, sp.p, sp.q) or profile.mu != sp.mu:
        raise DomainError("oracle and solution parameters differ")
    if abs(profile.lam - sol.lambda_hat) > 5e-3 * max(abs(sol.lambda_hat), 1e-12):
        raise DomainError("oracle frequency differs from the solution's lambda")
    u = sol.field
    v = profile.field
    if not u.grid.compatible(v.grid):
        v = Field(u.grid, np.interp(u.grid.r, v.grid.r, v.values))
    diff = weighted_norm(u - v) / weighted_norm(v)
    f = functionals(v, sp.p, sp.q)
    S_oracle = action(f, profile.lam, profile.mu, sp.p, sp.q)
    action_gap = abs(S_oracle - sol.S) / abs(sol.S)
    pohozaev_gap = abs(f.T - u.grid.N * S_oracle) / (u.grid.N * abs(S_oracle))
    res = gradients(v, profile.lam, profile.mu, sp.p, sp.q)
    return {
        "field_l2_rel": float(diff),
        "action_gap_rel": float(action_gap),
        "pohozaev_gap_rel": float(pohozaev_gap),
        "oracle_action": float(S_oracle),
        "oracle_el_residual": float(weighted_norm(res) / weighted_norm(v)),
    }
