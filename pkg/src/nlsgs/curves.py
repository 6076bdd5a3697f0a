"""Parameter sweeps over the action level and the identities along them:
monotone frequency curves, two-sided bracketing, the derivative identity
d lam_hat / dS = -2 / alpha^S, curve inversion, the threshold action, and
the action-side / mass-side agreement check.
"""
import csv
from dataclasses import dataclass, field as dc_field
from typing import List, Optional

import numpy as np

from . import quotients as qt
from .errors import ConvergenceError, DomainError, RegimeError
from .grid import Field, functionals, resample, weighted_norm
from .solvers import mass_minimize, minimize_lambda


@dataclass
class CurvePoint:
    S: float
    lambda_hat: float
    alpha_s: float
    T: float
    Q: float
    residual: float
    converged: bool
    physical: Optional[bool] = None


@dataclass
class CurveTable:
    params: qt.Params
    points: List[CurvePoint]
    fields: List[Optional[Field]]
    checks: dict = dc_field(default_factory=dict)

    def converged_pairs(self):
        out = []
        for a, b in zip(self.points, self.points[1:]):
            if a.converged and b.converged and a.lambda_hat < 0 and b.lambda_hat < 0:
                out.append((a, b))
        return out


def _ladder(s_min, s_max, steps):
    if steps < 2 or not 0 < s_min < s_max:
        raise DomainError("empty ladder: need steps >= 2 and 0 < Smin < Smax")
    ratio = (s_max / s_min) ** (1.0 / (steps - 1))
    return s_min * ratio ** np.arange(steps)


def _solve_chain(params, grid, s_values, init, solver_kwargs):
    points, fields = [], []
    warm = init
    for S in s_values:
        pk = qt.Params(N=params.N, p=params.p, q=params.q, mu=params.mu, S=float(S))
        try:
            sol = minimize_lambda(pk, grid, init=warm, **solver_kwargs)
            ok = sol.converged and sol.admissible
            points.append(CurvePoint(float(S), sol.lambda_hat, sol.alpha,
                                     sol.T, sol.Q, sol.el_residual, ok))
            fields.append(sol.field)
            if ok:
                warm = sol.field
        except (ConvergenceError, RegimeError) as exc:
            points.append(CurvePoint(float(S), float("nan"), float("nan"),
                                     float("nan"), float("nan"), float("nan"),
                                     False))
            fields.append(None)
    return points, fields


def sweep_S(params, grid, s_min, s_max, steps, init=None, s_mu=None,
            workers=1, **solver_kwargs):
    """Geometric ladder of prescribed-action solves with warm starts.

    Non-converged points are recorded as such, never dropped.  With s_mu
    given (the q < p threshold action), points below 1.02 s_mu are refused
    up front to stay clear of the degenerate small-frequency edge.  With
    workers > 1 the ladder after the first point is split into contiguous
    blocks solved in parallel, each warm-started from the first point.
    """
    s_values = _ladder(s_min, s_max, steps)
    if s_mu is not None:
        kept = s_values >= 1.02 * s_mu
        if not np.any(kept):
            raise DomainError("entire ladder below the threshold action")
        s_values = s_values[kept]
    if workers > 1 and len(s_values) > 2:
        first_pts, first_fields = _solve_chain(params, grid, s_values[:1],
                                               init, solver_kwargs)
        blocks = np.array_split(np.arange(1, len(s_values)), workers)
        from concurrent.futures import ProcessPoolExecutor
        warm = first_fields[0] if first_pts[0].converged else init
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_solve_chain, params, grid, s_values[b], warm,
                              solver_kwargs) for b in blocks if b.size]
            parts = [f.result() for f in futs]
        points = first_pts + [p for pts, _ in parts for p in pts]
        fields = first_fields + [f for _, fs in parts for f in fs]
    else:
        points, fields = _solve_chain(params, grid, s_values, init,
                                      solver_kwargs)

    table = CurveTable(params, points, fields)
    _tag_physical(table)
    table.checks["monotone_lambda"] = _monotone_check(table)
    table.checks["alpha_continuity"] = _alpha_continuity(table)
    return table


def _monotone_check(table):
    ok = True
    for a, b in table.converged_pairs():
        if not b.lambda_hat < a.lambda_hat:
            ok = False
    return ok


def _alpha_continuity(table):
    pts = [p for p in table.points if p.converged]
    if len(pts) < 3:
        return True
    for k in range(1, len(pts) - 1):
        jump = abs(pts[k + 1].alpha_s - pts[k].alpha_s)
        trend = abs(pts[k].alpha_s - pts[k - 1].alpha_s) + 1e-12 * pts[k].alpha_s
        if jump > 10.0 * trend:
            return False
    return True


def _tag_physical(table, rel_tol=1e-2):
    """Mark points whose field is close to both neighbors after matching the
    dilation normalization: the discrete surrogate for persistence of the
    branch under perturbation of the action level."""
    N = table.params.N
    for k, pt in enumerate(table.points):
        if not pt.converged or table.fields[k] is None:
            continue
        if k == 0 or k == len(table.points) - 1:
            pt.physical = None
            continue
        uk = table.fields[k]
        ok = True
        for j in (k - 1, k + 1):
            pj, fj = table.points[j], table.fields[j]
            if not pj.converged or fj is None:
                ok = False
                break
            sig = (pt.S / pj.S) ** (1.0 / (N - 2.0))
            vj = resample(fj, sig)
            ok = ok and (weighted_norm(vj - uk) / weighted_norm(uk) <= rel_tol)
        pt.physical = ok


def check_bracketing(table, slack=1e-6):
    """Two-sided bracketing of frequency differences between adjacent
    converged points:

    -2 (S2-S1)(S2/S1)^{N/(N-2)} / Q2 < lam2 - lam1
                                     < -2 (S2-S1)(S1/S2)^{N/(N-2)} / Q1.
    """
    N = table.params.N
    nu = N / (N - 2.0)
    out = []
    for a, b in zip(table.points, table.points[1:]):
        if not (a.converged and b.converged):
            continue
        if b.S == a.S:
            continue
        dS = b.S - a.S
        lower = -2.0 * dS * (b.S / a.S) ** nu / b.Q
        upper = -2.0 * dS * (a.S / b.S) ** nu / a.Q
        diff = b.lambda_hat - a.lambda_hat
        eps = slack * max(abs(lower), abs(upper))
        out.append({"S1": a.S, "S2": b.S, "lower": lower, "diff": diff,
                    "upper": upper,
                    "ok": bool(lower - eps < diff < upper + eps)})
    return out


def check_derivative(table):
    """Central difference of lam_hat over S against -2/alpha^S at interior
    converged points."""
    pts = table.points
    out = []
    for k in range(1, len(pts) - 1):
        a, m, b = pts[k - 1], pts[k], pts[k + 1]
        if not (a.converged and m.converged and b.converged):
            continue
        fd = (b.lambda_hat - a.lambda_hat) / (b.S - a.S)
        ident = -2.0 / m.alpha_s
        out.append({"S": m.S, "fd": fd, "identity": ident,
                    "gap_rel": abs(fd - ident) / abs(ident)})
    return out


def invert_lambda(table, lam):
    """Monotone inverse of the frequency curve: the action at which the
    minimized frequency equals lam.

    The curve is strictly decreasing in S, so the inverse action grows as
    the frequency gets more negative; a table violating that monotonicity
    is rejected.
    """
    pts = [p for p in table.points if p.converged]
    if len(pts) < 2:
        raise DomainError("need at least two converged points to invert")
    lams = np.array([p.lambda_hat for p in pts])
    svals = np.array([p.S for p in pts])
    if not np.all(np.diff(lams) < 0):
        raise DomainError("table violates the monotonicity of the frequency curve")
    if not (lams.min() <= lam <= lams.max()):
        raise DomainError(f"lam={lam} outside the table range "
                          f"[{lams.min():.6g}, {lams.max():.6g}]")
    from scipy.interpolate import PchipInterpolator
    interp = PchipInterpolator(lams[::-1], svals[::-1])
    return float(interp(lam))


def threshold_S_of_mu(mu, bar_mu, params):
    """Closed-form threshold action S(mu) = bar_mu^{N/2} (c/mu)^{(N-2)(2*-q)/(2(p-q))},
    the inverse of the map from action level to threshold coupling."""
    if params.focusing_below:
        raise RegimeError("threshold action exists only for q < p")
    if not mu > 0 or not bar_mu > 0:
        raise DomainError("mu and bar_mu must be positive")
    N, p, q = params.N, params.p, params.q
    ts = params.two_star
    c = qt.c_pqn(N, p, q)
    return bar_mu ** (N / 2.0) * (c / mu) ** ((N - 2.0) * (ts - q) / (2.0 * (p - q)))


def stability_inclusion(S, mu, params, grid, alpha0=None, init=None,
                        **solver_kwargs):
    """Check that the action-side and mass-side minimizers agree.

    Solves the prescribed-action problem, reads off alpha^S = Q(u_hat), then
    solves the prescribed-mass problem at that alpha and compares energies,
    frequencies (the mass-side frequency is the level quotient of the
    minimizer), and fields.  In the continuum the unique positive radial
    profile makes all three gaps vanish.
    """
    pk = qt.Params(N=params.N, p=params.p, q=params.q, mu=mu, S=float(S))
    if not pk.is_shibata():
        raise RegimeError("inclusion check needs 2 < q < p < 2 + 4/N")
    sol = minimize_lambda(pk, grid, init=init, **solver_kwargs)
    if not sol.admissible:
        raise RegimeError("no admissible action-side minimizer at these "
                          "parameters")
    alpha_s = sol.alpha
    if alpha0 is not None and alpha_s <= alpha0:
        raise RegimeError(
            f"alpha^S={alpha_s:.6g} is at or below alpha_0={alpha0:.6g}: "
            "outside the mass-existence range")
    mres = mass_minimize(alpha_s, mu, pk, grid, init=sol.field,
                         **solver_kwargs)
    f_mass = functionals(mres.field, params.p, params.q)
    h_action = qt.hamiltonian(functionals(sol.field, params.p, params.q),
                              mu, params.p, params.q)
    lam_check = qt.action_level_quotient(f_mass, mu, S, params.p, params.q)
    dist = weighted_norm(mres.field - sol.field) / weighted_norm(sol.field)
    return {
        "S": float(S),
        "mu": float(mu),
        "alpha_s": float(alpha_s),
        "alpha0": alpha0,
        "h_action_side": float(h_action),
        "h_mass_side": float(mres.h_hat),
        "h_gap_rel": abs(h_action - mres.h_hat) / abs(mres.h_hat),
        "lambda_hat": float(sol.lambda_hat),
        "lambda_check": float(lam_check),
        "lambda_gap_rel": abs(lam_check - sol.lambda_hat) / abs(sol.lambda_hat),
        "field_gap_rel": float(dist),
        "tau": float(mres.tau),
        "no_minimizer": mres.no_minimizer,
    }


def write_table_csv(table, path):
    """The plotting interface: one row per sweep point."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["S", "lambdaHat", "alphaS", "T", "Q", "residual",
                     "converged", "physical"])
        for p in table.points:
            wr.writerow([f"{p.S!r}", f"{p.lambda_hat!r}", f"{p.alpha_s!r}",
                         f"{p.T!r}", f"{p.Q!r}", f"{p.residual!r}",
                         int(p.converged),
                         "" if p.physical is None else int(p.physical)])
