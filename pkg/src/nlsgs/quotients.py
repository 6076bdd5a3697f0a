"""Closed-form Rayleigh-quotient algebra on (T, Q, A, B) tuples.

Everything here is exact arithmetic on functional values; fields enter only
through grid.functionals. Conventions, for exponents 2 < p, q < 2* and
action level S > 0:

    action        S_{lam,mu}(u) = T/2 - lam Q/2 - (mu/p) A + (1/q) B
    level quotient   Lam^S(u)   = (T/2 - (mu/p) A + (1/q) B - S) / (Q/2)
    ng quotient      lam^S(u)   = (2/Q) ((cNS/2) T^{N/(N-2)} - (mu/p) A + (1/q) B)

lam^S is Lam^S optimized over the dilation u(./sigma); it is invariant under
that dilation, and for q < p the amplitude-optimized companion mu^S(u) is
invariant under both dilation and amplitude scaling.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, RegimeError


@dataclass(frozen=True)
class Params:
    """Problem parameters. S / lam / alpha are optional: each operation
    states which of them it needs."""
    N: int
    p: float
    q: float
    mu: float = 0.0
    S: Optional[float] = None
    lam: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.N < 3:
            raise DomainError("dimension below 3")
        ts = self.two_star
        for name, e in (("p", self.p), ("q", self.q)):
            if not 2.0 < e < ts:
                raise DomainError(f"exponent {name}={e} outside (2, {ts})")
        if self.p == self.q:
            raise DomainError("p == q is excluded (quotient constants divide by p - q)")
        if self.S is not None and not self.S > 0:
            raise DomainError("action level S must be positive")

    @property
    def two_star(self):
        return 2.0 * self.N / (self.N - 2.0)

    @property
    def focusing_below(self):
        """True in the p < q arrangement (focusing term has the lower power)."""
        return self.p < self.q

    def is_shibata(self):
        return 2.0 < self.q < self.p < 2.0 + 4.0 / self.N


@dataclass(frozen=True)
class Constants:
    """Closed-form constants of the quotient algebra.

    c_ns multiplies T^{N/(N-2)} in the ng quotient; c_pqns fixes the
    amplitude minimizer s^S; C_pqns and c_pqn appear in mu^S, with
    C_pqns = c_pqn / S^{2(p-q)/((2*-q)(N-2))}. The mu^S family exists only
    for q < p, so those entries are None otherwise. gn_estimate is an
    optional empirical lower-constant probe, never a sharp value.
    """
    c_ns: float
    c_pqns: Optional[float]
    C_pqns: Optional[float]
    c_pqn: Optional[float]
    beta: Optional[float]
    rho: Optional[float]
    gn_estimate: Optional[float] = None


def c_ns(N, S):
    if not S > 0:
        raise DomainError("S must be positive")
    nu = N / (N - 2.0)
    return (N - 2.0) / (N**nu * S ** (2.0 / (N - 2.0)))


def c_pqn(N, p, q):
    """The S-independent mu^S constant; requires q < p."""
    ts = 2.0 * N / (N - 2.0)
    if not q < p:
        raise RegimeError("mu^S constants exist only for q < p")
    nu = N / (N - 2.0)
    base = (N - 2.0) / N**nu * q * (ts - p) / (2.0 * (p - q))
    return base ** ((p - q) / (ts - q)) * p * (ts - q) / (q * (ts - p))


def constants(params, gn_samples=0, grid=None, seed=0):
    """Evaluate all closed-form constants for the given parameters.

    With gn_samples > 0 and a grid, also estimates the interpolation-
    inequality constant empirically as the max of A / (T^a B^b) over random
    smooth fields (a probe, not the sharp constant).
    """
    N, p, q, S = params.N, params.p, params.q, params.S
    if S is None:
        raise DomainError("constants need the action level S")
    ts = params.two_star
    out_cns = c_ns(N, S)
    if q < p:
        beta = 2.0 * q * (ts - p) / (ts * (p - q))
        rho = 2.0 * p * (ts - q) / (ts * (p - q))
        cpqn = c_pqn(N, p, q)
        Cpqns = cpqn / S ** (2.0 * (p - q) / ((ts - q) * (N - 2.0)))
        cpqns = out_cns * q * (ts - p) / (2.0 * (p - q))
        gn = None
        if gn_samples and grid is not None:
            gn = _gn_probe(params, grid, gn_samples, seed)
        return Constants(out_cns, cpqns, Cpqns, cpqn, beta, rho, gn)
    return Constants(out_cns, None, None, None, None, None, None)


def _gn_probe(params, grid, samples, seed):
    from .grid import functionals as field_functionals, Field
    ts = params.two_star
    p, q = params.p, params.q
    a = ts * (p - q) / (2.0 * (ts - q))
    b = (ts - p) / (ts - q)
    rng = np.random.default_rng(seed)
    best = 0.0
    r = grid.r
    for _ in range(samples):
        widths = rng.uniform(0.5, 4.0, size=3)
        amps = rng.uniform(0.2, 2.0, size=3)
        v = sum(am * np.exp(-(r / wd) ** 2) for am, wd in zip(amps, widths))
        f = field_functionals(Field(grid, v), p, q)
        best = max(best, f.A / (f.T**a * f.B**b))
    return best


def action(f, lam, mu, p, q):
    return 0.5 * f.T - lam * 0.5 * f.Q - mu / p * f.A + 1.0 / q * f.B


def hamiltonian(f, mu, p, q):
    return 0.5 * f.T - mu / p * f.A + 1.0 / q * f.B


def action_level_quotient(f, mu, S, p, q):
    """Lam^S(u); satisfies Lam^S(u) = lam  <=>  S_{lam,mu}(u) = S."""
    if f.Q <= 0:
        raise DomainError("level quotient undefined at Q = 0")
    return (0.5 * f.T - mu / p * f.A + 1.0 / q * f.B - S) / (0.5 * f.Q)


def sigma_opt(T, S, N):
    """Maximizer of the dilation fiber: sigma^S = (N S / T)^{1/(N-2)}."""
    if T <= 0:
        raise DomainError("sigma^S undefined at T = 0")
    if not S > 0:
        raise DomainError("S must be positive")
    return (N * S / T) ** (1.0 / (N - 2.0))


def ng_rayleigh(f, mu, S, params):
    if f.Q <= 0 or f.T <= 0:
        raise DomainError("ng quotient undefined at Q = 0 or T = 0")
    N = params.N
    nu = N / (N - 2.0)
    return (2.0 / f.Q) * (0.5 * c_ns(N, S) * f.T**nu - mu / params.p * f.A
                          + 1.0 / params.q * f.B)


def scaling_laws(f, sigma=1.0, t=1.0, *, N, p, q):
    """Exact transformation of (T,Q,A,B) under u -> t u(./sigma)."""
    if sigma <= 0 or t <= 0:
        raise DomainError("scaling factors must be positive")
    from .grid import Functionals
    sN = sigma**N
    return Functionals(sigma ** (N - 2) * t**2 * f.T, sN * t**2 * f.Q,
                       sN * t**p * f.A, sN * t**q * f.B)


def m_quotient(f, S, params):
    """M^S(u); satisfies M^S(u) = mu  <=>  ng_rayleigh(u, mu) = 0."""
    if f.A <= 0:
        raise DomainError("M^S undefined at A = 0")
    N = params.N
    nu = N / (N - 2.0)
    return (0.5 * c_ns(N, S) * f.T**nu + f.B / params.q) / (f.A / params.p)


def s_opt(f, S, params):
    """Unique minimizer of s -> M^S(s u), or None when p < q.

    For p < q the amplitude fiber of M^S is monotone (no interior critical
    point); that monotonicity is exactly what rules out zero-frequency
    solutions in that regime, so the outcome is reported, not raised.
    """
    if params.focusing_below:
        return None
    if f.T <= 0 or f.B <= 0:
        raise DomainError("s^S needs T > 0 and B > 0")
    N, p, q = params.N, params.p, params.q
    ts = params.two_star
    nu = N / (N - 2.0)
    cpqns = c_ns(N, S) * q * (ts - p) / (2.0 * (p - q))
    return (f.B / (cpqns * f.T**nu)) ** (1.0 / (ts - q))


def mu_quotient(f, S, params):
    """mu^S(u) = min_s M^S(s u); invariant under amplitude and dilation."""
    if params.focusing_below:
        raise RegimeError("mu^S exists only for q < p "
                          "(for p < q the amplitude fiber of M^S is monotone)")
    if f.A <= 0 or f.T <= 0 or f.B <= 0:
        raise DomainError("mu^S needs positive T, A, B")
    N, p, q = params.N, params.p, params.q
    ts = params.two_star
    Cpqns = c_pqn(N, p, q) / S ** (2.0 * (p - q) / ((ts - q) * (N - 2.0)))
    return Cpqns * f.B ** ((ts - p) / (ts - q)) * f.T ** (ts * (p - q) / (2.0 * (ts - q))) / f.A


def mu_bar_quotient(f, params):
    """The S-free companion ||u||_q^beta T / ||u||_p^rho of mu^S."""
    if params.focusing_below:
        raise RegimeError("mu(u) exists only for q < p")
    ts = params.two_star
    p, q = params.p, params.q
    beta = 2.0 * q * (ts - p) / (ts * (p - q))
    rho = 2.0 * p * (ts - q) / (ts * (p - q))
    return f.B ** (beta / q) * f.T / f.A ** (rho / p)


@dataclass(frozen=True)
class FiberingReport:
    """Critical points of the amplitude fiber t -> lam^S(t u).

    kind: 'unique-minimum' (p < q), 'two-critical', 'tangent' (merged pair),
    or 'none'. t0 <= t1; values are lam^S at those amplitudes. s_opt and
    mu_at_s_opt describe the companion fiber s -> M^S(s u) when q < p.
    """
    kind: str
    t0: Optional[float] = None
    t1: Optional[float] = None
    value_at_t0: Optional[float] = None
    value_at_t1: Optional[float] = None
    s_opt: Optional[float] = None
    mu_at_s_opt: Optional[float] = None


def _fiber_value(t, a, b, c, gamma, p, q, Q):
    return (a * t**gamma - b * t ** (p - 2.0) + c * t ** (q - 2.0)) / Q


def _fiber_slope(t, a, b, c, gamma, p, q):
    # t * d/dt of the fiber numerator; same positive roots as the derivative
    return (gamma * a * t**gamma - (p - 2.0) * b * t ** (p - 2.0)
            + (q - 2.0) * c * t ** (q - 2.0))


def fibering(f, mu, S, params, *, points_per_decade=64, decades=6, tangent_tol=1e-8):
    """Classify the critical points of t -> lam^S(t u).

    Root-finding on the sign of the fiber derivative over a log-spaced
    amplitude scan centered at the slope's interior extremum (closed form),
    then bisection to 1e-12 relative.  For q < p the two-critical case has
    value_at_t0 > 0 > value_at_t1 exactly when mu > mu^S(u); the merged
    (tangent) case is detected by evaluating the slope at its extremum.
    """
    if f.Q <= 0 or f.T <= 0:
        raise DomainError("fibering needs a nonzero field")
    N, p, q = params.N, params.p, params.q
    gamma_ = 4.0 / (N - 2.0)
    nu = N / (N - 2.0)
    a = c_ns(N, S) * f.T**nu
    b = 2.0 * mu / p * f.A
    c = 2.0 / q * f.B
    Q = f.Q

    if params.focusing_below:
        # slope / t^{p-2} is strictly increasing: exactly one critical point
        center = (b * (p - 2.0) / (a * gamma_)) ** (1.0 / (gamma_ - p + 2.0))
    else:
        # slope / t^{q-2} has a single interior minimum at the balance point
        center = ((p - q) * (p - 2.0) * b
                  / (gamma_ * (gamma_ - q + 2.0) * a)) ** (1.0 / (gamma_ - p + 2.0))
    ts_scan = center * np.logspace(-decades / 2, decades / 2,
                                   int(points_per_decade * decades) + 1)
    slopes = _fiber_slope(ts_scan, a, b, c, gamma_, p, q)

    roots = []
    sign = np.sign(slopes)
    for i in np.nonzero(np.diff(sign) != 0)[0]:
        lo, hi = ts_scan[i], ts_scan[i + 1]
        flo = slopes[i]
        for _ in range(200):
            mid = np.sqrt(lo * hi)
            fm = _fiber_slope(mid, a, b, c, gamma_, p, q)
            if fm == 0.0:
                lo = hi = mid
                break
            if np.sign(fm) == np.sign(flo):
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * hi:
                break
        roots.append(np.sqrt(lo * hi))

    if params.focusing_below:
        t_star = roots[0] if roots else center
        v = _fiber_value(t_star, a, b, c, gamma_, p, q, Q)
        return FiberingReport("unique-minimum", t_star, t_star, v, v)

    s_m = s_opt(f, S, params)
    mu_s = m_quotient(scaling_laws(f, 1.0, s_m, N=N, p=p, q=q), S, params)
    if len(roots) >= 2:
        t0, t1 = roots[0], roots[-1]
        return FiberingReport("two-critical", t0, t1,
                              _fiber_value(t0, a, b, c, gamma_, p, q, Q),
                              _fiber_value(t1, a, b, c, gamma_, p, q, Q),
                              s_m, mu_s)
    # 0 or 1 sign changes: tangency test at the slope's exact extremum
    slope_min = _fiber_slope(center, a, b, c, gamma_, p, q)
    scale = (gamma_ * a * center**gamma_ + (p - 2.0) * b * center ** (p - 2.0)
             + (q - 2.0) * c * center ** (q - 2.0))
    if len(roots) == 1 or abs(slope_min) <= tangent_tol * scale:
        t_star = roots[0] if roots else center
        v = _fiber_value(t_star, a, b, c, gamma_, p, q, Q)
        return FiberingReport("tangent", t_star, t_star, v, v, s_m, mu_s)
    return FiberingReport("none", s_opt=s_m, mu_at_s_opt=mu_s)
