"""Radial grid, quadrature, and the discrete functionals T, Q, A, B.

Fields are radial profiles u(r) sampled on the uniform grid r_i = i*h,
i = 0..n, h = R/n, with a Dirichlet zero at r_n. Integrals over R^N reduce
to s_{N-1} * int_0^R f(r) r^(N-1) dr with s_{N-1} the unit-sphere area.

The kinetic term T = int |grad u|^2 is accumulated from difference
quotients at cell midpoints, which makes it the exact quadratic form of
the flux-form radial Laplacian

    (L u)_i = [rho_{i+1/2}(u_{i+1}-u_i) - rho_{i-1/2}(u_i-u_{i-1})] / (r_i^{N-1} h^2),

rho_{i+1/2} = r_{i+1/2}^{N-1}.  L is self-adjoint in the weighted inner
product <u,v>_w = sum w_i u_i v_i to rounding, and the discrete gradient of
the action functional is exactly the Euler-Lagrange operator; both facts
are tested, not assumed.  The origin node uses the regular limit
(L u)_0 = 2N (u_1 - u_0)/h^2 and carries the half-cell volume weight
w_0 = s_{N-1} (h/2)^N / N, which keeps the origin flux variationally
consistent.
"""
import json
import hashlib
from dataclasses import dataclass, field as dc_field
from math import gamma, pi
from typing import NamedTuple

import numpy as np

from ._kernels import apply_lap, functionals_kernel
from .errors import DomainError, GridMismatchError


def sphere_area(N):
    """Area of the unit (N-1)-sphere: 2 pi^(N/2) / Gamma(N/2)."""
    return 2.0 * pi ** (N / 2.0) / gamma(N / 2.0)


class Functionals(NamedTuple):
    """The four integrals every quotient is built from."""
    T: float
    Q: float
    A: float
    B: float


@dataclass(frozen=True)
class GridSpec:
    """Uniform radial grid with Dirichlet truncation at R."""
    N: int
    R: float
    n: int

    def __post_init__(self):
        if self.N < 3:
            raise DomainError("dimension below 3: radial theory needs N >= 3")
        if not self.R > 0:
            raise DomainError("truncation radius must be positive")
        if self.n < 16:
            raise DomainError("need at least 16 grid intervals")
        object.__setattr__(self, "_cache", {})

    @property
    def h(self):
        return self.R / self.n

    @property
    def r(self):
        return self._arrays()[0]

    @property
    def weights(self):
        return self._arrays()[1]

    @property
    def mid_weights(self):
        return self._arrays()[2]

    @property
    def lap_bands(self):
        """(sub, diag, sup) bands of the radial Laplacian; last row zero."""
        return self._arrays()[3]

    def _arrays(self):
        cache = self._cache
        if "arrays" not in cache:
            N, n, h = self.N, self.n, self.h
            s = sphere_area(N)
            r = np.arange(n + 1) * h
            w = s * r ** (N - 1) * h
            w[0] = s * (h / 2.0) ** N / N
            w[-1] *= 0.5
            rmid = r[:-1] + 0.5 * h
            wmid = s * rmid ** (N - 1) * h
            rho = rmid ** (N - 1)
            sub = np.zeros(n + 1)
            diag = np.zeros(n + 1)
            sup = np.zeros(n + 1)
            i = np.arange(1, n)
            rpow = r[i] ** (N - 1) * h * h
            sub[i] = rho[i - 1] / rpow
            sup[i] = rho[i] / rpow
            diag[i] = -(rho[i] + rho[i - 1]) / rpow
            diag[0] = -2.0 * N / h**2
            sup[0] = 2.0 * N / h**2
            for a in (r, w, wmid, sub, diag, sup):
                a.setflags(write=False)
            cache["arrays"] = (r, w, wmid, (sub, diag, sup))
        return cache["arrays"]

    def compatible(self, other):
        return self.N == other.N and self.R == other.R and self.n == other.n


def make_grid(N, R, n):
    return GridSpec(int(N), float(R), int(n))


@dataclass
class Field:
    """Radial profile on a grid; value at r_n pinned to zero.

    Values may be real or complex (complex only for time evolution).
    Treated as immutable: operations return new fields.
    """
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.n + 1,):
            raise DomainError(f"field needs {self.grid.n + 1} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field contains non-finite values")
        v = v.astype(np.complex128 if np.iscomplexobj(v) else np.float64)
        v[-1] = 0.0
        self.values = v

    @property
    def is_complex(self):
        return np.iscomplexobj(self.values)

    def is_positive(self):
        """Strictly positive on the interior (all nodes before the wall)."""
        return bool(np.all(self.values[:-1].real > 0)) and not self.is_complex

    def scaled(self, t):
        return Field(self.grid, self.values * t)

    def __add__(self, other):
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)


def _check_same_grid(u, v):
    if not u.grid.compatible(v.grid):
        raise GridMismatchError("fields live on different grids")


def gaussian_field(grid, width=1.0, amplitude=1.0):
    """amplitude * exp(-r^2 / (2 width^2)), the standard initial guess."""
    return Field(grid, amplitude * np.exp(-grid.r**2 / (2.0 * width**2)))


def _check_exponents(grid, p, q):
    two_star = 2.0 * grid.N / (grid.N - 2.0)
    for name, e in (("p", p), ("q", q)):
        if not 2.0 < e < two_star:
            raise DomainError(f"exponent {name}={e} outside (2, 2*)=(2, {two_star})")


def functionals(u, p, q):
    """Evaluate (T, Q, A, B) for a real field by weighted quadrature."""
    _check_exponents(u.grid, p, q)
    if u.is_complex:
        raise DomainError("functionals of a complex field: use modulus quantities")
    T, Q, A, B = functionals_kernel(u.values, u.grid.weights, u.grid.mid_weights,
                                    u.grid.h, float(p), float(q))
    return Functionals(T, Q, A, B)


def complex_functionals(psi, p, q):
    """(T, Q, A, B) of a complex field; T from complex difference quotients."""
    _check_exponents(psi.grid, p, q)
    g = psi.grid
    d = np.diff(psi.values) / g.h
    T = float(np.dot(g.mid_weights, (d * d.conj()).real))
    a = np.abs(psi.values)
    Q = float(np.dot(g.weights, a * a))
    A = float(np.dot(g.weights, a ** p))
    B = float(np.dot(g.weights, a ** q))
    return Functionals(T, Q, A, B)


def laplacian(u):
    """Apply the radial Laplacian; returns plain values (Dirichlet row = 0)."""
    sub, diag, sup = u.grid.lap_bands
    return apply_lap(u.values, sub, diag, sup)


def gradients(u, lam, mu, p, q):
    """Discrete Euler-Lagrange operator applied to u.

    result_i = (-L u)_i - lam u_i - mu |u_i|^{p-2} u_i + |u_i|^{q-2} u_i.
    This equals the gradient of the action in the weighted inner product.
    """
    _check_exponents(u.grid, p, q)
    v = u.values
    a = np.abs(v)
    res = -laplacian(u) - lam * v - mu * a ** (p - 2.0) * v + a ** (q - 2.0) * v
    res[-1] = 0.0
    return Field(u.grid, res)


def weighted_norm(u):
    """L2 norm in the weighted inner product."""
    a = np.abs(u.values)
    return float(np.sqrt(np.dot(u.grid.weights, a * a)))


def weighted_dot(u, v):
    """<u, v>_w; conjugates the second argument for complex fields."""
    _check_same_grid(u, v)
    return complex(np.dot(u.grid.weights, u.values * np.conj(v.values)))


def kinetic_form(u, v):
    """The T bilinear form: sum of midpoint flux products."""
    _check_same_grid(u, v)
    g = u.grid
    du = np.diff(u.values) / g.h
    dv = np.diff(v.values) / g.h
    return complex(np.dot(g.mid_weights, du * np.conj(dv)))


def h1_distance(u, v):
    """(T(u-v) + Q(u-v))^(1/2) in the discrete weighted norms."""
    _check_same_grid(u, v)
    d = u.values - v.values
    g = u.grid
    dd = np.diff(d) / g.h
    T = float(np.dot(g.mid_weights, (dd * np.conj(dd)).real))
    Q = float(np.dot(g.weights, (d * np.conj(d)).real))
    return float(np.sqrt(T + Q))


def boundary_mass_fraction(u, window=0.02):
    """Fraction of Q carried by the outermost `window` of the radius."""
    g = u.grid
    k = max(2, int(round(window * g.n)))
    a = np.abs(u.values)
    total = float(np.dot(g.weights, a * a))
    if total == 0:
        return 0.0
    tail = float(np.dot(g.weights[-k:], a[-k:] * a[-k:]))
    return tail / total


def resample(u, sigma):
    """Dilation u_sigma(r) = u(r / sigma) by cubic interpolation.

    Values requested beyond R are extended by zero; the profile should have
    decayed there (checked by callers via boundary_mass_fraction).
    """
    if sigma <= 0:
        raise DomainError("dilation factor must be positive")
    if sigma == 1.0:
        return Field(u.grid, u.values.copy())
    from scipy.interpolate import CubicSpline
    g = u.grid
    spl = CubicSpline(g.r, u.values, bc_type=((1, 0.0), "not-a-knot"))
    rq = g.r / sigma
    out = np.where(rq <= g.R, spl(np.minimum(rq, g.R)), 0.0)
    out[-1] = 0.0
    return Field(g, out)


# ---------------------------------------------------------------------------
# field persistence: plain-text dump + JSON metadata sidecar
# ---------------------------------------------------------------------------

def dump_field(u, path, meta=None):
    """Write "N R n" header then one value per line; metadata to path + '.json'."""
    lines = [f"{u.grid.N} {u.grid.R!r} {u.grid.n}"]
    if u.is_complex:
        raise DomainError("text dump holds real fields only")
    lines += [f"{x!r}" for x in u.values]
    text = "\n".join(lines) + "\n"
    with open(path, "w") as f:
        f.write(text)
    info = dict(meta or {})
    info.setdefault("grid", {"N": u.grid.N, "R": u.grid.R, "n": u.grid.n})
    info["content_hash"] = hashlib.sha256(text.encode()).hexdigest()
    with open(str(path) + ".json", "w") as f:
        json.dump(info, f, indent=2, sort_keys=True)
        f.write("\n")


def load_field(path):
    with open(path) as f:
        head = f.readline().split()
        N, R, n = int(head[0]), float(head[1]), int(head[2])
        vals = np.array([float(tok) for tok in f.read().split()])
    if vals.size != n + 1:
        raise DomainError(f"field dump promises {n + 1} values, found {vals.size}")
    return Field(make_grid(N, R, n), vals)
