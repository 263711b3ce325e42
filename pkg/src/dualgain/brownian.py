"""Proportional gains with a linear Brownian perturbation.

Between gain epochs the capital moves as eta*t + sigma*B(t); at rate lam it
jumps from u to (1+a)u.  On the lattice L_n = b/(1+a)^n the discounted exit
transform rho_N and the barrier-b dividend value v_N reduce to finite linear
systems whose coefficients are integrals of exit-problem identities for
Brownian motion with drift.

Everything is written in the local coordinate of the interval
(L_m, L_{m-1}], z = x - L_m in [0, w_m] with w_m = L_{m-1} - L_m.  A gain from
local z in interval m lands at local (1+a)z in interval m-1, because
(1+a)L_m = L_{m-1}.

The scale function W grows like exp(Phi(q) x), which overflows for small
sigma.  The solver therefore never forms W itself: every identity is used in
a factored form whose exponents are all nonpositive.  Functions of z are
carried as piecewise Chebyshev interpolants (GridFunction) on breakpoints
graded geometrically toward both ends of an interval, where the boundary
layers of width ~ sigma^2/|eta| live.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev
from scipy import fft, linalg

from .model import DomainError, NumericalError

GRADING = 4.0


@dataclass(frozen=True)
class BrownianParams:
    b: float
    N: int
    lam: float
    q: float
    a: float
    eta: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        if not self.q >= 0:
            raise ValueError("q must be nonnegative")
        if not self.a > 0:
            raise ValueError("lattice requires a > 0")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError("N must be an integer >= 2")
        if not self.b > 0:
            raise ValueError("b must be positive")
        object.__setattr__(self, "N", int(self.N))

    @property
    def c(self) -> float:
        return 1.0 + self.a

    @property
    def levels(self) -> np.ndarray:
        return self.b / (1.0 + self.a) ** np.arange(self.N + 1)

    def width(self, m: int) -> float:
        """w_m = L_{m-1} - L_m; m = 0 is the virtual interval above b, of width (1+a) w_1."""
        if m == 0:
            return self.c * self.width(1)
        lv = self.levels
        return float(lv[m - 1] - lv[m])

    def interval_of(self, x: float) -> int:
        if x > self.b:
            return 0
        lv = self.levels
        if x <= lv[-1]:
            raise DomainError(f"x={x} is at or below L_N={lv[-1]}")
        return int(np.argmax(lv < x))

    def family(self) -> "ScaleFamily":
        return ScaleFamily(self.q + self.lam, self.eta, self.sigma)


# ---------------------------------------------------------------------------
# scale functions


@dataclass(frozen=True)
class ScaleFamily:
    """Scale functions of X(t) = eta t + sigma B(t) at killing rate q_eff.

    W(x) = (exp(beta_plus x) - exp(-beta_minus x)) / D with
    D = sqrt(eta^2 + 2 q_eff sigma^2), beta_plus = Phi(q_eff) = (D - eta)/sigma^2
    and beta_minus = (D + eta)/sigma^2.  Z = 1 + q_eff * Wbar.
    """

    q_eff: float
    eta: float
    sigma: float
    D: float = field(init=False)
    beta_plus: float = field(init=False)
    beta_minus: float = field(init=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if not self.q_eff > 0:
            raise DomainError("q_eff must be positive")
        s2 = self.sigma**2
        D = math.sqrt(self.eta**2 + 2 * self.q_eff * s2)
        # the root with the cancelling sign is taken from the product beta+ beta- = 2q/sigma^2
        if self.eta >= 0:
            bp, bm = 2 * self.q_eff / (D + self.eta), (D + self.eta) / s2
        else:
            bp, bm = (D - self.eta) / s2, 2 * self.q_eff / (D - self.eta)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "beta_plus", bp)
        object.__setattr__(self, "beta_minus", bm)

    @property
    def kappa(self) -> float:
        return self.beta_plus + self.beta_minus

    @property
    def phi(self) -> float:
        """Right inverse of the Laplace exponent at q_eff."""
        return self.beta_plus

    @property
    def layer(self) -> float:
        """Width of the boundary layers, 1/max(beta_plus, beta_minus)."""
        return 1.0 / max(self.beta_plus, self.beta_minus)

    def psi(self, theta):
        return self.eta * theta + 0.5 * self.sigma**2 * np.asarray(theta) ** 2

    # plain closed forms; W is evaluated as exp(log W) so it overflows only to inf
    def log_scale_w(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return self.beta_plus * x + np.log(-np.expm1(-self.kappa * np.maximum(x, 0))) - math.log(self.D)

    def scale_w(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            out = np.where(x > 0, np.exp(self.log_scale_w(np.maximum(x, 0))), 0.0)
        return out[()]

    def scale_w_prime(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0)
        with np.errstate(over="ignore"):
            out = np.exp(self.beta_plus * xp) * (self.beta_plus + self.beta_minus * np.exp(-self.kappa * xp)) / self.D
        return np.where(x >= 0, out, 0.0)[()]

    def scale_wbar(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0)
        with np.errstate(over="ignore"):
            out = (np.expm1(self.beta_plus * x) / self.beta_plus + np.expm1(-self.beta_minus * x) / self.beta_minus) / self.D
        return out[()]

    def scale_z(self, x):
        return (1.0 + self.q_eff * np.asarray(self.scale_wbar(x)))[()]

    # factored identities, all exponents nonpositive
    def _den(self, h):
        return -np.expm1(-self.kappa * np.asarray(h, dtype=float))

    def exit_up(self, z, w):
        """W(z)/W(w): reach the top of [0, w] first, before the killing clock."""
        z = np.asarray(z, dtype=float)
        return np.exp(self.beta_plus * (z - w)) * self._den(z) / self._den(w)

    def exit_down(self, z, w):
        """Z(z) - W(z) Z(w)/W(w): reach 0 first, before the killing clock."""
        z = np.asarray(z, dtype=float)
        num = np.exp(-self.beta_minus * z) - np.exp(self.beta_plus * (z - w) - self.beta_minus * w)
        return num / self._den(w)

    def resolvent(self, x, y, alpha, beta):
        """u(x, y) = W(x-alpha)W(beta-y)/W(beta-alpha) - W(x-y) on (alpha, beta)."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        bp, bm, k = self.beta_plus, self.beta_minus, self.kappa
        p, t, d = x - alpha, beta - y, x - y
        h = beta - alpha
        lo = d <= 0
        dl = np.where(lo, d, 0.0)
        dh = np.where(lo, 0.0, d)
        below = np.exp(bp * dl) * self._den(p) * self._den(t)
        above = np.exp(-bm * dh) + np.exp(bp * dh - k * h) - np.exp(bp * dh - k * p) - np.exp(bp * dh - k * t)
        return np.where(lo, below, above) / (self.D * self._den(h))

    def reflected_mu(self, x, y, alpha, b):
        """W(x-alpha)W'(b-y)/W'(b-alpha) - W(x-y): resolvent of X reflected at b, killed below alpha."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        bp, bm, k = self.beta_plus, self.beta_minus, self.kappa
        p, t, d = x - alpha, b - y, x - y
        h = b - alpha
        lo = d <= 0
        dl = np.where(lo, d, 0.0)
        dh = np.where(lo, 0.0, d)
        below = np.exp(bp * dl) * self._den(p) * (bp + bm * np.exp(-k * t))
        above = bp * (np.exp(-bm * dh) - np.exp(bp * dh - k * p)) + bm * (
            np.exp(bp * dh - k * t) - np.exp(bp * dh - k * h))
        return np.where(lo, below, above) / (self.D * (bp + bm * math.exp(-k * h)))

    def eta_dividend(self, h):
        """W(h)/W'(h): discounted dividends of X reflected at b until it falls h below b or is killed."""
        e = math.exp(-self.kappa * h)
        return -math.expm1(-self.kappa * h) / (self.beta_plus + self.beta_minus * e)

    def reflected_exit(self, y, h):
        """Z(y) - q W(h) W(y)/W'(h): exit transform of the reflected process from y in [0, h]."""
        y = np.asarray(y, dtype=float)
        bp, bm = self.beta_plus, self.beta_minus
        r = bm / bp
        B = 1.0 / (1.0 + r * math.exp(-self.kappa * h))
        return (B * (np.exp(-bm * y) + r * np.exp(bp * (y - h) - bm * h)))[()]


def scale_w(family: ScaleFamily, x):
    return family.scale_w(x)


def scale_w_prime(family: ScaleFamily, x):
    return family.scale_w_prime(x)


def scale_z(family: ScaleFamily, x):
    return family.scale_z(x)


def scale_wbar(family: ScaleFamily, x):
    return family.scale_wbar(x)


def resolvent_u(x, y, alpha: float, beta: float, family: ScaleFamily):
    """Resolvent density of X killed on leaving (alpha, beta), at rate q_eff."""
    return family.resolvent(x, y, alpha, beta)[()]


def reflected_resolvent_mu(x, y, alpha: float, b: float, family: ScaleFamily):
    return family.reflected_mu(x, y, alpha, b)[()]


def eta_dividend(family: ScaleFamily, b: float, alpha: float) -> float:
    return family.eta_dividend(b - alpha)


def reflected_exit_lt(x, alpha: float, b: float, family: ScaleFamily):
    x = np.asarray(x, dtype=float)
    if np.any(x <= alpha) or np.any(x > b):
        raise DomainError("reflected exit needs alpha < x <= b")
    return family.reflected_exit(x - alpha, b - alpha)


def xi_n(u, n: int, params: BrownianParams, family: ScaleFamily | None = None):
    """E[exp(-q d_n); down-crossing of L_n first, before a gain], from L_n + u."""
    family = family or params.family()
    return family.exit_down(u, params.width(n))[()]


def omega_first(u, n: int, params: BrownianParams, family: ScaleFamily | None = None):
    """E[exp(-q u_{n-1}); up-crossing of L_{n-1} first, before a gain], from L_n + u."""
    family = family or params.family()
    return family.exit_up(u, params.width(n))[()]


# ---------------------------------------------------------------------------
# piecewise Chebyshev carrier and graded quadrature


def _n_grades(length: float, ell: float) -> int:
    """Number of geometric steps from the layer width ell up to half the length."""
    ratio = length / (2 * ell)
    if ratio <= 1:
        return 1
    return int(math.ceil(math.log(ratio) / math.log(GRADING))) + 1


def _graded_breaks(lo, hi, ell: float, kmax: int) -> np.ndarray:
    """Breakpoints lo, lo+e_0, .., mid, .., hi-e_0, hi with e_k = min(ell*4^k, (hi-lo)/2).

    lo and hi are arrays; every row has the same 2*kmax+1 breaks (zero-length
    pieces are harmless) so that quadrature vectorises over targets.
    """
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    e = np.minimum(ell * GRADING ** np.arange(kmax), (hi - lo) / 2)
    e[..., -1] = ((hi - lo) / 2)[..., 0]
    return np.concatenate([lo, lo + e, hi - e[..., -2::-1], hi], axis=-1)


@lru_cache(maxsize=None)
def _gauss(g: int):
    return np.polynomial.legendre.leggauss(g)


def _graded_rule(lo, hi, ell: float, kmax: int, g: int):
    """Composite Gauss-Legendre nodes and weights on graded pieces of [lo, hi]."""
    br = _graded_breaks(lo, hi, ell, kmax)
    t, wt = _gauss(g)
    mid = (br[..., 1:] + br[..., :-1]) / 2
    half = (br[..., 1:] - br[..., :-1]) / 2
    nodes = mid[..., None] + half[..., None] * t
    weights = half[..., None] * wt
    shape = br.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


@lru_cache(maxsize=None)
def _lobatto(p: int) -> np.ndarray:
    return np.cos(np.pi * np.arange(p + 1) / p)


@dataclass(frozen=True)
class GridFunction:
    """Piecewise Chebyshev interpolant on [0, upper].

    coeffs[i] holds the Chebyshev coefficients of the piece
    [breaks[i], breaks[i+1]] in the variable mapped to [-1, 1].
    """

    breaks: np.ndarray
    coeffs: np.ndarray

    @property
    def upper(self) -> float:
        return float(self.breaks[-1])

    @classmethod
    def sample(cls, f: Callable, upper: float, ell: float, degree: int) -> "GridFunction":
        br = _graded_breaks(0.0, upper, ell, _n_grades(upper, ell))
        t = _lobatto(degree)
        mid = (br[1:] + br[:-1]) / 2
        half = (br[1:] - br[:-1]) / 2
        nodes = mid[:, None] + half[:, None] * t
        vals = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
        c = fft.dct(vals, type=1, axis=1) / degree
        c[:, 0] /= 2
        c[:, -1] /= 2
        return cls(br, c)

    @classmethod
    def constant(cls, value: float, upper: float) -> "GridFunction":
        return cls(np.array([0.0, upper]), np.array([[value]]))

    @classmethod
    def identity(cls, upper: float) -> "GridFunction":
        return cls(np.array([0.0, upper]), np.array([[upper / 2, upper / 2]]))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.clip(x.ravel(), 0.0, self.upper)
        br = self.breaks
        idx = np.clip(np.searchsorted(br, flat, side="right") - 1, 0, br.size - 2)
        lo, hi = br[idx], br[idx + 1]
        width = np.where(hi > lo, hi - lo, 1.0)
        t = np.clip(2 * (flat - lo) / width - 1, -1.0, 1.0)
        out = chebyshev.chebval(t, self.coeffs[idx].T, tensor=False)
        return out.reshape(x.shape)[()]

    def tail_size(self) -> float:
        """Largest trailing coefficient relative to the piece scale, a resolution indicator."""
        scale = np.maximum(np.abs(self.coeffs).max(axis=1), 1e-300)
        return float(np.max(np.abs(self.coeffs[:, -2:]).max(axis=1) / np.maximum(scale, 1.0)))


# ---------------------------------------------------------------------------
# controls and the integral operator


@dataclass(frozen=True)
class BrownianControl:
    degree: int = 24
    nodes: int = 20
    verify: bool = True
    tolerance: float = 1e-7

    def __post_init__(self):
        if self.degree < 4 or self.nodes < 4:
            raise ValueError("degree and nodes must be at least 4")

    def refined(self) -> "BrownianControl":
        return BrownianControl(self.degree + 12, 2 * self.nodes, False, self.tolerance)


class _Ops:
    """Quadrature of lam * int u(z, y) F(y) dy on an interval with graded pieces."""

    def __init__(self, params: BrownianParams, family: ScaleFamily, control: BrownianControl):
        self.params, self.family, self.control = params, family, control
        self.ell = family.layer
        self.kmax = _n_grades(params.width(1) + params.width(2) + params.width(0), self.ell)

    def rule(self, lo, hi):
        return _graded_rule(lo, hi, self.ell, self.kmax, self.control.nodes)

    def resolvent_integral(self, H: float, z, lo: float, hi: float, F: Callable):
        """lam * int_lo^hi u_{0,H}(z, y) F(y) dy for each z."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        s = np.clip(z, lo, hi)
        n1, w1 = self.rule(np.full_like(z, lo), s)
        n2, w2 = self.rule(s, np.full_like(z, hi))
        y = np.concatenate([n1, n2], axis=-1)
        w = np.concatenate([w1, w2], axis=-1)
        u = self.family.resolvent(z[:, None], y, 0.0, H)
        return self.params.lam * np.sum(u * F(y) * w, axis=-1)

    def apply_k(self, m: int, G: Callable) -> GridFunction:
        """(K_m G)(z) = lam * int_0^{w_m} u_m(z, y) G((1+a) y) dy, sampled on interval m."""
        w = self.params.width(m)
        c = self.params.c

        def f(z):
            return self.resolvent_integral(w, z, 0.0, w, lambda y: G(c * y))

        return GridFunction.sample(f, w, self.ell, self.control.degree)

    def sample(self, f: Callable, m: int) -> GridFunction:
        return GridFunction.sample(f, self.params.width(m), self.ell, self.control.degree)


# ---------------------------------------------------------------------------
# families


@dataclass
class BrownianFamilies:
    """r[m, k], omega[m, k], T[m] and vJ[m] as functions of the local coordinate.

    r[m, k]: reach L_{m-k} from above after exactly k gains (k = 0..m-1).
    omega[m, k]: reach L_{m-k} from below by diffusion after k-1 gains (k = 1..m).
    T[m]: jump above b after m gains before touching any level.
    vJ[m]: the discounted overflow of that jump.  Index 0 is the region above b.
    """

    params: BrownianParams
    family: ScaleFamily
    control: BrownianControl
    r: dict = field(default_factory=dict)
    omega: dict = field(default_factory=dict)
    T: dict = field(default_factory=dict)
    vJ: dict = field(default_factory=dict)


def build_r_family(params: BrownianParams, control: BrownianControl | None = None, ops: _Ops | None = None):
    control = control or BrownianControl()
    ops = ops or _Ops(params, params.family(), control)
    fam = ops.family
    r = {}
    for m in range(1, params.N + 1):
        w = params.width(m)
        r[m, 0] = ops.sample(lambda z, w=w: fam.exit_down(z, w), m)
        for k in range(1, m):
            r[m, k] = ops.apply_k(m, r[m - 1, k - 1])
    return r


def build_omega_family(params: BrownianParams, control: BrownianControl | None = None, ops: _Ops | None = None):
    control = control or BrownianControl()
    ops = ops or _Ops(params, params.family(), control)
    fam = ops.family
    om = {}
    for m in range(1, params.N + 1):
        w = params.width(m)
        om[m, 1] = ops.sample(lambda z, w=w: fam.exit_up(z, w), m)
        for k in range(2, m + 1):
            om[m, k] = ops.apply_k(m, om[m - 1, k - 1])
    return om


def build_vj_t_family(params: BrownianParams, control: BrownianControl | None = None, ops: _Ops | None = None):
    control = control or BrownianControl()
    ops = ops or _Ops(params, params.family(), control)
    w0 = params.width(0)
    T = {0: GridFunction.constant(1.0, w0)}
    vJ = {0: GridFunction.identity(w0)}
    for m in range(1, params.N + 1):
        T[m] = ops.apply_k(m, T[m - 1])
        vJ[m] = ops.apply_k(m, vJ[m - 1])
    return vJ, T


def build_families(params: BrownianParams, control: BrownianControl | None = None) -> BrownianFamilies:
    control = control or BrownianControl()
    if not params.lam > 0:
        raise DomainError("the lattice families need lambda > 0")
    ops = _Ops(params, params.family(), control)
    out = BrownianFamilies(params, ops.family, control)
    out.r = build_r_family(params, control, ops)
    out.omega = build_omega_family(params, control, ops)
    out.vJ, out.T = build_vj_t_family(params, control, ops)
    return out


def _value_basis(fams: BrownianFamilies, m: int, dividends: bool):
    """Val_m = sum_j coef_j(z) X_j + const(z) on interval m, as ([(j, fn)], const or None)."""
    if m == 0:
        return ([(0, fams.T[0])], fams.vJ[0]) if dividends else ([], None)
    terms = [(m - k, fams.r[m, k]) for k in range(m)]
    terms += [(m - k, fams.omega[m, k]) for k in range(1, m + 1) if dividends or m - k > 0]
    if dividends:
        terms.append((0, fams.T[m]))
        return terms, fams.vJ[m]
    return terms, None


# ---------------------------------------------------------------------------
# level systems


@dataclass
class BrownianSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    solution: np.ndarray
    condition: float

    def residuals(self) -> np.ndarray:
        return self.matrix @ self.solution - self.rhs


@dataclass
class BrownianSolution:
    params: BrownianParams
    families: BrownianFamilies
    rho: np.ndarray  # rho_0..rho_N
    v: np.ndarray  # v_0..v_N
    rho_system: BrownianSystem
    v_system: BrownianSystem
    refinement_change: float | None = None


def _assemble(fams: BrownianFamilies, ops: _Ops, dividends: bool) -> BrownianSystem:
    p, fam = fams.params, fams.family
    N, c = p.N, p.c
    A = np.zeros((N + 1, N + 1))
    rhs = np.zeros(N + 1)
    for n in range(1, N):
        wl, wu = p.width(n + 1), p.width(n)
        H = wl + wu
        A[n, n] += 1.0
        A[n, n + 1] -= float(fam.exit_down(wl, H))
        A[n, n - 1] -= float(fam.exit_up(wl, H))
        for part, m, lo, hi, shift in ((0, n, 0.0, wl, 0.0), (1, n - 1, wl, H, wl)):
            terms, const = _value_basis(fams, m, dividends)
            for j, fn in terms:
                A[n, j] -= ops.resolvent_integral(H, wl, lo, hi, lambda y, fn=fn, s=shift: fn(c * (y - s)))[0]
            if const is not None:
                rhs[n] += ops.resolvent_integral(H, wl, lo, hi, lambda y, s=shift: const(c * (y - s)))[0]
    A[N, N] = 1.0
    A[0, 0] = 1.0
    if dividends:
        h = p.width(1)
        y, w = ops.rule(np.array([0.0]), np.array([h]))
        mu = fam.reflected_mu(h, y, 0.0, h) * w * p.lam
        A[0, 0] -= float(np.sum(mu))
        A[0, 1] -= float(fam.reflected_exit(h, h))
        rhs[0] = fam.eta_dividend(h) + float(np.sum(mu * c * y))
    else:
        rhs[N] = 1.0
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > 1e14:
        raise NumericalError(f"level system is singular (condition {cond:.3g})")
    X = linalg.lu_solve(linalg.lu_factor(A), rhs)
    return BrownianSystem(A, rhs, X, cond)


def _solve_once(params: BrownianParams, control: BrownianControl) -> BrownianSolution:
    fams = build_families(params, control)
    ops = _Ops(params, fams.family, control)
    rs = _assemble(fams, ops, False)
    vs = _assemble(fams, ops, True)
    return BrownianSolution(params, fams, rs.solution, vs.solution, rs, vs)


def solve_brownian(params: BrownianParams, control: BrownianControl | None = None) -> BrownianSolution:
    """Solve both level systems; with control.verify, repeat on a refined grid and compare."""
    control = control or BrownianControl()
    sol = _solve_once(params, control)
    if control.verify:
        fine = _solve_once(params, control.refined())
        scale = np.maximum(1.0, np.abs(np.concatenate([fine.rho, fine.v])))
        change = float(np.max(np.abs(np.concatenate([sol.rho - fine.rho, sol.v - fine.v])) / scale))
        if change > control.tolerance:
            raise NumericalError(
                f"level values changed by {change:.3g} under refinement; increase degree or nodes")
        sol.refinement_change = change
    return sol


def solve_brownian_rho(params: BrownianParams, control: BrownianControl | None = None) -> np.ndarray:
    return solve_brownian(params, control).rho


def solve_brownian_v(params: BrownianParams, control: BrownianControl | None = None) -> np.ndarray:
    return solve_brownian(params, control).v


def _evaluate(x: float, sol: BrownianSolution, dividends: bool) -> float:
    p = sol.params
    X = sol.v if dividends else sol.rho
    if x > p.b:
        if dividends:
            return float(X[0] + x - p.b)
        raise DomainError("rho is defined on (L_N, b]")
    lv = p.levels
    hit = np.flatnonzero(np.isclose(lv, x, rtol=0, atol=1e-14 * p.b))
    if hit.size:
        return float(X[hit[0]])
    m = p.interval_of(x)
    z = x - lv[m]
    terms, const = _value_basis(sol.families, m, dividends)
    val = sum(float(fn(z)) * X[j] for j, fn in terms)
    if const is not None:
        val += float(const(z))
    return val


def rho_eval_brownian(x: float, sol: BrownianSolution) -> float:
    """E_x[exp(-q d_N); d_N < u_0] for L_N < x <= b."""
    return _evaluate(x, sol, False)


def v_eval_brownian(x: float, sol: BrownianSolution) -> float:
    """Expected discounted dividends until L_N is reached, for x > L_N."""
    return _evaluate(x, sol, True)


# ---------------------------------------------------------------------------
# coefficient route: signed sums of W-convolution chains


class CoeffTable:
    """r, omega, v^J and T as coefficient sums over convolution chains.

    E_j = W * W_c * ... * W_{c^j} (j+1 factors, W_s(x) = W(s x)) and, for a
    base function g living k intervals up, the tail chain
    E_{k-1} * g_{c^k}.  Applying the gain-and-kill operator to
    sum_j alpha_j E_j + beta tail_k gives
      alpha'_0 = lam/W(w) [sum_j alpha_j c^j E_{j+1}(w) + beta c^k tail_{k+1}(w)],
      alpha'_{j+1} = -lam c^j alpha_j,   beta' = -lam c^k beta.
    The chains are formed with the plain W, so this route is limited to
    moderate Phi(q_eff) * w; it serves as an independent cross-check.
    """

    def __init__(self, params: BrownianParams, control: BrownianControl | None = None):
        self.params = params
        self.control = control or BrownianControl(verify=False)
        self.family = params.family()
        self.ops = _Ops(params, self.family, self.control)
        if self.family.beta_plus * params.width(0) > 300:
            raise DomainError("coefficient route overflows; use the resolvent route")
        self._chains: dict = {}
        self.coeffs: dict = {}

    def _conv(self, m: int, F: Callable) -> GridFunction:
        """(W * F_c)(z) = int_0^z W(z - y) F(c y) dy on interval m."""
        c, fam, ops = self.params.c, self.family, self.ops

        def f(z):
            z = np.atleast_1d(z)
            y, w = ops.rule(np.zeros_like(z), z)
            return np.sum(fam.scale_w(z[:, None] - y) * F(c * y) * w, axis=-1)

        return ops.sample(f, m)

    def chain(self, j: int, m: int) -> GridFunction:
        """E_j on [0, w_m]."""
        key = ("E", j, m)
        if key not in self._chains:
            if j == 0:
                self._chains[key] = self.ops.sample(self.family.scale_w, m)
            else:
                prev = self.chain(j - 1, m - 1) if m > 0 else self._chain_above(j - 1)
                g = self._conv(m, prev)
                self._chains[key] = GridFunction(g.breaks, g.coeffs / self.params.c ** (j - 1))
        return self._chains[key]

    def _chain_above(self, j):
        raise DomainError("chains are only needed on intervals 0..N")

    def tail(self, base: str, k: int, m: int) -> GridFunction:
        """E_{k-1} * g_{c^k} on [0, w_m], where g = base lives on interval m-k."""
        key = (base, k, m)
        if key not in self._chains:
            if k == 0:
                self._chains[key] = self._base(base, m)
            else:
                g = self._conv(m, self.tail(base, k - 1, m - 1))
                self._chains[key] = GridFunction(g.breaks, g.coeffs / self.params.c ** (k - 1))
        return self._chains[key]

    def _base(self, base: str, m: int) -> GridFunction:
        w = self.params.width(m)
        fam = self.family
        if base == "xi":
            return self.ops.sample(lambda z: fam.exit_down(z, w), m)
        if base == "Omega":
            return self.ops.sample(lambda z: fam.exit_up(z, w), m)
        if base == "one":
            return GridFunction.constant(1.0, w)
        if base == "Q":
            return GridFunction.identity(w)
        raise ValueError(base)

    def _step(self, m: int, rep):
        """Coefficients on interval m of K_m applied to rep = (alphas, beta, k, base) on m-1."""
        alphas, beta, k, base = rep
        lam, c = self.params.lam, self.params.c
        w = self.params.width(m)
        acc = sum(a * c**j * float(self.chain(j + 1, m)(w)) for j, a in enumerate(alphas))
        acc += beta * c**k * float(self.tail(base, k + 1, m)(w))
        new = [lam * acc / float(self.family.scale_w(w))]
        new += [-lam * c**j * a for j, a in enumerate(alphas)]
        return new, -lam * c**k * beta, k + 1, base

    def representation(self, kind: str, m: int, k: int = 0):
        """Coefficients of r[m,k], omega[m,k], T[m] or vJ[m] (kind in r/omega/T/vJ)."""
        key = (kind, m, k)
        if key in self.coeffs:
            return self.coeffs[key]
        if kind == "r":
            rep = ([], 1.0, 0, "xi") if k == 0 else self._step(m, self.representation("r", m - 1, k - 1))
        elif kind == "omega":
            rep = ([], 1.0, 0, "Omega") if k == 1 else self._step(m, self.representation("omega", m - 1, k - 1))
        elif kind in ("T", "vJ"):
            base = "one" if kind == "T" else "Q"
            rep = ([], 1.0, 0, base) if m == 0 else self._step(m, self.representation(kind, m - 1))
        else:
            raise ValueError(kind)
        self.coeffs[key] = rep
        return rep

    def evaluate(self, kind: str, m: int, z, k: int = 0):
        alphas, beta, kk, base = self.representation(kind, m, k)
        z = np.asarray(z, dtype=float)
        out = sum(a * self.chain(j, m)(z) for j, a in enumerate(alphas))
        return (out + beta * self.tail(base, kk, m)(z))[()]


__all__ = [
    "BrownianParams",
    "ScaleFamily",
    "GridFunction",
    "BrownianControl",
    "BrownianFamilies",
    "BrownianSolution",
    "BrownianSystem",
    "CoeffTable",
    "scale_w",
    "scale_w_prime",
    "scale_z",
    "scale_wbar",
    "resolvent_u",
    "reflected_resolvent_mu",
    "eta_dividend",
    "reflected_exit_lt",
    "xi_n",
    "omega_first",
    "build_r_family",
    "build_omega_family",
    "build_vj_t_family",
    "build_families",
    "solve_brownian",
    "solve_brownian_rho",
    "solve_brownian_v",
    "rho_eval_brownian",
    "v_eval_brownian",
]
