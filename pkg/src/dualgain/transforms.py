"""Laplace transforms of the ruin probability and of the ruin time.

For a > 0 the transforms are evaluated through the geometric iteration

    rho(s) = sum_k prod_{j<k} J(s/c^j) H(s/c^k),   c = 1 + a,

where H depends linearly on the unknown constant rho(mu).  Every series here
is accumulated as ``A(s) - X*B(s) - Y*C(s)`` so that the unknown constants
can be solved for from the same code path that evaluates the transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .model import (
    Deterministic,
    DomainError,
    Drift,
    DualModelParams,
    NumericalError,
    classify_drift,
    lst_derivative,
)


class PoleError(NumericalError):
    """An argument sits on a (removable) pole of a series term."""


@dataclass(frozen=True)
class SeriesControl:
    tail_tolerance: float = 1e-12
    max_terms: int = 10_000
    singularity_guard: float | None = None  # default 1e-8 * mu * (1 + a)

    def __post_init__(self):
        if not self.tail_tolerance > 0:
            raise ValueError("tail_tolerance must be positive")
        if self.max_terms < 20:
            raise ValueError("max_terms must be at least 20")

    def guard_radius(self, scale: float) -> float:
        return self.singularity_guard if self.singularity_guard is not None else 1e-8 * scale


@dataclass(frozen=True)
class SeriesResult:
    """Coefficients of rho(s) = A - X*B - Y*C together with diagnostics."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    terms: int
    magnitudes: np.ndarray = field(repr=False)


# ---------------------------------------------------------------------------
# interarrival helpers with optional analytic continuation


def _phi(params, z, continued):
    return params.interarrival.lst(z, continued=continued)


def _gap(params, z):
    """(1 - phi(z)) / z."""
    return params.interarrival.lst_gap(z)


def _phi_bound(params, r: float) -> float:
    """sup |phi(w)| over Re(w) >= -r, i.e. phi(-r); inf if it does not exist."""
    spec = params.interarrival
    if r <= 0:
        return 1.0
    if r >= spec.min_rate():
        return math.inf
    return float(np.real(spec.lst(-r, continued=True)))


def _gap_bound(params, r: float) -> float:
    """sup |(1 - phi(w))/w| over Re(w) >= -r, i.e. E[T exp(rT)]."""
    spec = params.interarrival
    if r <= 0:
        return spec.mean()
    if r >= spec.min_rate():
        return math.inf
    if isinstance(spec, Deterministic):
        return spec.d * math.exp(r * spec.d)
    return float(-np.real(lst_derivative(spec, -r)))


# ---------------------------------------------------------------------------
# the geometric iteration


def _series(params: DualModelParams, s, alpha: float, control: SeriesControl, *, X: float = 0.0,
            Y: float = 0.0, mixture: bool = False, continued: bool = False) -> SeriesResult:
    """Accumulate the iteration at the complex points ``s``.

    ``X`` and ``Y`` only enter the stopping rule (the tail bound needs the
    magnitude of H, which depends on them); the returned coefficients do not.
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    a = params.a
    c = 1.0 + a
    p = params.mixture_p if mixture else 1.0
    delta = params.delta if mixture else None
    additive = params.additive
    mu = params.mu if additive else None

    A = np.zeros_like(s)
    B = np.zeros_like(s)
    Cc = np.zeros_like(s)
    P = np.ones_like(s)
    z = s.copy()
    active = np.ones(s.shape, dtype=bool)
    mags = []
    for k in range(control.max_terms):
        w = z + alpha
        phi = _phi(params, w, continued)
        gap = _gap(params, w)
        if additive:
            pole = mu * c - z
            if np.any(np.abs(pole) == 0):
                raise PoleError("pole of J at s = mu(1+a)")
            frac = mu / pole
        if mixture:
            den = delta - z - (1 - p) * delta * phi
            if np.any(den == 0):
                raise PoleError("pole of the mixture denominator")
            h0 = (delta - z) * gap / den
            hX = p * phi * frac * (delta - z) / den
            hY = (1 - p) * phi * delta / den
            J = hX
        elif additive:
            h0 = gap
            hX = phi * frac
            hY = 0.0
            J = hX
        else:
            h0 = gap
            hX = 0.0
            hY = 0.0
            J = phi / c
        A = A + P * h0
        B = B + P * hX
        Cc = Cc + P * hY
        term = np.abs(P * (h0 - X * hX - Y * hY))
        mags.append(term)

        # rigorous bound on the remaining tail, valid once |z| is small
        zr = np.abs(z)
        r_neg = np.maximum(zr - alpha, 0.0)
        bounds = np.full(s.shape, np.inf)
        for i in np.flatnonzero(active):
            pb = _phi_bound(params, r_neg[i])
            gb = _gap_bound(params, r_neg[i])
            if not (np.isfinite(pb) and np.isfinite(gb)):
                continue
            if additive and zr[i] >= mu * a:
                continue
            if mixture:
                dlow = delta * (1 - (1 - p) * pb) - zr[i]
                if dlow <= 0:
                    continue
                fr = mu / (mu * c - zr[i])
                jb = p * pb * fr * (delta + zr[i]) / dlow
                hb = ((delta + zr[i]) * gb + abs(X) * jb + (1 - p) * pb * delta * abs(Y) / dlow)
            elif additive:
                jb = pb * mu / (mu * c - zr[i])
                hb = gb + abs(X) * jb
            else:
                jb = pb / c
                hb = gb
            if jb >= 1:
                continue
            # the next term uses P_{k+1} = P_k J(z_k); bound it and all later ones
            bounds[i] = abs(P[i]) * jb * hb / (1 - jb)
        active &= ~(bounds < control.tail_tolerance)
        if not active.any():
            return SeriesResult(A, B, Cc, k + 1, np.array(mags))
        P = P * J
        z = z / c
    raise NumericalError(f"series did not converge within {control.max_terms} terms")


def _combine(res: SeriesResult, X: float, Y: float = 0.0):
    return res.A - X * res.B - Y * res.C


# ---------------------------------------------------------------------------
# public API


def hj(s, rho_mu: float, params: DualModelParams, control: SeriesControl | None = None, alpha: float = 0.0):
    """(H(s), J(s)) of the one-step relation rho(s) = J(s) rho(s/(1+a)) + H(s).

    With alpha > 0 this is the pair of the ruin-time transform tau(s, alpha),
    and ``rho_mu`` must be tau(mu, alpha).
    """
    control = control or SeriesControl()
    s = complex(s)
    phi = complex(params.phi(s + alpha))
    gap = complex(params.interarrival.lst_gap(s + alpha))
    c = 1.0 + params.a
    if not params.additive:
        return gap, phi / c
    pole = params.mu * c
    if abs(s - pole) < control.guard_radius(pole):
        raise PoleError(f"pole: s is within the guard radius of mu(1+a) = {pole}")
    J = phi * params.mu / (pole - s)
    return gap - J * rho_mu, J


@dataclass(frozen=True)
class RuinTransform:
    params: DualModelParams
    rho_mu: float
    control: SeriesControl = SeriesControl()
    rho_delta: float | None = None
    s1: float | None = None
    rho_s1: float | None = None
    drift: Drift = Drift.Transient

    @classmethod
    def build(cls, params: DualModelParams, control: SeriesControl | None = None) -> "RuinTransform":
        control = control or SeriesControl()
        drift = classify_drift(params)
        if params.mixture_p < 1.0:
            if params.a <= 0:
                raise DomainError("the mixture model requires a > 0")
            X, Y, Z, s1 = _solve_mixture_constants(params, control)
            return cls(params, X, control, Y, s1, Z, drift)
        return cls(params, rho_at_mu(params, control), control, drift=drift)


def rho_at_mu(params: DualModelParams, control: SeriesControl | None = None) -> float:
    """The constant rho(mu) closing the iteration (0 when there is no additive gain)."""
    control = control or SeriesControl()
    if not params.additive:
        return 0.0
    if params.a == 0:
        return _tau_mu_a0(params, 0.0)
    return _closing_constant(params, 0.0, control)


def tau_at_mu(params: DualModelParams, alpha: float, control: SeriesControl | None = None) -> float:
    """tau(mu, alpha), the constant of the ruin-time iteration."""
    control = control or SeriesControl()
    if not params.additive:
        return 0.0
    if params.a == 0:
        return _tau_mu_a0(params, alpha)
    return _closing_constant(params, alpha, control)


def _closing_constant(params: DualModelParams, alpha: float, control: SeriesControl) -> float:
    """X = A(mu)/(1 + B(mu)).  Every later evaluation multiplies the error in X
    by |B(s)|, which is large next to the removable poles, so X is summed with
    a tail tolerance 1000 times tighter than the evaluations."""
    tight = SeriesControl(max(control.tail_tolerance * 1e-3, 1e-300), control.max_terms,
                          control.singularity_guard)
    res = _series(params, params.mu, alpha, tight)
    X = res.A[0].real / (1.0 + res.B[0].real)
    # re-run with the final X so the stopping rule accounts for |X|
    res = _series(params, params.mu, alpha, tight, X=X)
    return float(res.A[0].real / (1.0 + res.B[0].real))


def _a0_denominator(params, s, alpha, continued=False):
    return params.mu - s - params.mu * params.interarrival.lst(s + alpha, continued=continued)


def _a0_root(params: DualModelParams, alpha: float) -> float:
    """Largest nonnegative root of mu - s - mu*phi(s + alpha)."""
    mu = params.mu

    def f(s):
        return float(np.real(_a0_denominator(params, s, alpha, continued=True)))

    if alpha == 0:
        # f(0) = 0; a positive root exists iff the slope at 0 is positive
        if mu * params.interarrival.mean() <= 1.0:
            return 0.0
        lo = 1e-9 * mu
        while f(lo) <= 0:
            lo /= 10
            if lo < 1e-300:
                return 0.0
        return optimize.brentq(f, lo, mu, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return optimize.brentq(f, 0.0, mu, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _tau_mu_a0(params: DualModelParams, alpha: float) -> float:
    s1 = _a0_root(params, alpha)
    return float(np.real(params.interarrival.lst_gap(s1 + alpha)))


def _eval_a0(s, params: DualModelParams, alpha: float, Y: float, continued: bool):
    """Closed form of the a = 0 transform, Y = tau(mu, alpha)."""
    phi = params.interarrival.lst(s + alpha, continued=continued)
    gap = params.interarrival.lst_gap(s + alpha)
    if not params.additive:
        return 1.0 / (s + alpha)
    mu = params.mu
    return ((mu - s) * gap - phi * mu * Y) / (mu - s - mu * phi)


def _guarded(func, s, poles, radius):
    """Evaluate ``func`` on an array, bypassing removable poles.

    Points within ``radius`` of a pole are replaced by a symmetric four-point
    stencil s +- ih, s +- 2ih, which cancels the odd terms and the h^2 term.
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    near = np.zeros(s.shape, dtype=bool)
    scale = np.ones(s.shape)
    for p in poles:
        hit = np.abs(s - p) < radius
        near |= hit
        scale = np.where(hit, abs(p), scale)
    out = np.empty(s.shape, dtype=complex)
    far = ~near
    if far.any():
        out[far] = func(s[far])
    if near.any():
        sn = s[near]
        h = 2e-4 * scale[near]
        f1 = func(sn + 1j * h) + func(sn - 1j * h)
        f2 = func(sn + 2j * h) + func(sn - 2j * h)
        out[near] = (4 * f1 - f2) / 6
    return out


def _pole_list(params: DualModelParams, s, extra=()):
    """Removable poles mu(1+a)^{j+1} (and extra base points times c^j) up to |s|."""
    smax = float(np.max(np.abs(s))) * 1.01 + 1.0
    c = 1.0 + params.a
    out = []
    bases = []
    if params.additive and params.a > 0:
        bases.append(params.mu * c)
    bases.extend(extra)
    for b0 in bases:
        p = b0
        while p <= smax:
            out.append(p)
            p *= c
    return out


def _check_domain(s, continued):
    if not continued and np.any(np.real(np.atleast_1d(s)) <= 0):
        raise DomainError("Re(s) must be positive")


def _shape_out(s, val):
    if np.ndim(s) == 0:
        return complex(val[0])
    return val.reshape(np.shape(s))


def ruin_time_lt(s, alpha: float, rt: RuinTransform, *, continued: bool = False, tau_mu: float | None = None):
    """Double transform tau(s, alpha) of E[exp(-alpha tau_x)] in x.

    ``continued=True`` evaluates the analytic continuation of the same
    expression for Re(s) <= 0 (needed by contour inversion methods).
    """
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    _check_domain(s, continued)
    params = rt.params
    if params.mixture_p < 1.0:
        if alpha != 0:
            raise DomainError("ruin time transform is not available for the mixture model")
        return generalized_ruin_lt(s, rt, continued=continued)
    if tau_mu is None:
        tau_mu = rt.rho_mu if alpha == 0 else tau_at_mu(params, alpha, rt.control)
    arr = np.atleast_1d(np.asarray(s, dtype=complex))
    if params.a == 0:
        if params.additive:
            root = _a0_root(params, alpha)
            poles = [root] if root > 0 else []
        else:
            poles = []
        radius = rt.control.guard_radius(params.mu if params.additive else 1.0)
        val = _guarded(lambda x: _eval_a0(x, params, alpha, tau_mu, continued), arr, poles, radius)
        return _shape_out(s, val)

    def f(x):
        res = _series(params, x, alpha, rt.control, X=tau_mu, continued=continued)
        return _combine(res, tau_mu)

    scale = params.mu * (1 + params.a) if params.additive else 1.0
    val = _guarded(f, arr, _pole_list(params, arr), rt.control.guard_radius(scale))
    return _shape_out(s, val)


def ruin_lt(s, rt: RuinTransform, *, continued: bool = False):
    """Laplace transform rho(s) of the ruin probability R(x)."""
    return ruin_time_lt(s, 0.0, rt, continued=continued)


def series_magnitudes(s: complex, rt: RuinTransform, alpha: float = 0.0) -> np.ndarray:
    """|k-th term| of the iteration at a single point, for convergence diagnostics."""
    X = rt.rho_mu if alpha == 0 else tau_at_mu(rt.params, alpha, rt.control)
    res = _series(rt.params, s, alpha, rt.control, X=X, Y=rt.rho_delta or 0.0,
                  mixture=rt.params.mixture_p < 1.0)
    return res.magnitudes[:, 0]


# ---------------------------------------------------------------------------
# mixture model


def rouche_root(params: DualModelParams, tol: float = 1e-12) -> float:
    """Unique positive root of delta - s - (1-p) delta phi(s)."""
    p, delta = params.mixture_p, params.delta
    if not 0 < p <= 1:
        raise DomainError("mixture_p must lie in (0, 1]")
    if delta is None:
        raise DomainError("delta is required")
    if p == 1.0:
        return float(delta)

    def f(s):
        return float(np.real(delta - s - (1 - p) * delta * params.phi(s)))

    hi = delta * (1 + (1 - p)) + 1
    if not (f(0.0) > 0 and f(hi) < 0):
        raise NumericalError("no sign change located for the mixture root")
    return float(optimize.brentq(f, 0.0, hi, xtol=tol, rtol=4 * np.finfo(float).eps))


def _solve_mixture_constants(params: DualModelParams, control: SeriesControl):
    """Solve for X = rho(mu), Y = rho(delta), Z = rho(s1/(1+a))."""
    if not params.additive:
        raise DomainError("the mixture model needs an additive gain rate mu")
    p, delta, mu = params.mixture_p, params.delta, params.mu
    c = 1.0 + params.a
    s1 = rouche_root(params)
    radius = control.guard_radius(mu * c)

    X = Y = 0.0
    for _ in range(2):  # second pass tightens the stopping rule with |X|, |Y|
        at = np.array([mu, s1 / c, delta], dtype=complex)
        coeffs = [_mixture_coeffs(params, x, control, X, Y, radius, s1) for x in at]
        (A1, B1, C1), (A3, B3, C3), (A2, B2, C2) = coeffs
        phi1 = complex(params.phi(s1)).real
        gap1 = complex(params.interarrival.lst_gap(s1)).real
        k1 = p * phi1 * mu / (mu * c - s1)
        # unknowns (X, Y, Z)
        M = np.array(
            [
                [1 + B1, C1, 0.0],  # X = A(mu) - X B(mu) - Y C(mu)
                [-k1, -1.0, k1],  # analyticity at s1: gap1 + k1 (Z - X) - Y = 0
                [B3, C3, 1.0],  # Z = A(s1/c) - X B(s1/c) - Y C(s1/c)
            ]
        )
        rhs = np.array([A1, -gap1, A3])
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > 1e12:
            raise NumericalError(f"mixture system is singular (condition number {cond:.3e})")
        X, Y, Z = np.linalg.solve(M, rhs)
        # consistency: the solved Y must agree with the series at delta
        Y_series = A2 - X * B2 - Y * C2
        if abs(Y_series - Y) > 1e-8 * max(1.0, abs(Y)):
            raise NumericalError(f"mixture constants inconsistent: rho(delta) {Y} vs series {Y_series}")
    return float(X), float(Y), float(Z), s1


def _mixture_coeffs(params, x, control, X, Y, radius, s1):
    poles = _pole_list(params, np.array([x]), extra=(s1,))

    def part(idx):
        def f(v):
            res = _series(params, v, 0.0, control, X=X, Y=Y, mixture=True)
            return (res.A, res.B, res.C)[idx]
        return f

    out = []
    for idx in range(3):
        v = _guarded(part(idx), np.array([x]), poles, radius)[0]
        out.append(v.real)
    return tuple(out)


def generalized_ruin_lt(s, rt: RuinTransform, *, continued: bool = False):
    """rho(s) for the mixture model (jump D ~ Exp(delta) with probability 1 - p)."""
    params = rt.params
    if params.a <= 0:
        raise DomainError("the mixture model requires a > 0")
    _check_domain(s, continued)
    arr = np.atleast_1d(np.asarray(s, dtype=complex))
    if params.mixture_p == 1.0:
        X = _pure_model_constant(params, rt.control)

        def f(x):
            return _combine(_series(params, x, 0.0, rt.control, X=X, continued=continued), X)

        val = _guarded(f, arr, _pole_list(params, arr), rt.control.guard_radius(params.mu * (1 + params.a)))
        return _shape_out(s, val)
    X, Y, s1 = rt.rho_mu, rt.rho_delta, rt.s1

    def g(x):
        res = _series(params, x, 0.0, rt.control, X=X, Y=Y, mixture=True, continued=continued)
        return _combine(res, X, Y)

    poles = _pole_list(params, arr, extra=(s1,))
    val = _guarded(g, arr, poles, rt.control.guard_radius(params.mu * (1 + params.a)))
    return _shape_out(s, val)


def _pure_model_constant(params, control):
    """rho(mu) for p = 1 from the 1x1 version of the mixture system."""
    res = _series(params, params.mu, 0.0, control)
    M = np.array([[1.0 + res.B[0].real]])
    return float(np.linalg.solve(M, np.array([res.A[0].real]))[0])


def mixture_bracket(s, rt: RuinTransform) -> complex:
    """Numerator of the mixture H at s, which must vanish at the Rouché root."""
    params = rt.params
    p, delta, mu = params.mixture_p, params.delta, params.mu
    c = 1.0 + params.a
    s = complex(s)
    phi = complex(params.phi(s))
    gap = complex(params.interarrival.lst_gap(s))
    rho_next = complex(generalized_ruin_lt(s / c, rt))
    return ((delta - s) * gap + p * phi * mu * (delta - s) / (mu * c - s) * (rho_next - rt.rho_mu)
            - (1 - p) * phi * delta * rt.rho_delta)


__all__ = [
    "PoleError",
    "SeriesControl",
    "RuinTransform",
    "hj",
    "rho_at_mu",
    "tau_at_mu",
    "ruin_lt",
    "ruin_time_lt",
    "rouche_root",
    "generalized_ruin_lt",
    "mixture_bracket",
    "series_magnitudes",
]
