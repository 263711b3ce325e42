"""Level-lattice solutions for the pure proportional-gain Poisson model.

Levels L_n = b / (1+a)^n.  Starting in (L_m, L_{m-1}] at distance u above
L_m, the capital drifts down at unit speed; each jump multiplies it by
c = 1 + a.  Measured in "remaining descent" units a jump multiplies the
remaining distance and the jump rate by c, so the j-th jump happens at rate
lambda c^j.  With theta = lambda + q this gives

    gamma_j(u)  discounted probability of exactly j jumps before reaching the
                lower end of the current interval (after j jumps it sits
                j intervals higher),
    omega_m(u)  discounted probability that jump number m happens, which
                lifts the capital above b,
    delta_m(u)  discounted overflow above b at that jump.

All three are entries of exp(G u) for a bidiagonal generator G and have
partial-fraction closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .model import DomainError, LatticeParams, NumericalError

MAX_LEVELS = 512
N_SWITCH = 15
_CANCEL_TOL = 1e-11


@dataclass(frozen=True)
class ExpConvolutionBasis:
    lam: float
    q: float
    a: float
    n_switch: int = N_SWITCH

    @classmethod
    def from_params(cls, params: LatticeParams) -> "ExpConvolutionBasis":
        return cls(params.lam, params.q, params.a)

    @property
    def theta(self) -> float:
        return self.lam + self.q

    def rates(self, n: int) -> np.ndarray:
        return self.theta * (1.0 + self.a) ** np.arange(n)

    def generator(self, m: int, integrator: bool = False) -> np.ndarray:
        """Phases 0..m-1 transient, m absorbing, optional integrator phase m+1."""
        size = m + 2 if integrator else m + 1
        G = np.zeros((size, size))
        c = (1.0 + self.a) ** np.arange(m)
        G[np.arange(m), np.arange(m)] = -self.theta * c
        G[np.arange(m), np.arange(1, m + 1)] = self.lam * c
        if integrator:
            G[m, m + 1] = 1.0
        return G


def _expm_rows(G: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Row 0 of exp(G x) for every x; shape (len(x), size)."""
    return np.array([linalg.expm(G * xi)[0] for xi in x])


def _partial_fractions(n: int, basis: ExpConvolutionBasis):
    """Weights C_i = prod_{j != i, j < n} c_j / (c_j - c_i) and the rates."""
    c = (1.0 + basis.a) ** np.arange(n)
    diff = c[None, :] - c[:, None]
    np.fill_diagonal(diff, 1.0)
    ratio = c[None, :] / diff
    np.fill_diagonal(ratio, 1.0)
    return np.prod(ratio, axis=1), basis.theta * c


def gamma_n(n: int, x, basis: ExpConvolutionBasis):
    """Discounted probability of exactly n jumps during a descent of length x."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise DomainError("x must be nonnegative")
    theta = basis.theta
    if n == 0:
        out = np.exp(-theta * xs)
    else:
        out = None
        if n <= basis.n_switch:
            # (lambda/theta)^n prod_{j<n} c_j sum_i exp(-theta c_i x) / prod_{j!=i} (c_j - c_i)
            w, r = _partial_fractions(n + 1, basis)
            c = (1.0 + basis.a) ** np.arange(n + 1)
            terms = (w * c)[None, :] * np.exp(-r[None, :] * xs[:, None])
            scale = (basis.lam / theta) ** n / c[n]
            val = scale * terms.sum(axis=1)
            err = scale * np.abs(terms).sum(axis=1) * 1e-16 * (n + 1)
            if np.all(val >= -1e-12) and np.all(err <= _CANCEL_TOL * np.maximum(np.abs(val), 1e-300) + 1e-15):
                out = np.maximum(val, 0.0)
        if out is None:
            # phase n is transient here: it decays at theta c^n
            G = basis.generator(n + 1)[: n + 1, : n + 1]
            out = _expm_rows(G, xs)[:, n]
    return float(out[0]) if np.ndim(x) == 0 else out


def q_and_one_convolutions(n: int, x, basis: ExpConvolutionBasis):
    """(1 * h_n)(x) and (Q * h_n)(x), Q(x) = x, h_n the n-jump density.

    1 * h_n is the discounted probability that the n-th jump occurs within a
    descent of length x; Q * h_n integrates it once more.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise DomainError("x must be nonnegative")
    one = qc = None
    if n <= basis.n_switch:
        w, r = _partial_fractions(n, basis)
        scale = (basis.lam / basis.theta) ** n
        e = -np.expm1(-r[None, :] * xs[:, None])  # 1 - exp(-r x)
        t1 = w[None, :] * e
        t2 = w[None, :] * (xs[:, None] - e / r[None, :])
        one = scale * t1.sum(axis=1)
        qc = scale * t2.sum(axis=1)
        err1 = scale * np.abs(t1).sum(axis=1) * 1e-16 * n
        err2 = scale * np.abs(t2).sum(axis=1) * 1e-16 * n
        ok = (np.all(one >= -1e-12) and np.all(qc >= -1e-12)
              and np.all(err1 <= _CANCEL_TOL * np.abs(one) + 1e-15)
              and np.all(err2 <= _CANCEL_TOL * np.abs(qc) + 1e-15))
        if ok:
            one, qc = np.maximum(one, 0.0), np.maximum(qc, 0.0)
        else:
            one = qc = None
    if one is None:
        rows = _expm_rows(basis.generator(n, integrator=True), xs)
        one, qc = rows[:, n], rows[:, n + 1]
    if np.ndim(x) == 0:
        return float(one[0]), float(qc[0])
    return one, qc


def omega_n(n: int, x, basis: ExpConvolutionBasis):
    return q_and_one_convolutions(n, x, basis)[0]


def delta_n(n: int, x, basis: ExpConvolutionBasis):
    """Discounted overflow above b: (1+a)^n (Q * h_n)(x)."""
    qc = q_and_one_convolutions(n, x, basis)[1]
    return (1.0 + basis.a) ** n * qc


# ---------------------------------------------------------------------------
# linear systems


@dataclass(frozen=True)
class LatticeSolution:
    params: LatticeParams
    rho: np.ndarray  # index n = 1..N; rho[0] is undefined (nan)
    mu: np.ndarray  # index n = 0..N; mu[0] = 1, mu[N] = 0
    v: np.ndarray  # index n = 0..N; v[N] = 0
    condition_numbers: dict = field(default_factory=dict)


def _check_size(params: LatticeParams):
    if params.N > MAX_LEVELS:
        raise DomainError(f"N={params.N} exceeds the supported maximum {MAX_LEVELS}")


def _transition_tables(params: LatticeParams):
    """gamma_j(Delta_{n+1}) for j <= n, omega_{n+1} and delta_{n+1}, n = 0..N-1."""
    basis = ExpConvolutionBasis.from_params(params)
    N = params.N
    gam = np.zeros((N, N + 1))  # gam[n, j]
    om = np.zeros(N)
    de = np.zeros(N)
    for n in range(N):
        d = params.width(n + 1)
        for j in range(n + 1):
            gam[n, j] = gamma_n(j, d, basis)
        om[n], qc = q_and_one_convolutions(n + 1, d, basis)
        de[n] = (1.0 + params.a) ** (n + 1) * qc
    return gam, om, de


def _solve(M: np.ndarray, rhs: np.ndarray, label: str):
    lu, piv = linalg.lu_factor(M)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1e14:
        raise NumericalError(f"{label} system is singular (condition number {cond:.3e})")
    return linalg.lu_solve((lu, piv), rhs), float(cond)


def _rho_system(params: LatticeParams, gam):
    """(I - Gamma) rho = Z over rho_1..rho_{N-1}."""
    N = params.N
    M = np.eye(N - 1)
    Z = np.zeros(N - 1)
    for n in range(1, N):
        for j in range(n + 1):
            k = n + 1 - j  # target level
            if k == N:
                Z[n - 1] += gam[n, j]
            else:
                M[n - 1, k - 1] -= gam[n, j]
    return M, Z


def solve_rho(params: LatticeParams, tables=None):
    """rho_1..rho_N (index 0 unused) and the condition number."""
    _check_size(params)
    gam, om, de = tables or _transition_tables(params)
    M, Z = _rho_system(params, gam)
    x, cond = _solve(M, Z, "rho")
    rho = np.concatenate([[np.nan], x, [1.0]])
    return rho, cond


def solve_mu(params: LatticeParams, tables=None):
    """mu_0..mu_N with the boundary values mu_0 = 1 and mu_N = 0."""
    _check_size(params)
    gam, om, de = tables or _transition_tables(params)
    N = params.N
    M, _ = _rho_system(params, gam)
    rhs = om[1:N].copy()  # omega_{n+1}(Delta_{n+1}) for n = 1..N-1
    x, cond = _solve(M, rhs, "mu")
    mu = np.concatenate([[1.0], x, [0.0]])
    return mu, cond


def solve_v(params: LatticeParams, tables=None):
    """v_0..v_N from (I - Psi) V = Delta, with v_N = 0."""
    _check_size(params)
    gam, om, de = tables or _transition_tables(params)
    N = params.N
    M = np.eye(N)
    for n in range(N):
        M[n, 0] -= om[n]
        for j in range(n + 1):
            k = n + 1 - j
            if k < N:
                M[n, k] -= gam[n, j]
    x, cond = _solve(M, de.copy(), "v")
    v = np.concatenate([x, [0.0]])
    return v, cond


def solve_lattice(params: LatticeParams) -> LatticeSolution:
    _check_size(params)
    tables = _transition_tables(params)
    rho, c1 = solve_rho(params, tables)
    mu, c2 = solve_mu(params, tables)
    v, c3 = solve_v(params, tables)
    return LatticeSolution(params, rho, mu, v, {"rho": c1, "mu": c2, "v": c3})


# ---------------------------------------------------------------------------
# evaluation between lattice points


def _locate(x: float, params: LatticeParams):
    m = params.interval_of(x)
    return m, x - params.level(m)


def _eval(x, sol: LatticeSolution, which: str):
    params = sol.params
    basis = ExpConvolutionBasis.from_params(params)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.shape)
    for i, xi in enumerate(xs):
        if xi > params.b:
            if which == "v":
                out[i] = sol.v[0] + xi - params.b
                continue
            raise DomainError(f"x={xi} lies above b")
        if which == "mu" and xi == params.b:
            out[i] = 1.0
            continue
        m, u = _locate(xi, params)
        vals = {"rho": sol.rho, "mu": sol.mu, "v": sol.v}[which]
        total = sum(gamma_n(j, u, basis) * vals[m - j] for j in range(m))
        if which != "rho":
            one, qc = q_and_one_convolutions(m, u, basis)
            if which == "mu":
                total += one
            else:
                total += one * sol.v[0] + (1.0 + params.a) ** m * qc
        out[i] = total
    return float(out[0]) if np.ndim(x) == 0 else out


def rho_eval(x, sol: LatticeSolution):
    """Discounted probability of reaching L_N before exceeding b, x in (L_N, b]."""
    return _eval(x, sol, "rho")


def mu_eval(x, sol: LatticeSolution):
    """Discounted probability of exceeding b before reaching L_N (1 at x = b)."""
    return _eval(x, sol, "mu")


def v_eval(x, sol: LatticeSolution):
    """Expected discounted dividends up to reaching L_N, any x > L_N."""
    return _eval(x, sol, "v")


def dividend_residuals(sol: LatticeSolution) -> np.ndarray:
    """Residuals of the dividend equations at the lattice points.

    Row n: v_n - sum_j gamma_j(Delta_{n+1}) v_{n+1-j} - omega_{n+1}(Delta_{n+1}) v_0
    - delta_{n+1}(Delta_{n+1}), evaluated from the convolution formulas
    directly rather than from the assembled matrix.
    """
    p = sol.params
    basis = ExpConvolutionBasis.from_params(p)
    out = np.empty(p.N)
    for n in range(p.N):
        d = p.width(n + 1)
        total = sum(gamma_n(j, d, basis) * sol.v[n + 1 - j] for j in range(n + 1))
        total += omega_n(n + 1, d, basis) * sol.v[0] + delta_n(n + 1, d, basis)
        out[n] = sol.v[n] - total
    return out


def _v_absorbed(x, sol: LatticeSolution):
    """v_N extended by 0 on [0, L_N], where the process is already absorbed."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(xs.shape)
    alive = xs > sol.params.levels[-1]
    if np.any(alive):
        out[alive] = v_eval(xs[alive], sol)
    return out


def delay_ode_residual(sol: LatticeSolution, x, h: float = 1e-5):
    """v'(x) + (lambda+q) v(x) - lambda * (value just after a jump from x).

    The value after a jump is v((1+a)x) below b and (1+a)x - b + v_0 above.
    v_N is taken as 0 on [0, L_N], so the residual there measures the
    truncation of the lattice.  Uses a central difference, so the result also
    carries O(h^2) error.
    """
    p = sol.params
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs - h < 0) or np.any(xs + h > p.b):
        raise DomainError("x must lie in [h, b - h]")
    dv = (_v_absorbed(xs + h, sol) - _v_absorbed(xs - h, sol)) / (2 * h)
    jumped = _v_absorbed((1 + p.a) * xs, sol)
    res = dv + (p.lam + p.q) * _v_absorbed(xs, sol) - p.lam * jumped
    return float(res[0]) if np.ndim(x) == 0 else res


__all__ = [
    "ExpConvolutionBasis",
    "LatticeSolution",
    "gamma_n",
    "q_and_one_convolutions",
    "omega_n",
    "delta_n",
    "solve_rho",
    "solve_mu",
    "solve_v",
    "solve_lattice",
    "rho_eval",
    "mu_eval",
    "v_eval",
    "delay_ode_residual",
    "dividend_residuals",
]
