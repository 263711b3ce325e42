"""Named cross-validation checks run by ``dualgain compare``.

Each check takes a Scenario and returns a list of Row.  A row compares a
computed ``value`` with a ``reference`` and records the error in the row's
unit: "abs" and "rel" errors are compared with the tolerance directly,
"sigma" rows hold the Monte Carlo distance in standard errors after the
censoring bound and any discretisation allowance are removed, and "s" rows
are wall-clock times.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .brownian import (
    CoeffTable,
    build_families,
    rho_eval_brownian,
    solve_brownian,
    v_eval_brownian,
)
from .inversion import ruin_probability, ruin_time_transform
from .lattice import (
    delay_ode_residual,
    dividend_residuals,
    rho_eval,
    solve_lattice,
    v_eval,
)
from .mc import MCEstimate, euler_allowance, simulate_brownian_lattice, simulate_lattice, simulate_ruin
from .model import Drift, LatticeParams, NumericalError, classify_drift
from .scenario import Scenario, ScenarioError
from .transforms import (
    RuinTransform,
    generalized_ruin_lt,
    hj,
    mixture_bracket,
    rouche_root,
    ruin_lt,
    ruin_time_lt,
    tau_at_mu,
)

COLUMNS = ("check", "quantity", "x", "value", "reference", "stderr", "error", "tolerance", "unit",
           "passed", "note")


@dataclass(frozen=True)
class Row:
    check: str
    quantity: str
    x: float | None
    value: float
    reference: float | None
    stderr: float | None
    error: float
    tolerance: float
    unit: str
    passed: bool
    note: str = ""

    def as_tuple(self):
        return tuple(getattr(self, c) for c in COLUMNS)


def _abs_row(check, quantity, value, reference, tol, x=None, note="", unit="abs"):
    err = abs(value - reference) if reference is not None else abs(value)
    if unit == "rel":
        err = err / max(abs(reference), 1e-300)
    return Row(check, quantity, x, float(np.real(value)), None if reference is None else float(np.real(reference)),
               None, float(err), float(tol), unit, bool(err <= tol), note)


def _mc_row(check, quantity, x, value, est: MCEstimate, k: float, allowance: float = 0.0):
    dist = est.distance(value, allowance)
    note = f"censored={est.n_censored} censor_bound={est.censor_bound:.3g}"
    if allowance:
        note += f" allowance={allowance:.3g}"
    return Row(check, quantity, x, float(value), est.mean, est.stderr, dist, k, "sigma",
               est.agrees(value, k, allowance), note)


def _time_row(check, seconds, limit):
    return Row(check, "runtime", None, seconds, None, None, seconds, limit, "s", seconds <= limit)


def _k(scn: Scenario) -> float:
    return float(scn.compare.get("sigma_multiple", 3.0))


# ---------------------------------------------------------------------------
# transforms


def reference_series(params, s: complex, alpha: float = 0.0, *, tol: float = 1e-18,
                     max_terms: int = 100_000) -> complex:
    """tau(s, alpha) by plain term-by-term iteration of the one-step relation.

    This route shares only (H, J) with the transform engine: the constant
    tau(mu, alpha) is closed from the same loop, and there is no pole guard or
    tail bound.  Used as an independent check on the engine.
    """
    c = 1.0 + params.a

    def sums(z0):
        A = B = 0j
        P = 1 + 0j
        z = complex(z0)
        for k in range(max_terms):
            H0, J = hj(z, 0.0, params, alpha=alpha)
            A += P * H0
            B += P * J
            if k > 5 and abs(P) * (abs(H0) + abs(J)) < tol:
                break
            P *= J
            z /= c
        else:
            raise NumericalError("reference series did not converge")
        return A, B

    A_mu, B_mu = sums(params.mu)
    X = (A_mu / (1 + B_mu)).real
    A, B = sums(s)
    return A - X * B


def check_fe_residual(scn: Scenario):
    params = scn.require("model")
    t0 = time.perf_counter()
    rt = RuinTransform.build(params, scn.series)
    c = 1.0 + params.a
    alpha = scn.alpha or 1.0
    tau_mu = tau_at_mu(params, alpha, scn.series)
    s = scn.s_grid()
    rho_s, rho_c = ruin_lt(s, rt), ruin_lt(s / c, rt)
    tau_s = ruin_time_lt(s, alpha, rt, tau_mu=tau_mu)
    tau_c = ruin_time_lt(s / c, alpha, rt, tau_mu=tau_mu)
    res_rho, res_tau = [], []
    for i, si in enumerate(s):
        H, J = hj(si, rt.rho_mu, params, scn.series)
        res_rho.append(abs(rho_s[i] - J * rho_c[i] - H))
        H, J = hj(si, tau_mu, params, scn.series, alpha=alpha)
        res_tau.append(abs(tau_s[i] - J * tau_c[i] - H))
    elapsed = time.perf_counter() - t0
    note = f"{s.size} points"
    return [
        _abs_row("fe_residual", "rho_residual_max", max(res_rho), 0.0, 1e-10, note=note),
        _abs_row("fe_residual", f"tau_residual_max(alpha={alpha:g})", max(res_tau), 0.0, 1e-10, note=note),
        _time_row("fe_residual", elapsed, 1.0),
    ]


def check_pole_guard(scn: Scenario):
    params = scn.require("model")
    if not params.additive or params.a <= 0:
        raise ScenarioError("pole_guard needs a > 0 and an additive gain rate mu")
    rt = RuinTransform.build(params, scn.series)
    c = 1.0 + params.a
    rows = []
    for k in (1, 2):
        pole = params.mu * c**k
        guarded = complex(ruin_lt(pole, rt)).real
        lo = complex(ruin_lt(pole * (1 - 1e-4), rt)).real
        hi = complex(ruin_lt(pole * (1 + 1e-4), rt)).real
        note = f"rho(s(1-1e-4))={lo:.17g} rho(s(1+1e-4))={hi:.17g}"
        rows.append(_abs_row("pole_guard", f"guarded_vs_offpole_mean(mu*c^{k})", guarded, 0.5 * (lo + hi),
                             1e-6, x=pole, note=note))
    return rows


def check_tau_consistency(scn: Scenario):
    params = scn.require("model")
    rt = RuinTransform.build(params, scn.series)
    s = scn.s_grid()
    tau0 = ruin_time_lt(s, 0.0, rt, tau_mu=tau_at_mu(params, 0.0, scn.series))
    ref = np.array([reference_series(params, si) for si in s])
    err = np.abs(tau0 - ref)
    i = int(np.argmax(err))
    return [Row("tau_consistency", "tau(s,0)_vs_rho(s)_max", None, float(abs(tau0[i])), float(abs(ref[i])), None,
                float(err[i]), 1e-12, "abs", bool(err[i] <= 1e-12),
                f"{s.size} points; rho(s) by direct iteration; worst at s={s[i]:.6g}")]


def check_mixture_reduction(scn: Scenario):
    params = scn.require("model")
    if params.delta is None:
        raise ScenarioError("mixture_reduction needs model.delta")
    pure = replace(params, mixture_p=1.0)
    rt = RuinTransform.build(pure, scn.series)
    s = scn.s_grid()
    diff = np.max(np.abs(generalized_ruin_lt(s, rt) - ruin_lt(s, rt)))
    rows = [_abs_row("mixture_reduction", "generalized_vs_ruin_lt_max(p=1)", diff, 0.0, 1e-10)]
    p = float(scn.compare.get("mixture_p", 0.5))
    mixed = replace(params, mixture_p=p)
    rtm = RuinTransform.build(mixed, scn.series)
    s1 = rouche_root(mixed)
    residual = abs(mixed.delta - s1 - (1 - p) * mixed.delta * complex(mixed.phi(s1)).real)
    rows.append(_abs_row("mixture_reduction", f"rouche_residual(p={p:g})", residual, 0.0, 1e-10, x=s1))
    rows.append(_abs_row("mixture_reduction", f"analyticity_bracket_at_s1(p={p:g})",
                         abs(mixture_bracket(s1, rtm)), 0.0, 1e-9, x=s1))
    return rows


# ---------------------------------------------------------------------------
# ruin probability and ruin time against Monte Carlo


def check_ruin_prob_mc(scn: Scenario):
    params = scn.require("model")
    t0 = time.perf_counter()
    rt = RuinTransform.build(params, scn.series)
    xs = scn.x_grid([0.5, 1.0, 2.0])
    res = ruin_probability(xs, rt, scn.inversion, detail=True)
    rows = []
    for x, r in zip(xs, res):
        est = simulate_ruin(params, float(x), 0.0, scn.mc)
        rows.append(_mc_row("ruin_prob_mc", "R(x)", float(x), r.value, est, _k(scn)))
    rows.append(_time_row("ruin_prob_mc", time.perf_counter() - t0, 120.0))
    return rows


def check_ruin_time_mc(scn: Scenario):
    params = scn.require("model")
    rt = RuinTransform.build(params, scn.series)
    alpha = scn.alpha
    xs = scn.x_grid([0.5, 1.0, 2.0])
    vals = ruin_time_transform(xs, alpha, rt, scn.inversion)
    return [_mc_row("ruin_time_mc", f"E[exp(-{alpha:g} tau)]", float(x), v,
                    simulate_ruin(params, float(x), alpha, scn.mc), _k(scn)) for x, v in zip(xs, vals)]


def lundberg_exponent(params) -> float:
    """Positive root zeta of phi(-zeta) mu / (mu + zeta) = 1 (a = 0, transient case)."""
    spec, mu = params.interarrival, params.mu

    def f(z):
        return float(np.real(spec.lst(-z, continued=True))) * mu / (mu + z) - 1.0

    hi = spec.min_rate() if np.isfinite(spec.min_rate()) else 1.0
    # f < 0 just right of 0 and f -> +inf at the first pole of phi(-z)
    lo = 1e-9 * hi
    if not f(lo) < 0:
        raise NumericalError("no Lundberg exponent: f is nonnegative near 0")
    top = hi * (1 - 1e-12)
    while not np.isfinite(spec.min_rate()) and f(top) < 0:
        top *= 2
    return float(optimize.brentq(f, lo, top, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def check_classical_a0(scn: Scenario):
    params = scn.require("model")
    if params.a != 0 or params.mixture_p < 1 or not params.additive:
        raise ScenarioError("classical_a0 needs a = 0, mixture_p = 1 and an additive gain rate mu")
    rt = RuinTransform.build(params, scn.series)
    xs = scn.x_grid([0.5, 1.0, 2.0])
    R = ruin_probability(xs, rt, scn.inversion)
    drift = classify_drift(params)
    rows = []
    if drift is Drift.CertainRuin:
        for x, r in zip(xs, R):
            rows.append(_abs_row("classical_a0", "R(x)_certain_ruin", r, 1.0, 1e-3, x=float(x)))
        return rows
    if drift is not Drift.Transient:
        raise ScenarioError("classical_a0 is undefined in the critical case")
    zeta = lundberg_exponent(params)
    resid = abs(float(np.real(params.interarrival.lst(-zeta, continued=True))) * params.mu / (params.mu + zeta) - 1)
    rows.append(_abs_row("classical_a0", "lundberg_residual", resid, 0.0, 1e-12, x=zeta, note=f"zeta={zeta:.17g}"))
    for x, r in zip(xs, R):
        closed = math.exp(-zeta * x)
        rows.append(_abs_row("classical_a0", "R(x)_vs_exp(-zeta x)", r, closed, 1e-4, x=float(x)))
        est = simulate_ruin(params, float(x), 0.0, scn.mc)
        rows.append(_mc_row("classical_a0", "exp(-zeta x)_vs_mc", float(x), closed, est, _k(scn)))
    return rows


# ---------------------------------------------------------------------------
# lattice


def check_lattice_complementarity(scn: Scenario):
    lp = scn.require("lattice")
    if lp.q != 0:
        raise ScenarioError("lattice_complementarity needs q = 0")
    sol = solve_lattice(lp)
    n = np.arange(1, lp.N)
    err = np.abs(sol.rho[n] + sol.mu[n] - 1.0)
    i = int(np.argmax(err))
    return [Row("lattice_complementarity", "max|rho_n+mu_n-1|", None, float(sol.rho[n[i]] + sol.mu[n[i]]), 1.0,
                None, float(err[i]), 1e-8, "abs", bool(err[i] <= 1e-8), f"N={lp.N}, worst n={n[i]}")]


class _SimCache:
    def __init__(self, fn: Callable):
        self.fn, self.store = fn, {}

    def __call__(self, x: float):
        if x not in self.store:
            self.store[x] = self.fn(x)
        return self.store[x]


def check_lattice_mc(scn: Scenario):
    lp = scn.require("lattice")
    sol = solve_lattice(lp)
    sim = _SimCache(lambda x: simulate_lattice(lp, x, scn.mc))
    k = _k(scn)
    rows = []
    for n in scn.compare.get("rho_levels", [3]):
        x = lp.level(n)
        rows.append(_mc_row("lattice_mc", f"rho_{n}", x, sol.rho[n], sim(x)[0], k))
    for n in scn.compare.get("mu_levels", [2]):
        x = lp.level(n)
        rows.append(_mc_row("lattice_mc", f"mu_{n}", x, sol.mu[n], sim(x)[1], k))
    for x in scn.compare.get("interior", [0.5, 1.3]):
        rows.append(_mc_row("lattice_mc", "rho_eval", float(x), rho_eval(float(x), sol), sim(float(x))[0], k))
    return rows


def check_dividends(scn: Scenario):
    lp = scn.require("lattice")
    sol = solve_lattice(lp)
    rows = [
        Row("dividends", "v_N", lp.level(lp.N), float(sol.v[lp.N]), 0.0, None, abs(float(sol.v[lp.N])), 0.0, "abs",
            sol.v[lp.N] == 0.0, "boundary value, exact"),
        _abs_row("dividends", "equation_residual_max", float(np.max(np.abs(dividend_residuals(sol)))), 0.0, 1e-10),
    ]
    sim = _SimCache(lambda x: simulate_lattice(lp, x, scn.mc))
    k = _k(scn)
    for n in scn.compare.get("v_levels", [0]):
        x = lp.level(n)
        rows.append(_mc_row("dividends", f"v_{n}", x, sol.v[n], sim(x)[2], k))
    interior = [float(x) for x in scn.compare.get("interior", [0.5, 1.3])]
    for x in interior:
        rows.append(_mc_row("dividends", "v_eval", x, v_eval(x, sol), sim(x)[2], k))

    Ns = scn.compare.get("N_values", [4, 8, 16, 32])
    curves = np.array([v_eval(np.array(interior), solve_lattice(replace(lp, N=N))) for N in Ns])
    # rounding noise of a converged value is a few ulps; anything larger is a real decrease
    floor = 8 * np.finfo(float).eps * np.max(np.abs(curves))
    drop = float(np.max(curves[:-1] - curves[1:]))
    rows.append(Row("dividends", "v_N(x)_nondecreasing_in_N", None, max(drop, 0.0), 0.0, None, max(drop, 0.0), floor,
                    "abs", drop <= floor, f"N={Ns}, x={interior}"))
    inc = float(np.max((curves[-1] - curves[-2]) / curves[-1]))
    rows.append(Row("dividends", "final_increment", None, inc, 0.0, None, abs(inc), 0.01, "rel", abs(inc) < 0.01,
                    f"N={Ns[-2]}->{Ns[-1]}"))
    return rows


def delay_ode_regions(lp: LatticeParams):
    """Fixed grids on (0, b/(1+a)] and (b/(1+a), b), independent of N."""
    split = lp.b / lp.c
    lower = np.geomspace(1e-4 * lp.b, split, 200)[:-1]
    upper = np.linspace(split, lp.b, 60)[1:-1]
    return {"lower": lower, "upper": upper}


def check_delay_ode(scn: Scenario):
    lp = scn.require("lattice")
    Ns = scn.compare.get("N_values", [8, 16, 32])
    h = 1e-5
    regions = delay_ode_regions(lp)
    res = {}
    vmax = 0.0
    for N in Ns:
        sol = solve_lattice(replace(lp, N=N))
        vmax = max(vmax, float(sol.v[0]))
        for name, xs in regions.items():
            res[N, name] = float(np.max(np.abs(delay_ode_residual(sol, xs, h))))
    # central differences of values with relative rounding eps carry noise ~ eps |v| / h
    floor = 8 * np.finfo(float).eps * max(vmax, 1.0) / h
    rows = []
    for name in regions:
        for N0, N1 in zip(Ns[:-1], Ns[1:]):
            r0, r1 = res[N0, name], res[N1, name]
            rows.append(Row("delay_ode", f"max_residual_{name}(N={N1})_vs_(N={N0})", None, r1, r0, None,
                            max(r1 - r0, 0.0), floor, "abs", r1 <= r0 + floor,
                            "non-increasing up to the finite-difference noise floor"))
    return rows


# ---------------------------------------------------------------------------
# Brownian lattice


def _fd(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


def check_scale_functions(scn: Scenario):
    bp = scn.require("brownian")
    fam = bp.family()
    q = fam.q_eff
    rows = [
        Row("scale_functions", "W(0)", 0.0, float(fam.scale_w(0.0)), 0.0, None, abs(float(fam.scale_w(0.0))), 0.0,
            "abs", float(fam.scale_w(0.0)) == 0.0, "exact"),
        Row("scale_functions", "Z(0)", 0.0, float(fam.scale_z(0.0)), 1.0, None, abs(float(fam.scale_z(0.0)) - 1), 0.0,
            "abs", float(fam.scale_z(0.0)) == 1.0, "exact"),
    ]
    for dtheta in (0.5, 2.0, 10.0):
        theta = fam.phi + dtheta
        val, _ = integrate.quad(lambda x: math.exp(-theta * x + float(fam.log_scale_w(x))) if x > 0 else 0.0,
                                0, np.inf, epsabs=0, epsrel=1e-12, limit=400)
        rows.append(_abs_row("scale_functions", f"laplace_W(theta=Phi+{dtheta:g})", val,
                             1.0 / (float(fam.psi(theta)) - q), 1e-6, x=theta, unit="rel"))
    for x in (0.05, 0.2, 0.5, 1.0):
        h = 1e-5 * max(x, fam.layer)
        W = float(fam.scale_w(x))
        dZ = _fd(lambda t: float(fam.scale_z(t)), x, h)
        dWbar = _fd(lambda t: float(fam.scale_wbar(t)), x, h)
        rows.append(_abs_row("scale_functions", "Z'_vs_-q_eff*W", dZ, -q * W, 1e-6, x=x, unit="rel",
                             note="sign as stated for Z = 1 - q Wbar; the implemented Z is 1 + q Wbar"))
        rows.append(_abs_row("scale_functions", "Z'_vs_+q_eff*W", dZ, q * W, 1e-6, x=x, unit="rel"))
        rows.append(_abs_row("scale_functions", "Wbar'_vs_W", dWbar, W, 1e-6, x=x, unit="rel"))
    return rows


def _nested_reference(bp, kind: str, m: int, k: int, z: float) -> float:
    """r/omega/T/vJ on interval m at z by recursive adaptive quadrature."""
    fam, c, lam = bp.family(), bp.c, bp.lam

    def base(kind, m, zz):
        w = bp.width(m)
        if kind == "r":
            return float(fam.exit_down(zz, w))
        if kind == "omega":
            return float(fam.exit_up(zz, w))
        return 1.0 if kind == "T" else zz

    def value(kind, m, k, zz):
        if (kind == "r" and k == 0) or (kind == "omega" and k == 1) or (kind in ("T", "vJ") and m == 0):
            return base(kind, m, zz)
        w = bp.width(m)

        def integrand(y):
            return float(fam.resolvent(zz, y, 0.0, w)) * value(kind, m - 1, k - 1, c * y)

        pts = [zz] if 0 < zz < w else None
        val, _ = integrate.quad(integrand, 0.0, w, points=pts, epsabs=1e-13, epsrel=1e-11, limit=200)
        return lam * val

    return value(kind, m, k, z)


def check_coeff_base_cases(scn: Scenario):
    bp = scn.require("brownian")
    table = CoeffTable(bp, replace(scn.brownian_control, verify=False))
    fams = build_families(bp, scn.brownian_control)
    cases = [("r", m, k) for k in range(3) for m in range(k + 1, min(bp.N, k + 2) + 1)]
    cases += [("omega", m, k) for k in (1, 2) for m in range(k, min(bp.N, k + 1) + 1)]
    cases += [(kind, m, 0) for kind in ("T", "vJ") for m in (1, 2)]
    rows = []
    for kind, m, k in cases:
        w = bp.width(m)
        zs = w * np.array([0.1, 0.5, 0.9])
        ref = np.array([_nested_reference(bp, kind, m, k, z) for z in zs])
        coeff = np.asarray(table.evaluate(kind, m, zs, k), dtype=float)
        store = {"r": fams.r, "omega": fams.omega, "T": fams.T, "vJ": fams.vJ}[kind]
        resolvent = np.asarray(store[(m, k) if kind in ("r", "omega") else m](zs), dtype=float)
        label = f"{kind}[{m},{k}]" if kind in ("r", "omega") else f"{kind}[{m}]"
        scale = max(1.0, float(np.max(np.abs(ref))))
        for route, vals in (("coefficients", coeff), ("resolvent", resolvent)):
            i = int(np.argmax(np.abs(vals - ref)))
            err = float(np.abs(vals[i] - ref[i]) / scale)
            rows.append(Row("coeff_base_cases", f"{label}_{route}_vs_nested_quadrature", float(zs[i]), float(vals[i]),
                            float(ref[i]), None, err, 1e-6, "abs", err <= 1e-6, "local coordinate x - L_m"))
    return rows


def check_brownian_mc(scn: Scenario):
    bp = scn.require("brownian")
    t0 = time.perf_counter()
    sol = solve_brownian(bp, scn.brownian_control)
    k = _k(scn)
    rel = float(scn.compare.get("euler_allowance", 0.01))
    sim = _SimCache(lambda x: simulate_brownian_lattice(bp, x, scn.mc))
    rows = []

    def add(quantity, x, value, est):
        allowance = rel * abs(value)
        row = _mc_row("brownian_mc", quantity, x, value, est, k, allowance)
        note = row.note + f" barrier_bias_scale={euler_allowance(bp.sigma, scn.mc.euler_dt):.3g}"
        rows.append(replace(row, note=note))

    for n in scn.compare.get("rho_levels", [2]):
        x = float(bp.levels[n])
        add(f"rho_{n}", x, sol.rho[n], sim(x)[0])
    for n in scn.compare.get("v_levels", [0]):
        x = float(bp.levels[n])
        add(f"v_{n}", x, sol.v[n], sim(x)[1])
    for x in scn.compare.get("interior", [1.5]):
        x = float(x)
        add("rho_eval", x, rho_eval_brownian(x, sol), sim(x)[0])
        add("v_eval", x, v_eval_brownian(x, sol), sim(x)[1])
    rows.append(_time_row("brownian_mc", time.perf_counter() - t0, 600.0))
    return rows


def check_brownian_degeneracy(scn: Scenario):
    bp = scn.require("brownian")
    if bp.eta != -1.0:
        raise ScenarioError("brownian_degeneracy compares with the unit-drift lattice; set eta = -1")
    sol = solve_brownian(bp, scn.brownian_control)
    lat = solve_lattice(LatticeParams(bp.b, bp.N, bp.lam, bp.q, bp.a))
    tol = float(scn.compare.get("relative_tolerance", 0.02))
    rows = []
    for n in range(1, bp.N):
        rows.append(_abs_row("brownian_degeneracy", f"rho_{n}", sol.rho[n], lat.rho[n], tol,
                             x=float(bp.levels[n]), unit="rel", note=f"sigma={bp.sigma:g} vs drift-only lattice"))
    return rows


def check_reproducibility(scn: Scenario):
    from .cli import render_csv, simulate_table  # cli imports this module

    workers = scn.compare.get("workers", [1, 8])
    outputs = []
    for w in workers:
        table = simulate_table(scn.with_workers(w))
        outputs.append(render_csv(table, scn, "simulate").encode("utf-8"))
    digests = [hashlib.sha256(o).hexdigest() for o in outputs]
    same = all(o == outputs[0] for o in outputs)
    mismatched = sum(o != outputs[0] for o in outputs)
    note = " ".join(f"workers={w}:sha256={d[:16]}" for w, d in zip(workers, digests))
    return [Row("reproducibility", "simulate_csv_bytes_identical", None, float(mismatched), 0.0, None,
                float(mismatched), 0.0, "abs", same, note)]


CHECKS: dict[str, Callable[[Scenario], list]] = {
    "fe_residual": check_fe_residual,
    "pole_guard": check_pole_guard,
    "tau_consistency": check_tau_consistency,
    "mixture_reduction": check_mixture_reduction,
    "ruin_prob_mc": check_ruin_prob_mc,
    "ruin_time_mc": check_ruin_time_mc,
    "classical_a0": check_classical_a0,
    "lattice_complementarity": check_lattice_complementarity,
    "lattice_mc": check_lattice_mc,
    "dividends": check_dividends,
    "delay_ode": check_delay_ode,
    "scale_functions": check_scale_functions,
    "coeff_base_cases": check_coeff_base_cases,
    "brownian_mc": check_brownian_mc,
    "brownian_degeneracy": check_brownian_degeneracy,
    "reproducibility": check_reproducibility,
}


def default_checks(scn: Scenario) -> list[str]:
    """Analytic-versus-MC checks for whichever sections the scenario has."""
    names = []
    if scn.model is not None:
        names.append("ruin_prob_mc")
    if scn.lattice is not None:
        names += ["lattice_mc", "dividends"]
    if scn.brownian is not None:
        names.append("brownian_mc")
    if not names:
        raise ScenarioError("compare needs a model, lattice or brownian section")
    return names


def run_checks(scn: Scenario, names=None) -> list[Row]:
    rows = []
    for name in names or scn.compare.get("checks") or default_checks(scn):
        rows.extend(CHECKS[name](scn))
    return rows


__all__ = ["Row", "COLUMNS", "CHECKS", "run_checks", "default_checks", "reference_series", "lundberg_exponent"]
