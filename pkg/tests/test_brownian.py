import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from dualgain.brownian import (
    BrownianControl,
    BrownianParams,
    CoeffTable,
    GridFunction,
    ScaleFamily,
    build_families,
    reflected_exit_lt,
    resolvent_u,
    rho_eval_brownian,
    solve_brownian,
    v_eval_brownian,
)
from dualgain.lattice import solve_lattice
from dualgain.model import DomainError, LatticeParams, NumericalError

STD = BrownianParams(b=2.0, N=4, lam=1.0, q=0.1, a=0.5, eta=-1.0, sigma=0.3)

families = st.builds(ScaleFamily, q_eff=st.floats(0.05, 5.0), eta=st.floats(-3.0, 3.0),
                     sigma=st.floats(0.2, 2.0))


@pytest.fixture(scope="module")
def sol():
    return solve_brownian(STD)


@given(fam=families, x=st.floats(0.01, 3.0))
def test_scale_function_identities(fam, x):
    assert fam.scale_w(0.0) == 0.0 and fam.scale_z(0.0) == 1.0
    h = 1e-6 * max(x, 1.0)
    fd = (fam.scale_wbar(x + h) - fam.scale_wbar(x - h)) / (2 * h)
    assert fd == pytest.approx(fam.scale_w(x), rel=1e-6)
    fd = (fam.scale_w(x + h) - fam.scale_w(x - h)) / (2 * h)
    assert fd == pytest.approx(fam.scale_w_prime(x), rel=1e-6)


@given(fam=families, dtheta=st.floats(0.2, 5.0))
def test_laplace_transform_of_w(fam, dtheta):
    # int exp(-theta x) W(x) dx = 1/(psi(theta) - q_eff) for theta > Phi(q_eff)
    theta = fam.phi + dtheta
    val, _ = integrate.quad(lambda x: math.exp(fam.log_scale_w(x) - theta * x) if x > 0 else 0.0,
                            0, np.inf, epsrel=1e-11)
    assert val == pytest.approx(1 / (fam.psi(theta) - fam.q_eff), rel=1e-7)


@given(fam=families, w=st.floats(0.05, 3.0), frac=st.floats(0.0, 1.0))
def test_exit_probabilities(fam, w, frac):
    z = frac * w
    up, down = float(fam.exit_up(z, w)), float(fam.exit_down(z, w))
    assert 0 <= up <= 1 + 1e-12 and 0 <= down <= 1 + 1e-12
    assert up + down <= 1 + 1e-12  # killing makes them defective
    assert float(fam.exit_up(w, w)) == pytest.approx(1.0)
    assert float(fam.exit_down(0.0, w)) == pytest.approx(1.0)
    # plain scale functions lose ~eps exp(Phi w) to cancellation; compare where that is < 1e-9
    if fam.phi * w < 15:
        W, Z = fam.scale_w, fam.scale_z
        assert up == pytest.approx(W(z) / W(w), abs=1e-10)
        assert down == pytest.approx(Z(z) - W(z) * Z(w) / W(w), abs=1e-9)


@given(fam=families, x=st.floats(0.01, 0.99), y=st.floats(0.01, 0.99))
def test_resolvent_is_a_nonnegative_density(fam, x, y):
    assert resolvent_u(x, y, 0.0, 1.0, fam) >= -1e-14
    assert resolvent_u(0.0, y, 0.0, 1.0, fam) == pytest.approx(0.0, abs=1e-14)
    assert resolvent_u(1.0, y, 0.0, 1.0, fam) == pytest.approx(0.0, abs=1e-12)


def test_resolvent_mass_is_killing_probability():
    # q_eff int u(x, y) dy = 1 - P(exit before killing)
    fam = ScaleFamily(0.7, -0.4, 0.5)
    x = 0.3
    mass, _ = integrate.quad(lambda y: resolvent_u(x, y, 0.0, 1.0, fam), 0, 1, points=[x], epsabs=1e-13)
    exits = float(fam.exit_up(x, 1.0) + fam.exit_down(x, 1.0))
    assert fam.q_eff * mass == pytest.approx(1 - exits, abs=1e-10)


def test_reflected_exit_domain():
    fam = STD.family()
    assert 0 < reflected_exit_lt(1.0, 0.5, 2.0, fam) <= 1
    with pytest.raises(DomainError):
        reflected_exit_lt(0.5, 0.5, 2.0, fam)


def test_grid_function_interpolates_boundary_layers():
    ell = 1e-3
    f = lambda z: np.exp(-z / ell) + np.exp((z - 1) / ell) + np.sin(z)  # noqa: E731
    g = GridFunction.sample(f, 1.0, ell, 24)
    z = np.concatenate([np.geomspace(1e-6, 0.5, 200), 1 - np.geomspace(1e-6, 0.5, 200)])
    assert np.max(np.abs(g(z) - f(z))) < 1e-10
    assert GridFunction.identity(2.0)(0.7) == pytest.approx(0.7)
    assert GridFunction.constant(3.0, 1.0)(0.2) == 3.0


def test_families_are_probabilities(sol):
    fams = sol.families
    for key, fn in list(fams.r.items()) + list(fams.omega.items()):
        z = np.linspace(0, STD.width(key[0]), 50)
        vals = fn(z)
        assert np.all((vals >= -1e-10) & (vals <= 1 + 1e-10)), key
    for m in range(STD.N + 1):
        z = np.linspace(0, STD.width(m), 50)
        assert np.all((fams.T[m](z) >= -1e-10) & (fams.T[m](z) <= 1 + 1e-10))
        assert np.all(fams.vJ[m](z) >= -1e-10)


def test_solution_invariants(sol):
    N = STD.N
    assert sol.rho[0] == 0.0 and sol.rho[N] == 1.0 and sol.v[N] == 0.0
    assert np.all((sol.rho >= 0) & (sol.rho <= 1))
    assert np.all(np.diff(sol.rho) >= 0)  # lower capital, likelier ruin
    assert np.all(np.diff(sol.v) <= 0)
    assert sol.refinement_change < 1e-7
    assert np.max(np.abs(sol.rho_system.residuals())) < 1e-12
    assert np.max(np.abs(sol.v_system.residuals())) < 1e-12


def test_evaluation_is_continuous_at_levels(sol):
    for n in range(1, STD.N):
        x = STD.levels[n]
        assert rho_eval_brownian(x * (1 + 1e-9), sol) == pytest.approx(sol.rho[n], abs=1e-6)
        assert rho_eval_brownian(x * (1 - 1e-9), sol) == pytest.approx(sol.rho[n], abs=1e-6)
        assert v_eval_brownian(x * (1 + 1e-9), sol) == pytest.approx(sol.v[n], abs=1e-6)
    assert v_eval_brownian(STD.b + 0.5, sol) == pytest.approx(sol.v[0] + 0.5)
    with pytest.raises(DomainError):
        rho_eval_brownian(STD.b + 0.1, sol)


@pytest.mark.parametrize("kind, m, k", [("r", 2, 1), ("r", 3, 2), ("omega", 2, 2), ("omega", 3, 2),
                                         ("T", 2, 0), ("vJ", 3, 0)])
def test_coefficient_route_matches_resolvent_route(sol, kind, m, k):
    table = CoeffTable(STD)
    fams = sol.families
    fn = {"r": fams.r, "omega": fams.omega}.get(kind)
    fn = fn[m, k] if fn is not None else (fams.T if kind == "T" else fams.vJ)[m]
    z = np.linspace(0.05, 0.95, 7) * STD.width(m)
    assert np.allclose(table.evaluate(kind, m, z, k), fn(z), rtol=0, atol=1e-8)


def test_no_perturbation_limit_matches_drift_only_lattice():
    small = replace(STD, sigma=0.02)
    rho = solve_brownian(small).rho
    ref = solve_lattice(LatticeParams(b=2.0, N=4, lam=1.0, q=0.1, a=0.5)).rho
    assert np.allclose(rho[1:-1], ref[1:-1], rtol=0.02)


def test_validation_and_refinement_failure():
    with pytest.raises(ValueError, match="sigma"):
        replace(STD, sigma=0.0)
    with pytest.raises(ValueError, match="a > 0"):
        replace(STD, a=0.0)
    with pytest.raises(DomainError):
        build_families(replace(STD, lam=0.0))
    with pytest.raises(NumericalError):
        solve_brownian(STD, BrownianControl(degree=4, nodes=4, tolerance=1e-14))
