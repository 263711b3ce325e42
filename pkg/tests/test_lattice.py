from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from dualgain.lattice import (
    ExpConvolutionBasis,
    _expm_rows,
    delay_ode_residual,
    dividend_residuals,
    gamma_n,
    mu_eval,
    omega_n,
    q_and_one_convolutions,
    rho_eval,
    solve_lattice,
    v_eval,
)
from dualgain.model import DomainError, LatticeParams

STD = LatticeParams(b=2.0, N=6, lam=1.0, q=0.05, a=0.5)

lattices = st.builds(
    LatticeParams,
    b=st.floats(0.5, 4.0),
    N=st.integers(2, 12),
    lam=st.floats(0.2, 3.0),
    q=st.floats(0.0, 0.5),
    a=st.floats(0.2, 1.5),
)


def test_gamma_2_against_double_integral():
    # two jumps at times t1 < t1 + t2 <= x; after j jumps the jump rate is lam c^j
    basis = ExpConvolutionBasis.from_params(STD)
    x, lam, th, c = 0.3, STD.lam, STD.lam + STD.q, STD.c

    def f(t2, t1):
        return (lam * np.exp(-th * t1) * lam * c * np.exp(-th * c * t2)
                * np.exp(-th * c**2 * (x - t1 - t2)))

    ref, _ = integrate.dblquad(f, 0, x, 0, lambda t1: x - t1, epsabs=1e-14)
    assert gamma_n(2, x, basis) == pytest.approx(ref, rel=1e-8)


@given(lp=lattices, frac=st.floats(0.01, 1.0), n=st.integers(1, 8))
def test_probabilities_sum_to_one_without_discounting(lp, frac, n):
    lp = replace(lp, q=0.0)
    basis = ExpConvolutionBasis.from_params(lp)
    x = frac * lp.width(1)
    total = sum(gamma_n(j, x, basis) for j in range(n)) + omega_n(n, x, basis)
    assert total == pytest.approx(1.0, abs=1e-10)


@given(lp=lattices, frac=st.floats(0.01, 1.0), n=st.integers(1, 8))
def test_partial_fractions_match_matrix_exponential(lp, frac, n):
    basis = ExpConvolutionBasis.from_params(lp)
    x = frac * lp.width(1)
    G = basis.generator(n)
    ref = _expm_rows(G, np.array([x]))[0]
    for j in range(n):
        assert gamma_n(j, x, basis) == pytest.approx(ref[j], abs=1e-12, rel=1e-9)


@given(lp=lattices)
def test_solution_invariants(lp):
    sol = solve_lattice(lp)
    N = lp.N
    assert sol.mu[0] == 1.0 and sol.mu[N] == 0.0 and sol.rho[N] == 1.0 and sol.v[N] == 0.0
    assert np.all((sol.rho[1:] >= -1e-12) & (sol.rho[1:] <= 1 + 1e-12))
    assert np.all((sol.mu >= -1e-12) & (sol.mu <= 1 + 1e-12))
    assert np.all(sol.rho[1:] + sol.mu[1:] <= 1 + 1e-10)
    assert np.all(sol.v >= -1e-14)
    assert np.all(np.diff(sol.v) <= 1e-14)  # more capital, more dividends
    assert np.max(np.abs(dividend_residuals(sol))) < 1e-10


@given(lp=lattices)
def test_complementarity_without_discounting(lp):
    sol = solve_lattice(replace(lp, q=0.0))
    assert np.allclose(sol.rho[1:] + sol.mu[1:], 1.0, rtol=0, atol=1e-8)


def test_evaluation_is_continuous_at_the_levels():
    sol = solve_lattice(STD)
    for n in range(1, STD.N):
        x = STD.level(n)
        for f, vals in ((rho_eval, sol.rho), (mu_eval, sol.mu), (v_eval, sol.v)):
            assert f(x, sol) == pytest.approx(vals[n], abs=1e-12)
            assert f(x * (1 + 1e-9), sol) == pytest.approx(vals[n], abs=1e-7)


def test_boundary_conventions():
    sol = solve_lattice(STD)
    assert mu_eval(STD.b, sol) == 1.0
    assert v_eval(STD.b + 0.3, sol) == pytest.approx(sol.v[0] + 0.3)
    with pytest.raises(DomainError):
        rho_eval(STD.b + 0.1, sol)
    with pytest.raises(DomainError):
        rho_eval(STD.level(STD.N) * 0.5, sol)


def test_overflow_convolution_is_discounted_mean_overshoot():
    basis = ExpConvolutionBasis.from_params(STD)
    one, qc = q_and_one_convolutions(1, 0.4, basis)
    assert 0 < qc < one < 1


def test_delay_ode_residuals_small_and_nonincreasing():
    xs = np.concatenate([np.geomspace(2e-4, 2 / 1.5, 100)[:-1], np.linspace(2 / 1.5, 2, 30)[1:-1]])
    res = [np.max(np.abs(delay_ode_residual(solve_lattice(replace(STD, N=N)), xs))) for N in (8, 16, 32)]
    assert res[2] < 1e-9
    assert res[2] <= res[1] + 2e-10 and res[1] <= res[0] + 2e-10


def test_values_converge_in_N():
    xs = np.array([0.5, 1.3])
    curves = [v_eval(xs, solve_lattice(replace(STD, N=N))) for N in (4, 8, 16, 32)]
    assert np.all(np.diff(curves, axis=0) >= -1e-15)
    assert np.all((curves[-1] - curves[-2]) / curves[-1] < 0.01)


def test_size_limit():
    with pytest.raises(DomainError):
        solve_lattice(replace(STD, N=10_000))
