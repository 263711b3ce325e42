import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualgain.checks import reference_series
from dualgain.model import DomainError, DualModelParams, Erlang, Exponential, NoAdditiveGain
from dualgain.transforms import (
    PoleError,
    _series,
    RuinTransform,
    SeriesControl,
    generalized_ruin_lt,
    hj,
    mixture_bracket,
    rho_at_mu,
    rouche_root,
    ruin_lt,
    ruin_time_lt,
    series_magnitudes,
    tau_at_mu,
)

STD = DualModelParams(0.5, 1.0, Exponential(1.0))

models = st.builds(
    DualModelParams,
    a=st.floats(0.1, 2.0),
    mu=st.floats(0.3, 3.0),
    interarrival=st.one_of(st.builds(Exponential, st.floats(0.3, 3.0)),
                           st.builds(Erlang, st.integers(1, 4), st.floats(0.5, 4.0))),
)
points = st.one_of(st.floats(0.02, 10.0).map(complex),
                   st.builds(complex, st.floats(0.02, 5.0), st.floats(-6.0, 6.0)))


def cancellation_scale(params, s, X, alpha=0.0):
    """|A| + |X||B|: rho = A - X B loses accuracy in proportion to this."""
    res = _series(params, s, alpha, SeriesControl(), X=X)
    return max(1.0, abs(res.A[0]) + abs(X) * abs(res.B[0]))


def far_from_poles(params, s, rel=1e-3):
    c = 1 + params.a
    return all(abs(s - params.mu * c**k) > rel * params.mu * c**k for k in range(1, 60))


@given(params=models, s=points)
def test_functional_equation(params, s):
    if not far_from_poles(params, s):
        return
    rt = RuinTransform.build(params)
    c = 1 + params.a
    H, J = hj(s, rt.rho_mu, params)
    lhs = complex(ruin_lt(s, rt))
    assert abs(lhs - J * complex(ruin_lt(s / c, rt)) - H) < 1e-10 * cancellation_scale(params, s, rt.rho_mu)


@given(params=models, s=points, alpha=st.floats(0.0, 3.0))
def test_ruin_time_functional_equation(params, s, alpha):
    if not far_from_poles(params, s):
        return
    rt = RuinTransform.build(params)
    tau_mu = tau_at_mu(params, alpha)
    H, J = hj(s, tau_mu, params, alpha=alpha)
    c = 1 + params.a
    lhs = complex(ruin_time_lt(s, alpha, rt, tau_mu=tau_mu))
    rhs = J * complex(ruin_time_lt(s / c, alpha, rt, tau_mu=tau_mu)) + H
    assert abs(lhs - rhs) < 1e-10 * cancellation_scale(params, s, tau_mu, alpha)


@given(params=models, s=points)
def test_engine_matches_plain_iteration(params, s):
    if not far_from_poles(params, s, 1e-2):
        return
    rt = RuinTransform.build(params)
    tol = 1e-12 * cancellation_scale(params, s, rt.rho_mu)
    assert abs(complex(ruin_lt(s, rt)) - reference_series(params, s)) < tol


@given(params=models, s=st.floats(0.02, 20.0))
def test_real_transform_is_a_probability_transform(params, s):
    # rho(s) = int exp(-s x) R(x) dx with 0 <= R <= 1
    val = complex(ruin_lt(s, RuinTransform.build(params)))
    assert abs(val.imag) < 1e-12
    assert -1e-10 <= s * val.real <= 1 + 1e-10


@given(params=models, s=st.floats(0.05, 5.0), alpha=st.floats(0.01, 2.0))
def test_discounting_lowers_the_transform(params, s, alpha):
    rt = RuinTransform.build(params)
    assert complex(ruin_time_lt(s, alpha, rt)).real <= complex(ruin_lt(s, rt)).real + 1e-12


def test_conjugate_symmetry():
    rt = RuinTransform.build(STD)
    s = np.array([0.3 + 1.2j, 2.0 - 0.7j])
    assert np.allclose(ruin_lt(s.conj(), rt), np.conj(ruin_lt(s, rt)), rtol=0, atol=1e-14)


def test_removable_pole_is_guarded():
    rt = RuinTransform.build(STD)
    pole = STD.mu * 1.5
    with pytest.raises(PoleError):
        hj(pole, rt.rho_mu, STD)
    mid = 0.5 * (ruin_lt(pole * (1 - 1e-4), rt) + ruin_lt(pole * (1 + 1e-4), rt))
    assert complex(ruin_lt(pole, rt)) == pytest.approx(complex(mid), abs=1e-6)


def test_tau_at_zero_is_rho():
    rt = RuinTransform.build(STD)
    assert tau_at_mu(STD, 0.0) == rt.rho_mu == rho_at_mu(STD)
    s = np.array([0.1, 1.0 + 1.0j, 4.0])
    assert np.allclose(ruin_time_lt(s, 0.0, rt), ruin_lt(s, rt), rtol=0, atol=1e-15)


def test_a0_transient_closed_form():
    # a = 0, Poisson(2) arrivals, Exp(1) gains: R(x) = exp(-x), rho(s) = 1/(s+1)
    params = DualModelParams(0.0, 1.0, Exponential(2.0))
    rt = RuinTransform.build(params)
    s = np.array([0.1, 0.5, 2.0 + 1.0j])
    assert np.allclose(ruin_lt(s, rt), 1 / (s + 1), rtol=1e-12)


def test_a0_certain_ruin_is_one_over_s():
    rt = RuinTransform.build(DualModelParams(0.0, 2.0, Exponential(1.0)))
    s = np.array([0.2, 1.0 + 3.0j])
    assert np.allclose(ruin_lt(s, rt), 1 / s, rtol=1e-12)


def test_no_additive_gain_series():
    params = DualModelParams(0.5, NoAdditiveGain, Exponential(1.0))
    rt = RuinTransform.build(params)
    assert rt.rho_mu == 0.0
    s = 0.7 + 0.2j
    H, J = hj(s, 0.0, params)
    assert complex(ruin_lt(s, rt)) == pytest.approx(J * complex(ruin_lt(s / 1.5, rt)) + H, abs=1e-12)


def test_series_terms_decay():
    mags = series_magnitudes(0.5 + 0.5j, RuinTransform.build(STD))
    assert mags[-1] < 1e-12 and mags[-1] < mags[0]


def test_tail_tolerance_controls_accuracy():
    loose = RuinTransform.build(STD, SeriesControl(tail_tolerance=1e-4))
    tight = RuinTransform.build(STD)
    s = 0.3
    assert abs(complex(ruin_lt(s, loose)) - complex(ruin_lt(s, tight))) < 1e-4


def test_domain_checks():
    rt = RuinTransform.build(STD)
    with pytest.raises(DomainError):
        ruin_lt(-0.5, rt)
    with pytest.raises(ValueError):
        SeriesControl(max_terms=5)


@given(p=st.floats(0.05, 0.95), delta=st.floats(0.3, 4.0))
def test_rouche_root(p, delta):
    params = DualModelParams(0.5, 1.0, Exponential(1.0), mixture_p=p, delta=delta)
    s1 = rouche_root(params)
    assert s1 > 0
    assert abs(delta - s1 - (1 - p) * delta * complex(params.phi(s1)).real) < 1e-10


def test_mixture_reduces_and_is_analytic():
    params = DualModelParams(0.5, 1.0, Exponential(1.0), mixture_p=1.0, delta=2.0)
    rt = RuinTransform.build(params)
    s = np.array([0.2, 1.0 + 2.0j, 5.0])
    assert np.allclose(generalized_ruin_lt(s, rt), ruin_lt(s, rt), rtol=0, atol=1e-10)
    mixed = DualModelParams(0.5, 1.0, Exponential(1.0), mixture_p=0.4, delta=2.0)
    rtm = RuinTransform.build(mixed)
    assert abs(mixture_bracket(rtm.s1, rtm)) < 1e-9
    val = complex(generalized_ruin_lt(0.8, rtm))
    assert 0 <= 0.8 * val.real <= 1
