import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualgain.model import (
    Deterministic,
    DomainError,
    Drift,
    DualModelParams,
    Erlang,
    Exponential,
    HyperExponential,
    LatticeParams,
    NoAdditiveGain,
    classify_drift,
    lst,
    lst_by_quadrature,
    lst_derivative,
)

rates = st.floats(0.2, 5.0)
reals = st.floats(0.0, 10.0)

SPECS = [Exponential(1.3), Erlang(3, 2.0), Deterministic(0.7), HyperExponential((0.3, 0.7), (0.5, 4.0))]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: type(s).__name__)
@pytest.mark.parametrize("s", [0.0, 0.3, 2.5])
def test_lst_matches_quadrature(spec, s):
    assert lst(spec, s).real == pytest.approx(lst_by_quadrature(spec, s), abs=1e-10)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: type(s).__name__)
def test_lst_gap_and_derivative(spec):
    for s in (1e-3, 0.4 + 0.3j, 3.0):
        phi = complex(spec.lst(s))
        assert complex(spec.lst_gap(s)) == pytest.approx((1 - phi) / s, rel=1e-10)
        h = 1e-6
        fd = (complex(spec.lst(s + h)) - complex(spec.lst(s - h))) / (2 * h)
        assert complex(lst_derivative(spec, s)) == pytest.approx(fd, rel=1e-6)
    assert complex(spec.lst_gap(0.0)).real == pytest.approx(spec.mean(), rel=1e-12)


@given(rate=rates, s=st.complex_numbers(max_magnitude=20).filter(lambda z: z.real >= 0))
def test_lst_bounded_on_right_half_plane(rate, s):
    assert abs(lst(Exponential(rate), s)) <= 1 + 1e-12


@given(rate=rates, k=st.integers(1, 6))
def test_erlang_mean_matches_sampler(rate, k):
    spec = Erlang(k, rate)
    x = spec.sample(np.random.default_rng(1), 4000)
    assert np.mean(x) == pytest.approx(spec.mean(), rel=0.1)


def test_lst_pole_rejected_unless_continued():
    with pytest.raises(DomainError):
        Exponential(1.0).lst(-2.0)
    assert complex(Exponential(1.0).lst(-2.0, continued=True)) == pytest.approx(-1.0)


def test_drift_classification():
    assert classify_drift(DualModelParams(0.5, 1.0, Exponential(1.0))) is Drift.Transient
    assert classify_drift(DualModelParams(0.0, 2.0, Exponential(1.0))) is Drift.CertainRuin
    assert classify_drift(DualModelParams(0.0, 1.0, Exponential(2.0))) is Drift.Transient
    assert classify_drift(DualModelParams(0.0, 1.0, Exponential(1.0))) is Drift.Critical
    assert classify_drift(DualModelParams(0.0, NoAdditiveGain, Exponential(1.0))) is Drift.CertainRuin


@pytest.mark.parametrize(
    "kwargs, match",
    [
        (dict(a=-0.1, mu=1.0, interarrival=Exponential(1.0)), "a must be"),
        (dict(a=0.5, mu=0.0, interarrival=Exponential(1.0)), "mu must be"),
        (dict(a=0.5, mu=1.0, interarrival=Exponential(1.0), mixture_p=0.5), "delta"),
        (dict(a=0.5, mu=1.0, interarrival=Exponential(1.0), mixture_p=1.5), "mixture_p"),
    ],
)
def test_model_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        DualModelParams(**kwargs)


def test_interarrival_validation():
    with pytest.raises(ValueError):
        Erlang(1.5, 1.0)
    with pytest.raises(ValueError):
        HyperExponential((0.5, 0.4), (1.0, 2.0))
    with pytest.raises(ValueError):
        Deterministic(0.0)


def test_lattice_params():
    lp = LatticeParams(b=2.0, N=6, lam=1.0, q=0.05, a=0.5)
    assert lp.levels[0] == 2.0 and lp.levels[-1] == pytest.approx(2 / 1.5**6)
    assert lp.interval_of(2.0) == 1 and lp.interval_of(2.5) == 0
    assert lp.interval_of(lp.level(3)) == 4
    assert lp.width(1) == pytest.approx(2 - 2 / 1.5)
    with pytest.raises(DomainError):
        lp.interval_of(lp.level(6))
    with pytest.raises(ValueError, match="lattice requires a > 0"):
        LatticeParams(b=2.0, N=6, lam=1.0, q=0.05, a=0.0)


def test_no_additive_gain_is_a_singleton():
    import pickle

    assert pickle.loads(pickle.dumps(NoAdditiveGain)) is NoAdditiveGain
    assert not DualModelParams(0.5, NoAdditiveGain, Exponential(1.0)).additive
    assert math.isfinite(Exponential(2.0).min_rate())
