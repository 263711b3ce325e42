"""Parameter types, interarrival laws and drift classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import integrate, stats


class DomainError(ValueError):
    """Argument outside the region where a quantity is defined."""


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its accuracy contract."""


# Integer tags shared with the Monte Carlo kernels.
KIND_EXPONENTIAL = 0
KIND_ERLANG = 1
KIND_DETERMINISTIC = 2
KIND_HYPEREXPONENTIAL = 3


def _as_complex(s):
    return np.asarray(s, dtype=complex)


def _check_pole(s, bound: float):
    """Reject arguments with Re(s) <= -bound, where the LST has a pole."""
    if np.any(np.real(s) <= -bound):
        raise DomainError(f"LST pole: Re(s) must exceed {-bound}")


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("Exponential rate must be positive")

    def lst(self, s, continued=False):
        s = _as_complex(s)
        if not continued:
            _check_pole(s, self.rate)
        return self.rate / (self.rate + s)

    def lst_gap(self, s):
        """(1 - phi(s)) / s, exact at s = 0."""
        return 1.0 / (self.rate + _as_complex(s))

    def mean(self) -> float:
        return 1.0 / self.rate

    def min_rate(self) -> float:
        return self.rate

    def _dist(self):
        return stats.expon(scale=1.0 / self.rate)

    def kernel(self):
        return KIND_EXPONENTIAL, np.array([self.rate])


@dataclass(frozen=True)
class Erlang:
    shape: int
    rate: float

    def __post_init__(self):
        if int(self.shape) != self.shape or self.shape < 1:
            raise ValueError("Erlang shape must be an integer >= 1")
        if not self.rate > 0:
            raise ValueError("Erlang rate must be positive")

    def lst(self, s, continued=False):
        s = _as_complex(s)
        if not continued:
            _check_pole(s, self.rate)
        return (self.rate / (self.rate + s)) ** int(self.shape)

    def lst_gap(self, s):
        s = _as_complex(s)
        r = self.rate / (self.rate + s)
        return sum(r**j for j in range(int(self.shape))) / (self.rate + s)

    def mean(self) -> float:
        return self.shape / self.rate

    def min_rate(self) -> float:
        return self.rate

    def _dist(self):
        return stats.gamma(a=int(self.shape), scale=1.0 / self.rate)

    def kernel(self):
        return KIND_ERLANG, np.array([float(self.shape), self.rate])


@dataclass(frozen=True)
class Deterministic:
    d: float

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("Deterministic interarrival must be positive")

    def lst(self, s, continued=False):
        return np.exp(-_as_complex(s) * self.d)

    def lst_gap(self, s):
        s = _as_complex(s)
        small = np.abs(s * self.d) < 1e-8
        safe = np.where(small, 1.0, s)
        return np.where(small, self.d * (1 - s * self.d / 2), -np.expm1(-safe * self.d) / safe)

    def mean(self) -> float:
        return self.d

    def min_rate(self) -> float:
        return math.inf

    def pdf(self, t):
        raise DomainError("Deterministic interarrival has no density")

    def cdf(self, t):
        return np.where(np.asarray(t, dtype=float) >= self.d, 1.0, 0.0)

    def sf(self, t):
        return 1.0 - self.cdf(t)

    def sample(self, rng: np.random.Generator, size=None):
        return np.full(size if size is not None else (), self.d, dtype=float)

    def kernel(self):
        return KIND_DETERMINISTIC, np.array([self.d])


@dataclass(frozen=True)
class HyperExponential:
    weights: tuple
    rates: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        r = np.asarray(self.rates, dtype=float)
        if w.shape != r.shape or w.ndim != 1 or w.size == 0:
            raise ValueError("weights and rates must be equal-length sequences")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("HyperExponential weights must be positive and sum to 1")
        if np.any(r <= 0):
            raise ValueError("HyperExponential rates must be positive")
        object.__setattr__(self, "weights", tuple(float(v) for v in w))
        object.__setattr__(self, "rates", tuple(float(v) for v in r))

    def lst(self, s, continued=False):
        s = _as_complex(s)
        if not continued:
            _check_pole(s, self.min_rate())
        out = np.zeros(np.shape(s), dtype=complex)
        for w, r in zip(self.weights, self.rates):
            out = out + w * r / (r + s)
        return out

    def lst_gap(self, s):
        s = _as_complex(s)
        return sum(w / (r + s) for w, r in zip(self.weights, self.rates))

    def mean(self) -> float:
        return float(sum(w / r for w, r in zip(self.weights, self.rates)))

    def min_rate(self) -> float:
        return min(self.rates)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        out = sum(w * r * np.exp(-r * t) for w, r in zip(self.weights, self.rates))
        return np.where(t >= 0, out, 0.0)

    def sf(self, t):
        t = np.asarray(t, dtype=float)
        out = sum(w * np.exp(-r * t) for w, r in zip(self.weights, self.rates))
        return np.where(t >= 0, out, 1.0)

    def cdf(self, t):
        return 1.0 - self.sf(t)

    def sample(self, rng: np.random.Generator, size=None):
        idx = rng.choice(len(self.weights), p=self.weights, size=size)
        return rng.exponential(1.0, size=size) / np.asarray(self.rates)[idx]

    def kernel(self):
        k = len(self.weights)
        return KIND_HYPEREXPONENTIAL, np.array([float(k), *self.weights, *self.rates])


# Exponential and Erlang delegate density work to scipy.stats.
for _cls in (Exponential, Erlang):
    _cls.pdf = lambda self, t: self._dist().pdf(t)
    _cls.cdf = lambda self, t: self._dist().cdf(t)
    _cls.sf = lambda self, t: self._dist().sf(t)
    _cls.sample = lambda self, rng, size=None: self._dist().rvs(size=size, random_state=rng)

InterarrivalSpec = Union[Exponential, Erlang, Deterministic, HyperExponential]


def lst(spec: InterarrivalSpec, s):
    """Laplace-Stieltjes transform of the interarrival law at (complex) s."""
    out = spec.lst(s)
    return complex(out) if np.ndim(out) == 0 else out


def lst_derivative(spec: InterarrivalSpec, s):
    """phi'(s), used by the Lundberg-type bounds and tests."""
    s = _as_complex(s)
    if isinstance(spec, Exponential):
        return -spec.rate / (spec.rate + s) ** 2
    if isinstance(spec, Erlang):
        k = int(spec.shape)
        return -k * spec.rate**k / (spec.rate + s) ** (k + 1)
    if isinstance(spec, Deterministic):
        return -spec.d * np.exp(-s * spec.d)
    return sum(-w * r / (r + s) ** 2 for w, r in zip(spec.weights, spec.rates))


class _NoAdditiveGain:
    """Sentinel for C_i = 0: jumps are purely proportional."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NoAdditiveGain"

    def __reduce__(self):
        return (_NoAdditiveGain, ())


NoAdditiveGain = _NoAdditiveGain()


@dataclass(frozen=True)
class DualModelParams:
    a: float
    mu: object  # float > 0 or NoAdditiveGain
    interarrival: InterarrivalSpec
    mixture_p: float = 1.0
    delta: float | None = None

    def __post_init__(self):
        if not self.a >= 0:
            raise ValueError("a must be nonnegative")
        if self.mu is not NoAdditiveGain and not (isinstance(self.mu, (int, float)) and self.mu > 0):
            raise ValueError("mu must be positive or NoAdditiveGain")
        if not 0.0 <= self.mixture_p <= 1.0:
            raise ValueError("mixture_p must lie in [0, 1]")
        if self.mixture_p < 1.0 and (self.delta is None or not self.delta > 0):
            raise ValueError("delta > 0 is required when mixture_p < 1")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")

    @property
    def additive(self) -> bool:
        return self.mu is not NoAdditiveGain

    def phi(self, s):
        return self.interarrival.lst(s)


@dataclass(frozen=True)
class LatticeParams:
    b: float
    N: int
    lam: float
    q: float
    a: float
    levels: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError("N must be an integer >= 2")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.q >= 0:
            raise ValueError("q must be nonnegative")
        if not self.a > 0:
            raise ValueError("lattice requires a > 0")
        object.__setattr__(self, "N", int(self.N))
        with np.errstate(over="ignore"):  # oversized N is rejected by the solvers
            object.__setattr__(self, "levels", self.b / (1.0 + self.a) ** np.arange(self.N + 1))

    @property
    def c(self) -> float:
        return 1.0 + self.a

    def level(self, n: int) -> float:
        return float(self.levels[n])

    def width(self, m: int) -> float:
        """Length of (L_m, L_{m-1}]."""
        return float(self.levels[m - 1] - self.levels[m])

    def interval_of(self, x: float) -> int:
        """Index m with x in (L_m, L_{m-1}]; 0 for x > b."""
        if x > self.b:
            return 0
        if x <= self.levels[-1]:
            raise DomainError(f"x={x} is at or below L_N={self.levels[-1]}")
        # levels are decreasing; first m with L_m < x
        return int(np.argmax(self.levels < x))


class Drift(enum.Enum):
    Transient = "Transient"
    CertainRuin = "CertainRuin"
    Critical = "Critical"


def classify_drift(params: DualModelParams, rtol: float = 1e-12) -> Drift:
    """Long-run behaviour of the capital process.

    With a > 0 the capital escapes to infinity with positive probability.
    With a = 0 ruin is certain iff the mean interarrival time is at least the
    mean gain; exact equality is reported separately.
    """
    if params.a > 0:
        return Drift.Transient
    m = params.interarrival.mean()
    if params.mixture_p < 1.0:
        mean_gain = params.mixture_p * _mean_c(params) + (1 - params.mixture_p) / params.delta
    else:
        mean_gain = _mean_c(params)
    if math.isclose(m, mean_gain, rel_tol=rtol):
        return Drift.Critical
    return Drift.CertainRuin if m > mean_gain else Drift.Transient


def _mean_c(params: DualModelParams) -> float:
    return 1.0 / params.mu if params.additive else 0.0


def lst_by_quadrature(spec: InterarrivalSpec, s: float, upper: float | None = None) -> float:
    """Quadrature of the transform integral, used to validate lst on the real axis."""
    if isinstance(spec, Deterministic):
        return math.exp(-s * spec.d)
    upper = upper if upper is not None else 60.0 / spec.min_rate() * max(1, getattr(spec, "shape", 1))
    val, _ = integrate.quad(lambda t: math.exp(-s * t) * float(spec.pdf(t)), 0, upper, limit=400, epsabs=1e-13)
    return val


__all__ = [
    "DomainError",
    "NumericalError",
    "Exponential",
    "Erlang",
    "Deterministic",
    "HyperExponential",
    "InterarrivalSpec",
    "lst",
    "lst_derivative",
    "NoAdditiveGain",
    "DualModelParams",
    "LatticeParams",
    "Drift",
    "classify_drift",
]
