"""Numerical Laplace inversion: Euler summation and fixed Talbot.

Both methods take a vectorised evaluator ``F`` of complex arrays.  Euler
summation only samples Re(s) > 0; Talbot needs the analytic continuation of
the transform into the left half plane.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import comb

from .model import DomainError
from .transforms import RuinTransform, generalized_ruin_lt, ruin_lt, ruin_time_lt


class Method(enum.Enum):
    EulerSummation = "euler"
    Talbot = "talbot"


@dataclass(frozen=True)
class InversionControl:
    method: Method = Method.EulerSummation
    terms: int = 51
    contour_shift: float = 18.4
    precision_target: float = 1e-7

    def __post_init__(self):
        if self.terms % 2 == 0 or self.terms < 11:
            raise ValueError("terms must be odd and at least 11")
        if isinstance(self.method, str):
            object.__setattr__(self, "method", Method(self.method))

    @property
    def M(self) -> int:
        return (self.terms - 1) // 2


@dataclass(frozen=True)
class InversionResult:
    value: float
    error_estimate: float
    cross_value: float
    disagreement: bool
    clamped: bool = False
    raw_value: float | None = None

    def __float__(self):
        return float(self.value)


@lru_cache(maxsize=None)
def _euler_weights(M: int) -> np.ndarray:
    xi = np.ones(2 * M + 1)
    xi[0] = 0.5
    xi[2 * M] = 2.0**-M
    for k in range(1, M):
        xi[2 * M - k] = xi[2 * M - k + 1] + 2.0**-M * comb(M, k, exact=True)
    signs = (-1.0) ** np.arange(2 * M + 1)
    return signs * xi


def euler_invert(F: Callable, x, M: int = 25, A: float = 18.4) -> np.ndarray:
    """Abate-Whitt Euler summation with 2M+1 terms and contour abscissa A/(2x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    eta = _euler_weights(M)
    k = np.arange(2 * M + 1)
    beta = A / 2 + 1j * np.pi * k
    s = (beta[None, :] / x[:, None]).ravel()
    vals = np.real(np.asarray(F(s))).reshape(x.size, -1)
    return np.exp(A / 2) / x * (vals @ eta)


def talbot_invert(F: Callable, x, M: int = 25) -> np.ndarray:
    """Fixed Talbot contour with M nodes (F must be continued to Re(s) < 0)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k = np.arange(1, M)
    theta = k * np.pi / M
    cot = 1.0 / np.tan(theta)
    delta = np.concatenate([[2.0 * M / 5.0], 2.0 * k * np.pi / 5.0 * (cot + 1j)])
    gamma = np.concatenate(
        [[0.5 * np.exp(delta[0])], (1 + 1j * theta * (1 + cot**2) - 1j * cot) * np.exp(delta[1:])]
    )
    s = (delta[None, :] / x[:, None]).ravel()
    vals = np.asarray(F(s)).reshape(x.size, -1)
    return 2.0 / (5.0 * x) * np.real(vals @ gamma)


def invert(transform: Callable, x, control: InversionControl | None = None,
           continued: Callable | None = None):
    """Invert ``transform`` at x > 0 with an error estimate and a cross-check.

    ``continued`` evaluates the transform's continuation to Re(s) <= 0 and is
    used by Talbot; it defaults to ``transform`` itself.  The result for an
    array ``x`` is a list of InversionResult.
    """
    control = control or InversionControl()
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs <= 0):
        raise DomainError("x must be positive")
    cont = continued or transform
    M, A = control.M, control.contour_shift

    euler = euler_invert(transform, xs, M, A)
    euler_lo = euler_invert(transform, xs, M - 5, A)
    try:
        talbot = talbot_invert(cont, xs, M)
        talbot_lo = talbot_invert(cont, xs, M - 5)
    except (DomainError, ArithmeticError, ValueError):
        talbot = talbot_lo = np.full(xs.shape, np.nan)

    if control.method is Method.EulerSummation:
        main, err, other = euler, np.abs(euler - euler_lo) + np.exp(-A) * np.maximum(1, np.abs(euler)), talbot
    else:
        main, err, other = talbot, np.abs(talbot - talbot_lo), euler
    out = []
    for i in range(xs.size):
        bad = not np.isfinite(other[i]) or abs(main[i] - other[i]) > 10 * control.precision_target
        out.append(InversionResult(float(main[i]), float(err[i]), float(other[i]), bool(bad)))
    return out[0] if scalar else out


def _clamp(res: InversionResult, tol: float) -> InversionResult:
    v = res.value
    if -tol <= v <= 1 + tol:
        return InversionResult(min(max(v, 0.0), 1.0), res.error_estimate, res.cross_value, res.disagreement,
                               False, v)
    warnings.warn(f"inverted probability {v} left [0, 1]; clamped", RuntimeWarning, stacklevel=3)
    return InversionResult(min(max(v, 0.0), 1.0), res.error_estimate, res.cross_value, res.disagreement,
                           True, v)


def ruin_probability(x, rt: RuinTransform, control: InversionControl | None = None, *, detail: bool = False):
    """R(x) by inverting the ruin transform, clamped to [0, 1] with a flag."""
    control = control or InversionControl()
    lt = generalized_ruin_lt if rt.params.mixture_p < 1.0 else ruin_lt

    def F(s):
        return lt(s, rt)

    def G(s):
        return lt(s, rt, continued=True)

    res = invert(F, x, control, continued=G)
    res = [_clamp(r, control.precision_target) for r in np.atleast_1d(res)]
    if np.ndim(x) == 0:
        return res[0] if detail else res[0].value
    return res if detail else np.array([r.value for r in res])


def ruin_time_transform(x, alpha: float, rt: RuinTransform, control: InversionControl | None = None,
                        *, detail: bool = False):
    """E[exp(-alpha tau_x); tau_x < inf] by inverting tau(s, alpha) in s."""
    control = control or InversionControl()
    from .transforms import tau_at_mu

    tau_mu = tau_at_mu(rt.params, alpha, rt.control)

    def F(s):
        return ruin_time_lt(s, alpha, rt, tau_mu=tau_mu)

    def G(s):
        return ruin_time_lt(s, alpha, rt, continued=True, tau_mu=tau_mu)

    res = invert(F, x, control, continued=G)
    res = [_clamp(r, control.precision_target) for r in np.atleast_1d(res)]
    if np.ndim(x) == 0:
        return res[0] if detail else res[0].value
    return res if detail else np.array([r.value for r in res])


__all__ = [
    "Method",
    "InversionControl",
    "InversionResult",
    "euler_invert",
    "talbot_invert",
    "invert",
    "ruin_probability",
    "ruin_time_transform",
]
