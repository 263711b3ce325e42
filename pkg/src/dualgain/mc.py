"""Monte Carlo oracles for ruin, lattice exit and dividend functionals.

Every path owns a xoshiro256** stream seeded from (seed, path index) through
splitmix64, and per-path results are written to arrays that are reduced in
path order.  Estimates are therefore bit-identical for any number of worker
threads.  Kernels release the GIL and are fanned out over fixed-size blocks
with a thread pool.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np
from scipy import optimize, stats

from .model import (
    KIND_DETERMINISTIC,
    KIND_ERLANG,
    KIND_EXPONENTIAL,
    DualModelParams,
    LatticeParams,
    lst_derivative,
)
from .brownian import BrownianParams

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO53 = 1.0 / 9007199254740992.0

FLAG_OK = 0
FLAG_ESCAPED = 1
FLAG_TIME_CAP = 2


# ---------------------------------------------------------------------------
# random numbers


@numba.njit(inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@numba.njit(inline="always")
def _splitmix(z):
    z = z + _GOLDEN
    x = z
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return z, x ^ (x >> np.uint64(31))


@numba.njit(inline="always")
def _seed_state(seed, path, st):
    z = np.uint64(seed) ^ (np.uint64(path) * _GOLDEN)
    for i in range(4):
        z, st[i] = _splitmix(z)


@numba.njit(inline="always")
def _next(st):
    result = _rotl(st[1] * np.uint64(5), 7) * np.uint64(9)
    t = st[1] << np.uint64(17)
    st[2] ^= st[0]
    st[3] ^= st[1]
    st[1] ^= st[2]
    st[0] ^= st[3]
    st[2] ^= t
    st[3] = _rotl(st[3], 45)
    return result


@numba.njit(inline="always")
def _uniform(st):
    return float(_next(st) >> np.uint64(11)) * _TWO53


@numba.njit(inline="always")
def _expo(st):
    return -math.log1p(-_uniform(st))


@numba.njit(inline="always")
def _normal_pair(st):
    u1 = 1.0 - _uniform(st)  # in (0, 1]
    u2 = _uniform(st)
    r = math.sqrt(-2.0 * math.log(u1))
    return r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)


@numba.njit(inline="always")
def _interarrival(st, kind, kp):
    if kind == KIND_EXPONENTIAL:
        return _expo(st) / kp[0]
    if kind == KIND_ERLANG:
        total = 0.0
        for _ in range(int(kp[0])):
            total += _expo(st)
        return total / kp[1]
    if kind == KIND_DETERMINISTIC:
        return kp[0]
    k = int(kp[0])
    u = _uniform(st)
    acc = 0.0
    for i in range(k):
        acc += kp[1 + i]
        if u < acc or i == k - 1:
            return _expo(st) / kp[1 + k + i]
    return 0.0


# ---------------------------------------------------------------------------
# kernels


@numba.njit(nogil=True, cache=True)
def _ruin_kernel(start, seed, x0, init_rate, alpha, a, mu, p, delta, kind, kp, escape_mult,
                 time_cap, out, flags):
    st = np.empty(4, dtype=np.uint64)
    for i in range(out.shape[0]):
        _seed_state(seed, start + i, st)
        x = x0
        if init_rate > 0.0:
            x = _expo(st) / init_rate
        escape = escape_mult * max(x, 1.0)
        level = x
        t = 0.0
        val = 0.0
        flag = FLAG_OK
        while True:
            gap = _interarrival(st, kind, kp)
            if gap >= level:
                val = math.exp(-alpha * (t + level))
                break
            t += gap
            level -= gap
            if p >= 1.0 or _uniform(st) < p:
                gain = _expo(st) / mu if mu > 0.0 else 0.0
                level = (1.0 + a) * level + gain
            else:
                level = level + _expo(st) / delta
            if level > escape:
                flag = FLAG_ESCAPED
                break
            if t > time_cap:
                flag = FLAG_TIME_CAP
                break
        out[i] = val
        flags[i] = flag


@numba.njit(nogil=True, cache=True)
def _lattice_kernel(start, seed, x0, b, low, lam, q, a, time_cap, rho, mu_out, v, flags):
    st = np.empty(4, dtype=np.uint64)
    c = 1.0 + a
    for i in range(rho.shape[0]):
        _seed_state(seed, start + i, st)
        level = x0
        t = 0.0
        r_val = 0.0
        m_val = 0.0
        div = 0.0
        flag = FLAG_OK
        resolved = False
        if level >= b:
            div += level - b
            level = b
            m_val = 1.0
            resolved = True
        while True:
            gap = _expo(st) / lam
            if gap >= level - low:
                if not resolved:
                    r_val = math.exp(-q * (t + level - low))
                break
            t += gap
            level = c * (level - gap)
            if level > b:
                disc = math.exp(-q * t)
                div += disc * (level - b)
                level = b
                if not resolved:
                    m_val = disc
                    resolved = True
            if t > time_cap:
                flag = FLAG_TIME_CAP
                break
        rho[i] = r_val
        mu_out[i] = m_val
        v[i] = div
        flags[i] = flag


@numba.njit(nogil=True, cache=True)
def _brownian_kernel(start, seed, x0, b, low, lam, q, a, eta, sigma, dt, time_cap, rho, v, exit_lt,
                     flags):
    st = np.empty(4, dtype=np.uint64)
    c = 1.0 + a
    for i in range(rho.shape[0]):
        _seed_state(seed, start + i, st)
        level = x0
        t = 0.0
        r_val = 0.0
        div = 0.0
        e_val = 0.0
        flag = FLAG_OK
        resolved = False
        if level >= b:
            div += level - b
            level = b
            resolved = True
        next_jump = _expo(st) / lam if lam > 0.0 else math.inf
        have = False
        spare = 0.0
        while True:
            h = dt
            jump_now = False
            if t + h >= next_jump:
                h = next_jump - t
                jump_now = True
            if have:
                z = spare
                have = False
            else:
                z, spare = _normal_pair(st)
                have = True
            level += eta * h + sigma * math.sqrt(h) * z
            t += h
            if level <= low:
                d = math.exp(-q * t)
                e_val = d
                if not resolved:
                    r_val = d
                break
            if level >= b:
                div += math.exp(-q * t) * (level - b)
                level = b
                resolved = True
            if jump_now:
                level *= c
                if level > b:
                    div += math.exp(-q * t) * (level - b)
                    level = b
                    resolved = True
                next_jump = t + _expo(st) / lam
            if t > time_cap:
                flag = FLAG_TIME_CAP
                break
        rho[i] = r_val
        v[i] = div
        exit_lt[i] = e_val
        flags[i] = flag


# ---------------------------------------------------------------------------
# configuration, fan-out and reduction


def _default_workers() -> int:
    env = os.environ.get("DUALGAIN_THREADS", "0").strip() or "0"
    n = int(env)
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class MCConfig:
    paths: int = 1_000_000
    seed: int = 20240601
    escape_multiple: float = 1e3
    time_cap: float = 1e6
    euler_dt: float = 1e-4
    workers: int = 0  # 0: DUALGAIN_THREADS or the CPU count
    block: int = 8192

    def __post_init__(self):
        if self.paths < 1000:
            raise ValueError("paths must be at least 1000")
        if not self.euler_dt > 0:
            raise ValueError("euler_dt must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def n_workers(self) -> int:
        return self.workers if self.workers > 0 else _default_workers()


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_paths: int
    n_censored: int
    censor_bound: float = 0.0
    n_escaped: int = 0
    n_time_capped: int = 0

    def distance(self, value: float, allowance: float = 0.0) -> float:
        """|value - mean| in units of stderr after removing bound and allowance."""
        slack = abs(value - self.mean) - self.censor_bound - allowance
        if slack <= 0:
            return 0.0
        return math.inf if self.stderr == 0 else slack / self.stderr

    def agrees(self, value: float, k: float = 3.0, allowance: float = 0.0) -> bool:
        return abs(value - self.mean) <= k * self.stderr + self.censor_bound + allowance


def _fan_out(kernel, cfg: MCConfig, outputs, *args):
    """Run ``kernel(start, seed, *args, *output_slices)`` over blocks of paths."""
    n = cfg.paths
    starts = range(0, n, cfg.block)

    def run(s):
        e = min(s + cfg.block, n)
        kernel(s, np.uint64(cfg.seed), *args, *[o[s:e] for o in outputs])

    workers = cfg.n_workers()
    if workers == 1:
        for s in starts:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(run, starts))


def _estimate(values: np.ndarray, flags: np.ndarray, bound_per_escape: float = 1.0,
              bound_per_timecap: float = 1.0) -> MCEstimate:
    n = values.size
    mean = float(np.sum(values) / n)
    var = float(np.sum((values - mean) ** 2) / (n - 1))
    esc = int(np.count_nonzero(flags == FLAG_ESCAPED))
    cap = int(np.count_nonzero(flags == FLAG_TIME_CAP))
    bound = (esc * bound_per_escape + cap * bound_per_timecap) / n
    return MCEstimate(mean, math.sqrt(var / n), n, esc + cap, bound, esc, cap)


# ---------------------------------------------------------------------------
# ruin bounds for censored paths


def escape_ruin_bound(params: DualModelParams, level: float) -> float:
    """Upper bound on the ruin probability from any capital >= level.

    a > 0: the first interarrival that eats a fraction kappa of the current
    capital must happen; before it the capital grows geometrically, so the
    bound is a sum of survival-function values at geometrically growing
    arguments.  a = 0: Lundberg-type bound phi(-theta) exp(-theta level).
    """
    spec = params.interarrival
    if params.a > 0:
        p = params.mixture_p
        best = 1.0
        for kappa in (0.05, 0.1, 0.2, 0.3, 0.5):
            g_up = (1.0 + params.a) * (1.0 - kappa)
            g_dn = 1.0 - kappa
            if p * math.log(g_up) + (1 - p) * math.log(g_dn) <= 0:
                continue
            total = 0.0
            for k in range(2000):
                if p >= 1.0:
                    term = float(spec.sf(kappa * level * g_up**k))
                else:
                    B = np.arange(k + 1)
                    pm = stats.binom.pmf(B, k, p)
                    term = float(np.sum(pm * spec.sf(kappa * level * g_up**B * g_dn ** (k - B))))
                total += term
                if term < 1e-18 * max(total, 1e-300) or total >= 1.0:
                    break
            best = min(best, total)
        return min(best, 1.0)

    # a = 0: solve phi(-theta) E[exp(-theta C)] = 1 for theta > 0
    def jump_lst(th):
        if params.mixture_p < 1.0:
            cpart = params.mu / (params.mu + th) if params.additive else 1.0
            return params.mixture_p * cpart + (1 - params.mixture_p) * params.delta / (params.delta + th)
        return params.mu / (params.mu + th) if params.additive else 1.0

    def f(th):
        return math.log(float(np.real(spec.lst(-th, continued=True)))) + math.log(jump_lst(th))

    upper = spec.min_rate()
    if not math.isfinite(upper):
        upper = 1e3
    lo, hi = 1e-9 * upper, upper * (1 - 1e-12)
    try:
        if f(lo) >= 0 or float(np.real(lst_derivative(spec, 0))) >= 0:
            return 1.0
        if f(hi) <= 0:
            return 1.0
        th = optimize.brentq(f, lo, hi)
    except (ValueError, ArithmeticError):
        return 1.0
    return min(1.0, float(np.real(spec.lst(-th, continued=True))) * math.exp(-th * level))


# ---------------------------------------------------------------------------
# public simulators


def simulate_ruin(params: DualModelParams, x: float, alpha: float = 0.0, cfg: MCConfig | None = None,
                  *, initial_rate: float = 0.0) -> MCEstimate:
    """Estimate E[exp(-alpha tau_x); tau_x < inf] by exact event-driven paths.

    With ``initial_rate = s > 0`` the initial capital is drawn from Exp(s)
    instead, and the estimate divided by s is an unbiased estimate of the
    Laplace transform in x at s.
    """
    cfg = cfg or MCConfig()
    if initial_rate <= 0 and not x > 0:
        raise ValueError("x must be positive")
    kind, kp = params.interarrival.kernel()
    mu = float(params.mu) if params.additive else -1.0
    delta = float(params.delta) if params.delta is not None else 1.0
    out = np.empty(cfg.paths)
    flags = np.empty(cfg.paths, dtype=np.int8)
    _fan_out(_ruin_kernel, cfg, (out, flags), float(x if initial_rate <= 0 else 0.0), float(initial_rate),
             float(alpha), float(params.a), mu, float(params.mixture_p), delta, kind, kp,
             float(cfg.escape_multiple), float(cfg.time_cap))
    escape_level = cfg.escape_multiple * (max(x, 1.0) if initial_rate <= 0 else 1.0)
    bound = escape_ruin_bound(params, escape_level) if np.any(flags == FLAG_ESCAPED) else 0.0
    return _estimate(out, flags, bound, 1.0)


def simulate_lattice(params: LatticeParams, x: float, cfg: MCConfig | None = None):
    """(rho, mu, v) estimates from one ensemble of exact event-driven paths."""
    cfg = cfg or MCConfig()
    low = params.level(params.N)
    if not low < x:
        raise ValueError("x must exceed L_N")
    n = cfg.paths
    rho, mu, v = np.empty(n), np.empty(n), np.empty(n)
    flags = np.empty(n, dtype=np.int8)
    _fan_out(_lattice_kernel, cfg, (rho, mu, v, flags), float(x), float(params.b), float(low),
             float(params.lam), float(params.q), float(params.a), float(cfg.time_cap))
    tail = math.exp(-params.q * cfg.time_cap)
    return _estimate(rho, flags, 0, tail), _estimate(mu, flags, 0, tail), _estimate(v, flags, 0, tail)


def simulate_brownian_lattice(params: BrownianParams, x: float, cfg: MCConfig | None = None,
                              *, with_exit: bool = False):
    """(rho, v) estimates for the jump-diffusion with reflection at b (Euler scheme).

    ``with_exit=True`` also returns E[exp(-q d_N)] for the reflected process,
    the quantity behind the reflected exit transform.
    """
    cfg = cfg or MCConfig(paths=200_000)
    low = float(params.levels[-1])
    if not low < x:
        raise ValueError("x must exceed L_N")
    n = cfg.paths
    rho, v, ex = np.empty(n), np.empty(n), np.empty(n)
    flags = np.empty(n, dtype=np.int8)
    _fan_out(_brownian_kernel, cfg, (rho, v, ex, flags), float(x), float(params.b), low, float(params.lam),
             float(params.q), float(params.a), float(params.eta), float(params.sigma), float(cfg.euler_dt),
             float(cfg.time_cap))
    tail = math.exp(-params.q * cfg.time_cap)
    out = (_estimate(rho, flags, 0, tail), _estimate(v, flags, 0, tail))
    if with_exit:
        out = out + (_estimate(ex, flags, 0, tail),)
    return out


def euler_allowance(sigma: float, dt: float) -> float:
    """Size of the O(sqrt(dt)) barrier-monitoring bias, in capital units."""
    # expected overshoot of a discretely monitored Brownian path
    return 0.5826 * sigma * math.sqrt(dt)


__all__ = [
    "MCConfig",
    "MCEstimate",
    "simulate_ruin",
    "simulate_lattice",
    "simulate_brownian_lattice",
    "escape_ruin_bound",
    "euler_allowance",
]
