"""Finite key-rate maximization over intensity and basis bias.

The production search is differential evolution over ``(log10 mu, p_x)``
followed by a Nelder-Mead polish.  :func:`grid_search` is an independent
exhaustive log-grid with golden-section refinement used to validate it.

Both maximize the real-valued key length before flooring/clamping, so the
objective stays informative where no key survives; infeasible points where
the coin imbalance exceeds 1/2 get a penalty that decreases with the
imbalance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize as sopt

from phaseqss.channel import (
    ChannelParams,
    basis_class_probabilities,
    bit_error_rate_x,
    coherent_overlap,
    gain,
    transmittance,
)
from phaseqss.security import (
    ObservedStats,
    SecurityEpsilons,
    asymptotic_key_rate,
    binary_entropy,
    phase_error_upper_bound,
)

GOLDEN = (math.sqrt(5) - 1) / 2
_PENALTY = -1e30


class Objective(enum.Enum):
    FINITE = "finite"
    ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class SearchSpace:
    mu_range: tuple[float, float] = (1e-6, 0.5)
    px_range: tuple[float, float] | float = (0.5, 0.99)
    objective: Objective = Objective.FINITE

    def __post_init__(self) -> None:
        lo, hi = self.mu_range
        if not 0 < lo <= hi:
            raise ValueError(f"mu_range must satisfy 0 < lo <= hi, got {self.mu_range}")
        plo, phi = self.px_bounds
        if not 0 < plo <= phi < 1:
            raise ValueError(f"px_range must lie inside (0, 1), got {self.px_range}")

    @property
    def px_bounds(self) -> tuple[float, float]:
        if isinstance(self.px_range, (int, float)):
            return float(self.px_range), float(self.px_range)
        return tuple(self.px_range)  # type: ignore[return-value]


@dataclass(frozen=True)
class Optimum:
    mu: float
    p_x: float
    rate: float
    key_bits: int = 0

    @property
    def feasible(self) -> bool:
        return self.rate > 0


INFEASIBLE = Optimum(mu=math.nan, p_x=math.nan, rate=0.0, key_bits=0)


def expected_stats(params: ChannelParams, n_total: float) -> ObservedStats:
    """Noise-free expectation of the sifted counts for ``n_total`` emissions.

    The check rounds are assumed to see the same bit error rate as the key
    rounds (the channel model is basis symmetric).
    """
    eta = transmittance(params)
    q_mu = gain(params.mu, eta, params.p_d)
    if q_mu <= 0:
        return ObservedStats(0, 0, 0, 0)
    ebx = bit_error_rate_x(params.mu, eta, params.p_d, params.e_d)
    p_key, p_check = basis_class_probabilities(params.p_x)
    n_x = n_total * p_key * q_mu
    n_y = n_total * p_check * q_mu
    return ObservedStats(
        n_x=round(n_x), n_y=round(n_y), m_x=round(n_x * ebx), m_y=round(n_y * ebx)
    )


def raw_key_length(
    params: ChannelParams,
    n_total: float,
    f_e: float = 1.16,
    eps: SecurityEpsilons = SecurityEpsilons(),
) -> float:
    """Unfloored, unclamped key length (may be negative); penalties when undefined."""
    stats = expected_stats(params, n_total)
    if stats.n_x == 0 or stats.n_y == 0:
        return _PENALTY
    q_mu = gain(params.mu, transmittance(params), params.p_d)
    delta = (1.0 - coherent_overlap(params.mu)) / (2.0 * q_mu)
    if delta > 0.5:
        return _PENALTY * 1e-10 * delta
    chain = phase_error_upper_bound(stats, params.mu, q_mu, eps)
    return (
        stats.n_x * (1 - binary_entropy(chain.ep_bar) - f_e * binary_entropy(min(stats.ebx, 0.5)))
        - math.log2(2 / eps.eps_c)
        - math.log2(1 / (4 * eps.eps_pa**2))
    )


def finite_key_bits(params: ChannelParams, n_total: float, f_e: float = 1.16,
                    eps: SecurityEpsilons = SecurityEpsilons()) -> int:
    return max(0, math.floor(raw_key_length(params, n_total, f_e, eps)))


def _score(params: ChannelParams, n_total: float, f_e: float, eps: SecurityEpsilons,
           objective: Objective) -> float:
    if objective is Objective.ASYMPTOTIC:
        return asymptotic_key_rate(params, f_e) * basis_class_probabilities(params.p_x)[0]
    return raw_key_length(params, n_total, f_e, eps) / n_total


def _result(params: ChannelParams, n_total: float, f_e: float, eps: SecurityEpsilons,
            objective: Objective) -> Optimum:
    if objective is Objective.ASYMPTOTIC:
        rate = _score(params, n_total, f_e, eps, objective)
        bits = 0
    else:
        bits = finite_key_bits(params, n_total, f_e, eps)
        rate = bits / n_total
    if rate <= 0:
        return INFEASIBLE
    return Optimum(mu=float(params.mu), p_x=float(params.p_x), rate=float(rate), key_bits=bits)


def optimize(
    space: SearchSpace,
    fixed: ChannelParams,
    n_total: float,
    f_e: float = 1.16,
    eps: SecurityEpsilons = SecurityEpsilons(),
    seed: int = 0,
) -> Optimum:
    """Maximize the key rate per pulse over ``space``; other parameters come from ``fixed``.

    Returns :data:`INFEASIBLE` (NaN parameters, zero rate) when no point of
    the space yields a key.
    """
    log_lo, log_hi = (math.log10(v) for v in space.mu_range)
    px_lo, px_hi = space.px_bounds

    def unpack(x: np.ndarray) -> ChannelParams:
        log_mu = log_lo if log_lo == log_hi else float(np.clip(x[0], log_lo, log_hi))
        px = px_lo if px_lo == px_hi else float(np.clip(x[-1], px_lo, px_hi))
        return replace(fixed, mu=10.0**log_mu, p_x=px)

    bounds = []
    if log_lo != log_hi:
        bounds.append((log_lo, log_hi))
    if px_lo != px_hi:
        bounds.append((px_lo, px_hi))

    def cost(x: np.ndarray) -> float:
        return -_score(unpack(x), n_total, f_e, eps, space.objective)

    if not bounds:
        return _result(unpack(np.empty(0)), n_total, f_e, eps, space.objective)

    found = sopt.differential_evolution(
        cost, bounds, seed=seed, popsize=20, maxiter=400, tol=1e-12, atol=0,
        mutation=(0.5, 1.0), recombination=0.7, init="sobol", polish=False,
    )
    polished = sopt.minimize(
        cost, found.x, method="Nelder-Mead",
        options={"xatol": 1e-7, "fatol": 0.0, "maxiter": 2000},
    )
    best_x = polished.x if polished.fun <= found.fun else found.x
    return _result(unpack(best_x), n_total, f_e, eps, space.objective)


def golden_section_max(f, a: float, b: float, tol: float = 1e-9, max_iter: int = 200) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * (1 + abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def grid_search(
    space: SearchSpace,
    fixed: ChannelParams,
    n_total: float,
    f_e: float = 1.16,
    eps: SecurityEpsilons = SecurityEpsilons(),
    n_mu: int = 200,
    n_px: int = 50,
    refine: bool = True,
) -> Optimum:
    """Exhaustive log-grid over mu (and linear grid over p_x) plus golden-section refinement."""
    log_lo, log_hi = (math.log10(v) for v in space.mu_range)
    px_lo, px_hi = space.px_bounds
    log_mus = np.linspace(log_lo, log_hi, n_mu if log_lo != log_hi else 1)
    pxs = np.linspace(px_lo, px_hi, n_px if px_lo != px_hi else 1)

    def score(log_mu: float, px: float) -> float:
        return _score(replace(fixed, mu=10.0**log_mu, p_x=px), n_total, f_e, eps, space.objective)

    # row-major scan with strict '>' keeps the smallest mu, then smallest p_x, on ties
    best = (-math.inf, 0, 0)
    for i, lm in enumerate(log_mus):
        for j, px in enumerate(pxs):
            s = score(lm, px)
            if s > best[0]:
                best = (s, i, j)
    _, i, j = best
    log_mu, px = float(log_mus[i]), float(pxs[j])

    if refine:
        for _ in range(3):
            if len(log_mus) > 1:
                step = log_mus[1] - log_mus[0]
                a, b = max(log_lo, log_mu - step), min(log_hi, log_mu + step)
                cand, val = golden_section_max(lambda t: score(t, px), a, b)
                if val >= score(log_mu, px):
                    log_mu = cand
            if len(pxs) > 1:
                step = pxs[1] - pxs[0]
                a, b = max(px_lo, px - step), min(px_hi, px + step)
                cand, val = golden_section_max(lambda p: score(log_mu, p), a, b)
                if val >= score(log_mu, px):
                    px = cand
    return _result(replace(fixed, mu=10.0**log_mu, p_x=px), n_total, f_e, eps, space.objective)
