"""Finite-key security bounds.

The phase-error rate is inferred from check-round (Y-class) bit errors and
the quantum-coin imbalance; statistical fluctuations are handled with a
Hoeffding-type concentration bound for sums of dependent Bernoulli
variables, applied once on the check-round errors and once on the key-round
phase errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from phaseqss.channel import (
    BasisDependenceTooLarge,
    ChannelParams,
    bit_error_rate_x,
    gain,
    quantum_coin_delta,
    transmittance,
)

MAX_ERROR_RATE = 0.5


@dataclass(frozen=True)
class SecurityEpsilons:
    eps_c: float = 1e-10
    eps_pa: float = 1e-10
    eps: float = 1e-10
    eps_a: float = 1e-10

    def __post_init__(self) -> None:
        for name in ("eps_c", "eps_pa", "eps", "eps_a"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")

    @property
    def eps_s(self) -> float:
        return math.sqrt(self.eps) + self.eps_pa


@dataclass(frozen=True)
class ObservedStats:
    n_x: int
    n_y: int
    m_x: int
    m_y: int

    def __post_init__(self) -> None:
        if self.n_x < 0 or self.n_y < 0:
            raise ValueError("detection counts must be nonnegative")
        if not 0 <= self.m_x <= self.n_x:
            raise ValueError(f"m_x={self.m_x} outside [0, n_x={self.n_x}]")
        if not 0 <= self.m_y <= self.n_y:
            raise ValueError(f"m_y={self.m_y} outside [0, n_y={self.n_y}]")

    @property
    def ebx(self) -> float:
        return self.m_x / self.n_x

    @property
    def eby(self) -> float:
        return self.m_y / self.n_y


@dataclass(frozen=True)
class PhaseErrorChain:
    delta: float
    delta_c_y: float
    delta_c_x: float
    m_y_prime: float
    eby_prime: float
    ep_prime: float
    mp_prime: float
    mp_bar: float
    ep_bar: float


@dataclass(frozen=True)
class KeyResult:
    key_length_bits: int
    rate_per_pulse: float
    leak_ec_fraction: float
    f_e: float


def binary_entropy(x: float) -> float:
    if not 0 <= x <= 1:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0 or x == 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def phase_error_rate(eby: float, delta: float) -> float:
    """Phase-error rate bound from the check-round bit error rate and the coin imbalance.

    Examples
    --------
    >>> phase_error_rate(0.03, 0.0)
    0.03
    >>> round(phase_error_rate(0.0, 0.01), 12)
    0.0396
    """
    if not 0 <= eby <= MAX_ERROR_RATE:
        raise ValueError(f"bit error rate must lie in [0, 0.5], got {eby}")
    if not 0 <= delta <= 0.5:
        raise ValueError(f"coin imbalance must lie in [0, 0.5], got {delta}")
    spread = delta * (1 - delta)
    ep = (
        eby
        + 4 * spread * (1 - 2 * eby)
        + 4 * (1 - 2 * delta) * math.sqrt(spread * eby * (1 - eby))
    )
    return min(ep, MAX_ERROR_RATE)


def concentration_deviation(n: float, eps_a: float) -> float:
    """Deviation sqrt(n ln(1/eps_a) / 2) between a Bernoulli sum and its conditional mean."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if not 0 < eps_a < 1:
        raise ValueError(f"eps_a must lie in (0, 1), got {eps_a}")
    return math.sqrt(n * math.log(1 / eps_a) / 2)


def phase_error_upper_bound(
    stats: ObservedStats,
    mu: float,
    q_mu: float,
    eps: SecurityEpsilons = SecurityEpsilons(),
    *,
    finite: bool = True,
) -> PhaseErrorChain:
    """Upper bound on the observed phase-error rate of the key rounds.

    Steps: bound the expected check-round errors, turn the resulting rate into
    an expected phase-error rate, scale to the key rounds, then bound the
    observed phase errors.  ``finite=False`` drops both concentration terms.

    Raises
    ------
    BasisDependenceTooLarge
        If the coin imbalance implied by ``mu`` and ``q_mu`` exceeds 1/2.
    ZeroDivisionError
        If ``n_x`` or ``n_y`` is zero.
    """
    if stats.n_x <= 0 or stats.n_y <= 0:
        raise ZeroDivisionError(
            f"phase-error bound needs n_x > 0 and n_y > 0 (got {stats.n_x}, {stats.n_y})"
        )
    delta = quantum_coin_delta(mu, q_mu)
    delta_c_y = concentration_deviation(stats.n_y, eps.eps_a) if finite else 0.0
    delta_c_x = concentration_deviation(stats.n_x, eps.eps_a) if finite else 0.0

    m_y_prime = stats.m_y + delta_c_y
    eby_prime = min(m_y_prime / stats.n_y, MAX_ERROR_RATE)
    ep_prime = phase_error_rate(eby_prime, delta)
    mp_prime = stats.n_x * ep_prime
    mp_bar = mp_prime + delta_c_x
    ep_bar = min(mp_bar / stats.n_x, MAX_ERROR_RATE)
    return PhaseErrorChain(
        delta=delta,
        delta_c_y=delta_c_y,
        delta_c_x=delta_c_x,
        m_y_prime=m_y_prime,
        eby_prime=eby_prime,
        ep_prime=ep_prime,
        mp_prime=mp_prime,
        mp_bar=mp_bar,
        ep_bar=ep_bar,
    )


def finite_key_length(
    n_x: int,
    ep_bar: float,
    ebx: float,
    f_e: float = 1.16,
    eps: SecurityEpsilons = SecurityEpsilons(),
    n_total: float | None = None,
) -> KeyResult:
    """Secret key length extractable from ``n_x`` key-round detections.

    ``rate_per_pulse`` is ``l / n_total`` when ``n_total`` is given, else NaN.
    """
    if n_x <= 0:
        raise ValueError(f"n_x must be positive, got {n_x}")
    ep_bar = min(ep_bar, MAX_ERROR_RATE)
    ebx = min(ebx, MAX_ERROR_RATE)
    leak_ec = f_e * binary_entropy(ebx)
    raw = (
        n_x * (1 - binary_entropy(ep_bar) - leak_ec)
        - math.log2(2 / eps.eps_c)
        - math.log2(1 / (4 * eps.eps_pa**2))
    )
    length = max(0, math.floor(raw))
    rate = length / n_total if n_total else math.nan
    return KeyResult(key_length_bits=length, rate_per_pulse=rate, leak_ec_fraction=leak_ec, f_e=f_e)


def asymptotic_key_rate(
    params: ChannelParams, f_e: float = 1.16, *, delta: float | None = None
) -> float:
    """Infinite-key rate per kept round, using E_b^Y = E_b^X.

    ``delta`` overrides the coin imbalance otherwise derived from ``params.mu``.
    """
    eta = transmittance(params)
    q_mu = gain(params.mu, eta, params.p_d)
    if q_mu <= 0:
        return 0.0
    ebx = min(bit_error_rate_x(params.mu, eta, params.p_d, params.e_d), MAX_ERROR_RATE)
    if delta is None:
        try:
            delta = quantum_coin_delta(params.mu, q_mu)
        except BasisDependenceTooLarge:
            return 0.0
    ep = phase_error_rate(ebx, delta)
    rate = q_mu * (1 - f_e * binary_entropy(ebx) - binary_entropy(ep))
    return max(rate, 0.0)
