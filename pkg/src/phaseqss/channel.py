"""Analytic channel and detector model.

All quantities refer to the symmetric configuration: two arms of equal
length, one pair of identical detectors at Charlie's station.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special, stats


class BasisDependenceTooLarge(ValueError):
    """The quantum-coin imbalance exceeds 1/2 and the phase-error bound is void."""


@dataclass(frozen=True)
class ChannelParams:
    """Physical parameters of one link configuration.

    Parameters
    ----------
    mu : float
        Mean photon number per pulse sent by each player.
    eta_d : float
        Detector efficiency.
    p_d : float
        Dark count probability per gate.
    e_d : float
        Misalignment error rate.
    alpha : float
        Fiber attenuation in dB/km.
    length_km : float
        Total Alice-Bob fiber length; each arm is half of it.
    p_x : float
        Probability of the X basis for every party.
    """

    mu: float = 0.01
    eta_d: float = 0.56
    p_d: float = 1e-8
    e_d: float = 0.02
    alpha: float = 0.167
    length_km: float = 0.0
    p_x: float = 0.8

    def __post_init__(self) -> None:
        if not self.mu >= 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if not 0 <= self.eta_d <= 1:
            raise ValueError(f"eta_d must lie in [0, 1], got {self.eta_d}")
        if not 0 <= self.p_d < 1:
            raise ValueError(f"p_d must lie in [0, 1), got {self.p_d}")
        if not 0 <= self.e_d <= 0.5:
            raise ValueError(f"e_d must lie in [0, 0.5], got {self.e_d}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.length_km >= 0:
            raise ValueError(f"length_km must be >= 0, got {self.length_km}")
        if not 0 < self.p_x < 1:
            raise ValueError(f"p_x must lie in (0, 1), got {self.p_x}")

    @property
    def p_y(self) -> float:
        return 1.0 - self.p_x

    @property
    def loss_db(self) -> float:
        return self.alpha * self.length_km

    def with_loss_db(self, loss_db: float) -> "ChannelParams":
        """Same parameters with the fiber length set to give ``loss_db`` end to end."""
        if self.alpha <= 0:
            raise ValueError("alpha must be positive to convert a loss into a length")
        return replace(self, length_km=loss_db / self.alpha)

    def derived(self) -> "DerivedChannelQuantities":
        eta = transmittance(self)
        q_mu = gain(self.mu, eta, self.p_d)
        overlap = coherent_overlap(self.mu)
        delta = (1.0 - overlap) / (2.0 * q_mu) if q_mu > 0 else math.inf
        ebx = bit_error_rate_x(self.mu, eta, self.p_d, self.e_d) if q_mu > 0 else math.nan
        return DerivedChannelQuantities(eta=eta, q_mu=q_mu, ebx=ebx, delta=delta, overlap=overlap)


@dataclass(frozen=True)
class DerivedChannelQuantities:
    eta: float
    q_mu: float
    ebx: float
    delta: float
    overlap: float


@dataclass(frozen=True)
class ClickDistribution:
    p_only_d1: float
    p_only_d2: float
    p_both: float
    p_none: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_only_d1, self.p_only_d2, self.p_both, self.p_none])


def transmittance(params: ChannelParams) -> float:
    """Per-arm transmittance including detector efficiency.

    ``length_km`` is the whole Alice-Bob distance, so the exponent uses /20:
    each arm carries half the fiber.
    """
    return params.eta_d * 10.0 ** (-params.alpha * params.length_km / 20.0)


def gain(mu: float, eta: float, p_d: float) -> float:
    """Per-round probability of a conclusive detection in kept rounds."""
    return (1.0 - p_d) * (1.0 - (1.0 - 2.0 * p_d) * math.exp(-2.0 * mu * eta))


def basis_class_probabilities(p_x: float) -> tuple[float, float]:
    """Probabilities that a round falls in the key class and in the check class.

    Key: {Xa,Xb,Xc} or {Xa,Yb,Yc}.  Check: {Ya,Xb,Yc} or {Ya,Yb,Xc}.
    """
    p_y = 1.0 - p_x
    return p_x**3 + p_x * p_y**2, 2.0 * p_x * p_y**2


def total_gain(mu: float, eta: float, p_d: float, p_x: float) -> float:
    """Gain per emitted pulse counting every sifted (key or test) round.

    This is the alternative normalization of the gain; the per-round kept
    gain of :func:`gain` is the default everywhere else.
    """
    return sum(basis_class_probabilities(p_x)) * gain(mu, eta, p_d)


def bit_error_rate_x(mu: float, eta: float, p_d: float, e_d: float) -> float:
    q_mu = gain(mu, eta, p_d)
    if q_mu <= 0:
        raise ZeroDivisionError("undefined error rate: zero gain")
    decay = math.exp(-2.0 * mu * eta)
    numerator = e_d * (1.0 - p_d) * (1.0 - (1.0 - p_d) * decay) + (1.0 - e_d) * p_d * (1.0 - p_d) * decay
    return numerator / q_mu


def click_probabilities(
    delta_phi: float, mu: float, eta: float, p_d: float, e_d: float
) -> ClickDistribution:
    """Joint click distribution of D1/D2 for a given interference phase (radians).

    Misalignment enters as a fringe visibility ``1 - 2 e_d``; the two detectors
    click independently given their Poisson means.
    """
    return ClickDistribution(*_click_array(math.cos(delta_phi), mu, eta, p_d, e_d))


def _click_array(cos_phi, mu, eta, p_d, e_d) -> np.ndarray:
    # broadcasts over cos_phi; columns are (d1_only, d2_only, both, none)
    cos_phi = np.asarray(cos_phi, dtype=float)
    visibility = 1.0 - 2.0 * e_d
    nu1 = mu * eta * (1.0 + visibility * cos_phi)
    nu2 = mu * eta * (1.0 - visibility * cos_phi)
    silent1 = (1.0 - p_d) * np.exp(-nu1)
    silent2 = (1.0 - p_d) * np.exp(-nu2)
    click1 = -np.expm1(-nu1) + p_d * np.exp(-nu1)
    click2 = -np.expm1(-nu2) + p_d * np.exp(-nu2)
    return np.stack([click1 * silent2, silent1 * click2, click1 * click2, silent1 * silent2], axis=-1)


def coherent_overlap(mu: float) -> float:
    """Real overlap between the X- and Y-basis source states at intensity ``mu``.

    With alpha = sqrt(mu) and coherent-state overlaps
    <i a|a> = <-i a|-a> = exp(-mu (1 + i)) and <i a|-a> = <-i a|a> = exp(-mu (1 - i)),
    the qubit factors (1 +/- i)/2 pair up to give exp(-mu) (cos mu + sin mu).
    """
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    return math.exp(-mu) * (math.cos(mu) + math.sin(mu))


def fock_cutoff(mu: float, tail: float = 1e-15) -> int:
    """Smallest photon-number cutoff whose neglected Poisson tail is below ``tail``."""
    if mu == 0:
        return 1
    return max(int(stats.poisson.isf(tail, mu)) + 2, 40)


def _coherent_ket(alpha: complex, n_cut: int) -> np.ndarray:
    n = np.arange(n_cut)
    log_norm = -0.5 * abs(alpha) ** 2 - 0.5 * special.gammaln(n + 1)
    if alpha == 0:
        ket = np.zeros(n_cut, dtype=complex)
        ket[0] = 1.0
        return ket
    return np.exp(log_norm) * alpha**n


def source_states(mu: float, n_cut: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Truncated qubit (x) oscillator vectors of the X- and Y-basis source states."""
    n_cut = fock_cutoff(mu) if n_cut is None else n_cut
    alpha = math.sqrt(mu)
    s = 1 / math.sqrt(2)
    zero_x, one_x = np.array([s, s]), np.array([s, -s])
    zero_y, one_y = np.array([s, 1j * s]), np.array([s, -1j * s])

    def ket(qubit, a):
        return np.kron(qubit, _coherent_ket(a, n_cut))

    psi_x = (ket(zero_x, alpha) + ket(one_x, -alpha)) * s
    psi_y = (ket(one_y, 1j * alpha) + ket(zero_y, -1j * alpha)) * s
    return psi_x, psi_y


def fock_overlap(mu: float, n_cut: int | None = None) -> complex:
    """Brute-force <Psi_y|Psi_x> in a truncated Fock space (independent check)."""
    psi_x, psi_y = source_states(mu, n_cut)
    return complex(np.vdot(psi_y, psi_x))


def quantum_coin_delta(mu: float, q_mu: float) -> float:
    """Imbalance of the quantum coin from ``1 - 2 Q Delta = overlap``."""
    if not q_mu > 0:
        raise BasisDependenceTooLarge("basis dependence too large: gain is zero")
    delta = (1.0 - coherent_overlap(mu)) / (2.0 * q_mu)
    if delta > 0.5:
        raise BasisDependenceTooLarge(
            f"basis dependence too large: Delta={delta:.4g} > 1/2 (mu={mu:g}, Q={q_mu:.4g})"
        )
    return max(delta, 0.0)
