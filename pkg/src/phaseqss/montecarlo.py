"""Stochastic detection engine.

Two modes produce the same :class:`~phaseqss.tally.TallyTable`:

* ``PER_ROUND`` draws bases, bits and click outcomes for every emission.
* ``BATCHED`` computes the exact probability of every (triple, outcome) cell
  and splits ``N`` across cells with a chain of binomial draws, which keeps
  ``N = 1e10`` cheap.

Random streams are derived from the master seed with ``SeedSequence`` spawn
keys feeding a counter-based Philox generator, so each cell (or per-round
chunk) owns an independent substream.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from phaseqss.channel import ChannelParams, _click_array, transmittance
from phaseqss.protocol import Detector, Role, all_phase_triples, classify_phases
from phaseqss.security import ObservedStats
from phaseqss.tally import Counts, TallyTable

MAX_PER_ROUND = 10**7
_CHUNK = 1_000_000
# exact cos(k pi / 2)
_COS_QUARTER = np.array([1.0, 0.0, -1.0, 0.0])

_TRIPLES = all_phase_triples()


class SimMode(enum.Enum):
    PER_ROUND = "per-round"
    BATCHED = "batched"


class DoubleClickPolicy(enum.Enum):
    RANDOM_BIT = "random-bit"


class TallyError(ValueError):
    """Tally holds a phase triple the protocol cannot produce."""


@dataclass(frozen=True)
class SimConfig:
    n_rounds: int
    seed: int = 0
    mode: SimMode = SimMode.BATCHED
    double_click_policy: DoubleClickPolicy = DoubleClickPolicy.RANDOM_BIT

    def __post_init__(self) -> None:
        if self.n_rounds < 0:
            raise ValueError(f"n_rounds must be >= 0, got {self.n_rounds}")
        if self.mode is SimMode.PER_ROUND and self.n_rounds > MAX_PER_ROUND:
            raise ValueError(
                f"per-round mode is limited to {MAX_PER_ROUND} rounds; use batched mode"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def triple_probabilities(p_x: float) -> np.ndarray:
    """Probability of each phase triple in :func:`all_phase_triples` order."""
    p_y = 1.0 - p_x
    player = np.array([p_x / 2, p_y / 2, p_x / 2, p_y / 2])  # phases 0, pi/2, pi, 3pi/2
    charlie = np.array([p_x, p_y])
    return np.array([player[a] * player[b] * charlie[c] for a, b, c in _TRIPLES])


def cell_probabilities(params: ChannelParams) -> np.ndarray:
    """Exact (32, 4) array of P(triple, outcome) for one emission."""
    eta = transmittance(params)
    dphi = np.array([(b + c - a) % 4 for a, b, c in _TRIPLES])
    outcome = _click_array(_COS_QUARTER[dphi], params.mu, eta, params.p_d, params.e_d)
    return triple_probabilities(params.p_x)[:, None] * outcome


def _binomial_chain(rng: np.random.Generator, n: int, probs: np.ndarray) -> np.ndarray:
    # multinomial as sequential conditional binomials
    out = np.zeros(len(probs), dtype=np.int64)
    remaining_n = int(n)
    remaining_p = 1.0
    for i, p in enumerate(probs[:-1]):
        if remaining_n == 0 or remaining_p <= 0:
            break
        q = min(max(p / remaining_p, 0.0), 1.0)
        out[i] = rng.binomial(remaining_n, q)
        remaining_n -= out[i]
        remaining_p -= p
    out[-1] += remaining_n
    return out


def _simulate_batched(params: ChannelParams, config: SimConfig) -> np.ndarray:
    probs = cell_probabilities(params)
    per_triple = probs.sum(axis=1)
    triple_counts = _binomial_chain(_stream(config.seed, 0), config.n_rounds, per_triple)
    cells = np.zeros_like(probs, dtype=np.int64)
    for i, n in enumerate(triple_counts):
        if n:
            cells[i] = _binomial_chain(_stream(config.seed, 1, i), n, probs[i] / per_triple[i])
    return cells


def _simulate_per_round(params: ChannelParams, config: SimConfig) -> np.ndarray:
    eta = transmittance(params)
    outcome_cdf = np.cumsum(
        _click_array(_COS_QUARTER, params.mu, eta, params.p_d, params.e_d), axis=1
    )[:, :3]
    cells = np.zeros(len(_TRIPLES) * 4, dtype=np.int64)
    for chunk, start in enumerate(range(0, config.n_rounds, _CHUNK)):
        n = min(_CHUNK, config.n_rounds - start)
        rng = _stream(config.seed, 2, chunk)
        y_a = rng.random(n) >= params.p_x
        y_b = rng.random(n) >= params.p_x
        y_c = rng.random(n) >= params.p_x
        bit_a = rng.integers(0, 2, n)
        bit_b = rng.integers(0, 2, n)
        # X: 0 -> 0, 1 -> pi ; Y: 1 -> pi/2, 0 -> 3pi/2
        phi_a = np.where(y_a, np.where(bit_a == 1, 1, 3), 2 * bit_a)
        phi_b = np.where(y_b, np.where(bit_b == 1, 1, 3), 2 * bit_b)
        phi_c = y_c.astype(np.int64)
        dphi = (phi_b + phi_c - phi_a) % 4
        u = rng.random(n)
        outcome = (u[:, None] >= outcome_cdf[dphi]).sum(axis=1)
        triple_index = phi_a * 8 + phi_b * 2 + phi_c
        cells += np.bincount(triple_index * 4 + outcome, minlength=cells.size)
    return cells.reshape(len(_TRIPLES), 4)


def simulate(params: ChannelParams, config: SimConfig, *, sifted_only: bool = False) -> TallyTable:
    """Detection tally for ``config.n_rounds`` emissions.

    Deterministic for a fixed ``(params, config)``.  With ``sifted_only`` the
    discarded-basis triples are dropped from the table.
    """
    if config.mode is SimMode.BATCHED:
        cells = _simulate_batched(params, config)
    else:
        cells = _simulate_per_round(params, config)
    entries = {}
    for triple, row in zip(_TRIPLES, cells):
        if sifted_only and not classify_phases(*triple)[0].keep:
            continue
        entries[triple] = Counts(*(int(v) for v in row))
    return TallyTable(entries)


def tally_to_stats(
    tally: TallyTable,
    policy: DoubleClickPolicy = DoubleClickPolicy.RANDOM_BIT,
    seed: int = 0,
) -> ObservedStats:
    """Sift a tally into key/check detection and error counts.

    An error is a click on the detector opposite to the ideal one.  Each
    double click is given a uniformly random bit, i.e. the error count gains
    ``Binomial(both, 1/2)``.
    """
    if policy is not DoubleClickPolicy.RANDOM_BIT:
        raise ValueError(f"unsupported double-click policy {policy!r}")
    rng = _stream(seed, 3)
    n = {Role.KEY: 0, Role.TEST: 0}
    m = {Role.KEY: 0, Role.TEST: 0}
    for triple in tally:
        if len(triple) != 3 or any(not 0 <= p < 4 for p in triple):
            raise TallyError(f"phase triple {triple} is not made of quarter turns")
        try:
            decision, correct = classify_phases(*triple)
        except ValueError as exc:
            raise TallyError(f"unclassifiable triple {triple}: {exc}") from None
        counts = tally[triple]
        if not decision.keep:
            continue
        wrong = counts.d2 if correct is Detector.D1 else counts.d1
        double_errors = int(rng.binomial(counts.both, 0.5)) if counts.both else 0
        n[decision.role] += counts.d1 + counts.d2 + counts.both
        m[decision.role] += wrong + double_errors
    return ObservedStats(n_x=n[Role.KEY], n_y=n[Role.TEST], m_x=m[Role.KEY], m_y=m[Role.TEST])


def cell_sigma(n: int, p: np.ndarray) -> np.ndarray:
    """Binomial standard deviation of each cell count."""
    return np.sqrt(n * p * (1.0 - p))


def expected_cells(params: ChannelParams, n_rounds: int) -> dict[tuple[int, int, int], np.ndarray]:
    probs = cell_probabilities(params)
    return {t: n_rounds * probs[i] for i, t in enumerate(_TRIPLES)}

