"""Protocol semantics: phase encoding, sifting and the three-party bit relation.

Phases are integers counting quarter turns (multiples of pi/2) and all
arithmetic on them is modulo 4.  Nothing here is random; the double-click
rule lives with the simulator.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

QUARTER_TURNS = 4

# quarter-turn -> CSV token
PHASE_TOKENS = ("0", "pi/2", "pi", "3pi/2")


class Basis(enum.Enum):
    X = "X"
    Y = "Y"


class Detector(enum.Enum):
    D1 = 1
    D2 = 2

    def opposite(self) -> "Detector":
        return Detector.D2 if self is Detector.D1 else Detector.D1


class Role(enum.Enum):
    KEY = "key"
    TEST = "test"


class BasisTriple(NamedTuple):
    a: Basis
    b: Basis
    c: Basis

    def __str__(self) -> str:
        return f"{{{self.a.value}a,{self.b.value}b,{self.c.value}c}}"


@dataclass(frozen=True)
class SiftDecision:
    keep: bool
    role: Role | None = None
    flip_charlie: bool = False


_X, _Y = Basis.X, Basis.Y
_SIFT_TABLE = {
    BasisTriple(_X, _X, _X): SiftDecision(True, Role.KEY, False),
    BasisTriple(_X, _Y, _Y): SiftDecision(True, Role.KEY, False),
    BasisTriple(_Y, _X, _Y): SiftDecision(True, Role.TEST, True),
    BasisTriple(_Y, _Y, _X): SiftDecision(True, Role.TEST, False),
}
_DISCARD = SiftDecision(False)


class NonDeterministicInterference(ValueError):
    """Raised when the phase difference is pi/2 or 3pi/2."""


def normalize_phase(quarter_turns: int) -> int:
    return int(quarter_turns) % QUARTER_TURNS


def phase_radians(quarter_turns: int) -> float:
    return normalize_phase(quarter_turns) * math.pi / 2


def phase_token(quarter_turns: int) -> str:
    return PHASE_TOKENS[normalize_phase(quarter_turns)]


def parse_phase_token(token: str) -> int:
    """Inverse of :func:`phase_token`; only the four canonical tokens are accepted."""
    try:
        return PHASE_TOKENS.index(token.strip())
    except ValueError:
        raise ValueError(f"not a quarter-turn phase token: {token!r}") from None


def encode_phase(basis: Basis, bit: int) -> int:
    """Phase (in quarter turns) a player applies for ``bit`` in ``basis``.

    X basis: 0 -> 0, 1 -> pi.  Y basis: 1 -> pi/2, 0 -> 3pi/2.

    >>> encode_phase(Basis.Y, 1)
    1
    >>> encode_phase(Basis.Y, 0)
    3
    """
    if bit not in (0, 1):
        raise ValueError(f"logic bit must be 0 or 1, got {bit!r}")
    if basis is Basis.X:
        return 2 * bit
    return 1 if bit == 1 else 3


def decode_phase(phase: int) -> tuple[Basis, int]:
    """Recover (basis, bit) from a player's modulated phase."""
    phase = normalize_phase(phase)
    return {0: (_X, 0), 2: (_X, 1), 1: (_Y, 1), 3: (_Y, 0)}[phase]


def charlie_phase(basis: Basis) -> int:
    return 0 if basis is Basis.X else 1


def charlie_basis(phase: int) -> Basis:
    """Charlie's basis from his modulation; only 0 and pi/2 are legal."""
    phase = normalize_phase(phase)
    if phase == 0:
        return _X
    if phase == 1:
        return _Y
    raise ValueError(f"Charlie never applies phase {phase_token(phase)}")


def phase_difference(phi_a: int, phi_b: int, phi_c: int) -> int:
    """Relative phase of Bob's pulse (after Charlie's shift) to Alice's."""
    return (phi_b + phi_c - phi_a) % QUARTER_TURNS


def ideal_outcome(delta_phi: int) -> Detector:
    delta_phi = normalize_phase(delta_phi)
    if delta_phi == 0:
        return Detector.D1
    if delta_phi == 2:
        return Detector.D2
    raise NonDeterministicInterference(
        f"non-deterministic interference at phase difference {phase_token(delta_phi)}"
    )


def detector_bit(detector: Detector) -> int:
    return 0 if detector is Detector.D1 else 1


def sift(triple: BasisTriple) -> SiftDecision:
    return _SIFT_TABLE.get(BasisTriple(*triple), _DISCARD)


def expected_charlie_bit(s_a: int, s_b: int) -> int:
    return s_a ^ s_b


def triple_of_phases(phi_a: int, phi_b: int, phi_c: int) -> BasisTriple:
    return BasisTriple(decode_phase(phi_a)[0], decode_phase(phi_b)[0], charlie_basis(phi_c))


def classify_phases(phi_a: int, phi_b: int, phi_c: int) -> tuple[SiftDecision, Detector | None]:
    """Sift decision and the correct (error-free) detector for a phase triple.

    The correct detector is ``None`` for discarded triples.  Charlie's flip
    acts on both the ideal and the recorded bit, so an error is always a
    click on the detector opposite to the ideal one.
    """
    decision = sift(triple_of_phases(phi_a, phi_b, phi_c))
    if not decision.keep:
        return decision, None
    return decision, ideal_outcome(phase_difference(phi_a, phi_b, phi_c))


def all_phase_triples() -> list[tuple[int, int, int]]:
    """Every (phi_a, phi_b, phi_c) the protocol can produce: 4 x 4 x 2 = 32."""
    return [(a, b, c) for a in range(4) for b in range(4) for c in (0, 1)]
