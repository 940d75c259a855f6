import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from phaseqss.protocol import (
    Basis,
    BasisTriple,
    Detector,
    NonDeterministicInterference,
    Role,
    charlie_phase,
    classify_phases,
    decode_phase,
    detector_bit,
    encode_phase,
    expected_charlie_bit,
    ideal_outcome,
    parse_phase_token,
    phase_difference,
    phase_token,
    sift,
)

X, Y = Basis.X, Basis.Y
PI_2, PI, PI3_2 = 1, 2, 3


@pytest.mark.parametrize(
    "basis, bit, phase",
    [(X, 0, 0), (X, 1, PI), (Y, 1, PI_2), (Y, 0, PI3_2)],
)
def test_encode_phase(basis, bit, phase):
    assert encode_phase(basis, bit) == phase
    assert decode_phase(phase) == (basis, bit)


def test_encode_phase_is_a_bijection():
    images = {encode_phase(b, s) for b in Basis for s in (0, 1)}
    assert images == {0, 1, 2, 3}


def test_encode_phase_rejects_non_bits():
    with pytest.raises(ValueError):
        encode_phase(X, 2)


def test_charlie_phase():
    assert charlie_phase(X) == 0
    assert charlie_phase(Y) == PI_2
    assert charlie_phase(Y) == charlie_phase(Y)


@pytest.mark.parametrize(
    "phases, expected",
    [((0, PI, 0), PI), ((0, 0, 0), 0), ((PI_2, 0, PI_2), 0)],
)
def test_phase_difference(phases, expected):
    assert phase_difference(*phases) == expected


@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(0, 2), st.integers(-3, 3))
def test_phase_difference_is_periodic(a, b, c, which, turns):
    shifted = [a, b, c]
    shifted[which] += 4 * turns
    assert phase_difference(*shifted) == phase_difference(a, b, c)


def test_ideal_outcome():
    assert ideal_outcome(0) is Detector.D1
    assert ideal_outcome(PI) is Detector.D2
    for bad in (PI_2, PI3_2):
        with pytest.raises(NonDeterministicInterference, match="non-deterministic"):
            ideal_outcome(bad)


def test_sift_examples():
    assert sift(BasisTriple(X, X, X)).keep
    assert sift(BasisTriple(X, X, X)).role is Role.KEY
    assert not sift(BasisTriple(X, X, X)).flip_charlie
    flip = sift(BasisTriple(Y, X, Y))
    assert (flip.keep, flip.role, flip.flip_charlie) == (True, Role.TEST, True)
    assert not sift(BasisTriple(X, X, Y)).keep


def test_sift_partition():
    decisions = [sift(BasisTriple(*t)) for t in itertools.product(Basis, repeat=3)]
    assert sum(d.role is Role.KEY for d in decisions) == 2
    assert sum(d.role is Role.TEST for d in decisions) == 2
    assert sum(not d.keep for d in decisions) == 4
    assert sum(d.flip_charlie for d in decisions) == 1


@pytest.mark.parametrize("s_a, s_b, s_c", [(0, 0, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1)])
def test_expected_charlie_bit(s_a, s_b, s_c):
    assert expected_charlie_bit(s_a, s_b) == s_c


KEPT = [t for t in map(lambda t: BasisTriple(*t), itertools.product(Basis, repeat=3)) if sift(t).keep]


@pytest.mark.parametrize("triple", KEPT, ids=str)
@pytest.mark.parametrize("s_a, s_b", list(itertools.product((0, 1), repeat=2)))
def test_kept_rounds_satisfy_xor_correlation(triple, s_a, s_b):
    decision = sift(triple)
    dphi = phase_difference(encode_phase(triple.a, s_a), encode_phase(triple.b, s_b), charlie_phase(triple.c))
    bit = detector_bit(ideal_outcome(dphi))
    if decision.flip_charlie:
        bit ^= 1
    assert bit == expected_charlie_bit(s_a, s_b)


def test_discarded_triples_are_non_deterministic_or_unused():
    # every discarded triple has at least one bit pair with a pi/2 phase difference
    for t in itertools.product(Basis, repeat=3):
        triple = BasisTriple(*t)
        if sift(triple).keep:
            continue
        dphis = {
            phase_difference(encode_phase(triple.a, a), encode_phase(triple.b, b), charlie_phase(triple.c))
            for a in (0, 1) for b in (0, 1)
        }
        assert dphis <= {1, 3}


def test_classify_phases_examples():
    # (pi/2, 0, pi/2) is a flipped check round whose correct detector is D1
    decision, correct = classify_phases(PI_2, 0, PI_2)
    assert decision.role is Role.TEST and decision.flip_charlie
    assert correct is Detector.D1
    decision, correct = classify_phases(0, PI_2, 0)
    assert not decision.keep and correct is None
    with pytest.raises(ValueError):
        classify_phases(0, 0, PI)


def test_phase_tokens_round_trip():
    for k in range(4):
        assert parse_phase_token(phase_token(k)) == k
    with pytest.raises(ValueError):
        parse_phase_token("pi/3")
