import numpy as np
import pytest

from phaseqss.channel import ChannelParams
from phaseqss.experiment import load_fixture
from phaseqss.montecarlo import (
    MAX_PER_ROUND,
    SimConfig,
    SimMode,
    TallyError,
    cell_probabilities,
    cell_sigma,
    simulate,
    tally_to_stats,
    triple_probabilities,
)
from phaseqss.protocol import all_phase_triples, classify_phases
from phaseqss.tally import Counts, TallyTable


def _cells(tally):
    return np.array([tally[t] for t in all_phase_triples()], dtype=float)


def test_probabilities_sum_to_one():
    assert triple_probabilities(0.8).sum() == pytest.approx(1.0, abs=1e-15)
    params = ChannelParams(p_x=0.7, mu=0.3, length_km=5)
    assert cell_probabilities(params).sum() == pytest.approx(1.0, abs=1e-12)


def test_per_round_guard():
    with pytest.raises(ValueError):
        SimConfig(n_rounds=MAX_PER_ROUND + 1, mode=SimMode.PER_ROUND)
    SimConfig(n_rounds=MAX_PER_ROUND + 1, mode=SimMode.BATCHED)


@pytest.mark.parametrize("mode", list(SimMode))
def test_counts_are_conserved(bright_params, mode):
    tally = simulate(bright_params, SimConfig(n_rounds=200_000, seed=5, mode=mode))
    assert tally.total_rounds == 200_000
    assert len(tally) == 32
    stats = tally_to_stats(tally)
    assert stats.n_x + stats.n_y <= tally.total_clicks


@pytest.mark.parametrize("mode", list(SimMode))
def test_same_seed_same_tally(bright_params, mode):
    config = SimConfig(n_rounds=100_000, seed=1234, mode=mode)
    a, b = simulate(bright_params, config), simulate(bright_params, config)
    assert a == b
    assert a.to_csv() == b.to_csv()
    other = simulate(bright_params, SimConfig(n_rounds=100_000, seed=1235, mode=mode))
    assert other != a


@pytest.mark.parametrize("mode", list(SimMode))
def test_noiseless_runs_are_error_free(noiseless_params, mode):
    tally = simulate(noiseless_params, SimConfig(n_rounds=300_000, seed=9, mode=mode))
    stats = tally_to_stats(tally)
    assert stats.n_x > 0 and stats.n_y > 0
    assert stats.m_x == 0 and stats.m_y == 0
    for triple in tally:
        decision, _ = classify_phases(*triple)
        if decision.keep:
            assert tally[triple].both == 0


def test_batched_cells_within_five_sigma(bright_params):
    n = 10**6
    tally = simulate(bright_params, SimConfig(n_rounds=n, seed=3))
    p = cell_probabilities(bright_params)
    assert np.all(np.abs(_cells(tally) - n * p) <= 5 * cell_sigma(n, p))


def test_modes_agree_statistically(bright_params):
    n = 10**6
    batched = _cells(simulate(bright_params, SimConfig(n_rounds=n, seed=11)))
    per_round = _cells(simulate(bright_params, SimConfig(n_rounds=n, seed=11, mode=SimMode.PER_ROUND)))
    p = cell_probabilities(bright_params)
    # difference of two independent binomials
    assert np.all(np.abs(batched - per_round) <= 3 * np.sqrt(2) * cell_sigma(n, p) + 1)


def test_huge_batched_run_is_cheap(curve_params):
    tally = simulate(curve_params, SimConfig(n_rounds=10**10, seed=0))
    assert tally.total_rounds == 10**10


def test_sifted_only_drops_discarded_triples(bright_params):
    tally = simulate(bright_params, SimConfig(n_rounds=10_000, seed=2), sifted_only=True)
    assert len(tally) == 16


def test_only_none_outcomes_give_empty_stats():
    tally = TallyTable({(0, 0, 0): Counts(none=50), (1, 1, 0): Counts(none=3)})
    stats = tally_to_stats(tally)
    assert (stats.n_x, stats.n_y) == (0, 0)


def test_single_cell():
    stats = tally_to_stats(TallyTable({(0, 2, 0): Counts(d2=7)}))
    assert (stats.n_x, stats.m_x, stats.n_y) == (7, 0, 0)


def test_double_clicks_split_half_and_half():
    stats = tally_to_stats(TallyTable({(0, 0, 0): Counts(both=100_000)}), seed=4)
    assert stats.n_x == 100_000
    assert abs(stats.m_x - 50_000) <= 5 * np.sqrt(25_000)


def test_tally_from_counts_20db():
    stats = tally_to_stats(load_fixture(20))
    assert (stats.n_x, stats.n_y, stats.m_x, stats.m_y) == (2776599, 315364, 4416, 297)


def test_unclassifiable_phase_is_rejected():
    with pytest.raises(TallyError):
        tally_to_stats(TallyTable({(0, 0, 2): Counts(d1=1)}))
    with pytest.raises(TallyError):
        tally_to_stats(TallyTable({(0, 5, 0): Counts(d1=1)}))


def test_merge_is_associative_and_commutative(bright_params):
    a, b, c = (simulate(bright_params, SimConfig(n_rounds=1000, seed=s)) for s in (1, 2, 3))
    assert a.merge(b) == b.merge(a)
    assert (a + b) + c == a + (b + c)
    assert (a + b).total_rounds == 2000
