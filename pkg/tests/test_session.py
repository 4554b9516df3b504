import io
import math

import numpy as np
import pytest
from scipy import stats as sps

from photoauth.alphamap import classify, two_class_map
from photoauth.errors import DomainError, InsufficientSpotsError, NonAbsorptionError, ScriptExhaustedError
from photoauth.photon_stats import Coherent, PerceptionModel, SinglePhoton, miss_and_false_probs
from photoauth.protocol_math import StoppingDesign, absorption_prob_up, alice_round_success, expected_rounds
from photoauth.session import (
    AUTHENTICATED,
    REJECTED,
    SUMMARY_COLUMNS,
    TRACE_COLUMNS,
    FixedMode,
    ModeSet,
    Scripted,
    SessionStats,
    SimAlice,
    SimEve,
    UniformRandom,
    alice_response,
    block_rng,
    eve_response,
    monte_carlo,
    run_session,
    sample_h,
    simulate_sessions,
    write_summary_csv,
    write_trace_csv,
)

NBAR_C = 69.3147
CMAP = classify(two_class_map(5, 5, 0.16, 0.04))


def within_3_sigma(hits, n, p):
    return abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


# --- sampling ----------------------------------------------------------------------

def test_sample_h_uniform():
    rng = np.random.default_rng(1)
    h = sample_h(6, rng, 700_000)
    counts = np.bincount(h, minlength=7)
    assert counts.size == 7
    assert sps.chisquare(counts).pvalue > 1e-3


def test_sample_h_domain():
    with pytest.raises(DomainError):
        sample_h(0, np.random.default_rng(0))


def test_block_streams_are_distinct_and_reproducible():
    a = block_rng(5, 0).random(4)
    assert np.array_equal(a, block_rng(5, 0).random(4))
    assert not np.array_equal(a, block_rng(5, 1).random(4))
    assert not np.array_equal(a, block_rng(6, 0).random(4))


# --- Eve ---------------------------------------------------------------------------

@pytest.mark.parametrize("strategy", [UniformRandom(), FixedMode(0), FixedMode(3), FixedMode(6), ModeSet((1, 2))])
def test_every_eve_strategy_wins_one_round_in_n_plus_one(strategy):
    one_round = StoppingDesign(6, 1, -1)
    st = monte_carlo(SimEve(strategy), one_round, 200_000, master_seed=3)
    assert within_3_sigma(st.accepted, st.sessions, 1 / 7)
    assert st.mean_rounds == 1


class SpyStrategy:
    def __init__(self):
        self.calls = []

    def answer(self, *args, **kwargs):
        self.calls.append((args, kwargs))
        n_spots, size, rng = args
        return rng.integers(0, n_spots + 1, size=size)


def test_eve_sees_only_the_spot_count():
    spy = SpyStrategy()
    run_session(SimEve(spy), StoppingDesign(6, 3, -3), CMAP, rng=1)
    assert spy.calls
    for args, kwargs in spy.calls:
        assert kwargs == {}
        assert args[0] == 6 and args[1] == 1
        assert isinstance(args[2], np.random.Generator)


def test_eve_strategy_domain():
    rng = np.random.default_rng(0)
    with pytest.raises(DomainError):
        eve_response(6, FixedMode(7), rng)
    with pytest.raises(DomainError):
        eve_response(6, ModeSet(()), rng)
    assert eve_response(6, FixedMode(2), rng, 3).tolist() == [2, 2, 2]


# --- Alice -------------------------------------------------------------------------

@pytest.mark.parametrize("source", [Coherent(NBAR_C), SinglePhoton(68)])
def test_alice_per_spot_rates(source):
    rng = np.random.default_rng(8)
    n = 400_000
    mf = miss_and_false_probs(source, 0.16, 0.04, 6)
    seen_h = alice_response(np.full((n, 1), 0.16), source, PerceptionModel(), rng)
    seen_l = alice_response(np.full((n, 1), 0.04), source, PerceptionModel(), rng)
    assert within_3_sigma(n - seen_h.sum(), n, mf.p_high_miss)
    assert within_3_sigma(seen_l.sum(), n, mf.p_low_seen)


@pytest.mark.parametrize("source", [Coherent(NBAR_C), SinglePhoton(68)])
def test_alice_round_success_empirical(source):
    u = miss_and_false_probs(source, 0.16, 0.04, 6).u
    st = monte_carlo(SimAlice(source), StoppingDesign(6, 1, -1), 200_000, 11, CMAP)
    assert within_3_sigma(st.accepted, st.sessions, alice_round_success(6, u))


def test_alice_lights_correct_classes():
    rec = run_session(SimAlice(Coherent(NBAR_C)), StoppingDesign(6, 13, -13), CMAP, rng=4)
    high = set(CMAP.high_spots)
    for it in rec.rounds:
        assert len(it.lit_spots) == 6
        assert len({s for s, _ in it.lit_spots}) == 6
        assert sum(flag for _, flag in it.lit_spots) == it.h
        for spot, flag in it.lit_spots:
            assert (spot in high) == flag


def test_alice_needs_map():
    with pytest.raises(DomainError):
        run_session(SimAlice(Coherent(60)), StoppingDesign(6, 3, -3))


def test_map_too_small_for_n():
    with pytest.raises(InsufficientSpotsError):
        run_session(SimAlice(Coherent(60)), StoppingDesign(13, 3, -3), CMAP, rng=0)


# --- scripted ------------------------------------------------------------------------

def test_scripted_all_correct_authenticates_in_s_plus_rounds():
    rec = run_session(Scripted(("correct",) * 13), StoppingDesign(6, 13, -13), rng=2)
    assert rec.outcome == AUTHENTICATED
    assert rec.round_count == 13
    assert rec.s_trajectory == tuple(range(1, 14))


def test_scripted_all_wrong_rejects():
    rec = run_session(Scripted(("wrong",) * 13), StoppingDesign(6, 13, -13), rng=2)
    assert rec.outcome == REJECTED
    assert rec.s_trajectory[-1] == -13


def test_scripted_literal_counts():
    rec = run_session(Scripted((0, 1, 2, 3, 4, 5, 6) * 5), StoppingDesign(6, 2, -2), rng=5)
    for it in rec.rounds:
        assert it.correct == (it.response == it.h)


def test_scripted_exhaustion():
    with pytest.raises(ScriptExhaustedError):
        run_session(Scripted(("correct",) * 3), StoppingDesign(6, 13, -13), rng=0)


def test_scripted_from_lines():
    s = Scripted.from_lines(["correct", "# comment", "3  # literal", "", "wrong"])
    assert s.responses == ("correct", 3, "wrong")
    with pytest.raises(DomainError):
        Scripted(("maybe",))


def test_round_cap():
    script = Scripted(("correct", "wrong") * 40)
    with pytest.raises(NonAbsorptionError):
        run_session(script, StoppingDesign(6, 2, -2), rng=0, round_cap=50)


# --- records -----------------------------------------------------------------------

def test_trajectory_invariants():
    design = StoppingDesign(6, 4, -3)
    for subject, cmap in ((SimAlice(Coherent(NBAR_C)), CMAP), (SimEve(), None)):
        for rec in simulate_sessions(subject, design, 300, 17, cmap):
            traj = (0,) + rec.s_trajectory
            assert all(abs(b - a) == 1 for a, b in zip(traj, traj[1:]))
            assert all(design.s_minus < s < design.s_plus for s in traj[:-1])
            assert traj[-1] in (design.s_plus, design.s_minus)
            assert (rec.outcome == AUTHENTICATED) == (traj[-1] == design.s_plus)
            assert rec.round_count == len(rec.s_trajectory)
            for it, a, b in zip(rec.rounds, traj, traj[1:]):
                assert (b - a == 1) == it.correct


# --- determinism -------------------------------------------------------------------

def test_session_depends_only_on_seed_and_index():
    design = StoppingDesign(6, 13, -13)
    subject = SimAlice(SinglePhoton(68))
    one = simulate_sessions(subject, design, 1, 99, CMAP)
    many = simulate_sessions(subject, design, 1000, 99, CMAP)
    assert one[0] == many[0]
    assert simulate_sessions(subject, design, 1000, 99, CMAP) == many


def test_monte_carlo_prefix_consistency():
    design = StoppingDesign(6, 3, -3)
    recs = simulate_sessions(SimEve(), design, 5000, 21)
    st = monte_carlo(SimEve(), design, 5000, 21)
    assert st.accepted == sum(r.outcome == AUTHENTICATED for r in recs)
    assert st.sum_rounds == sum(r.round_count for r in recs)


def test_worker_count_does_not_change_results():
    design = StoppingDesign(6, 13, -13)
    subject = SimAlice(Coherent(NBAR_C))
    serial = monte_carlo(subject, design, 20_000, 7, CMAP, workers=1)
    parallel = monte_carlo(subject, design, 20_000, 7, CMAP, workers=4)
    assert serial == parallel


def test_monte_carlo_domain():
    with pytest.raises(DomainError):
        monte_carlo(SimEve(), StoppingDesign(6, 3, -3), 0, 1)


# --- statistics ------------------------------------------------------------------------

def test_stats_merge_is_associative_and_commutative():
    a = SessionStats.of(np.array([3, 5, 7]), np.array([True, False, True]))
    b = SessionStats.of(np.array([13]), np.array([True]))
    c = SessionStats.of(np.array([1, 1]), np.array([False, False]))
    assert (a + b) + c == a + (b + c) == c + b + a
    t = a + b + c
    assert t.sessions == 6 and t.accepted == 3 and t.rejected == 3
    assert t.mean_rounds == 30 / 6
    assert t.sd_rounds == pytest.approx(np.std([3, 5, 7, 13, 1, 1], ddof=1), rel=1e-14)


def test_wilson_interval_contains_rate():
    st = SessionStats(1000, 143, 1000, 1000)
    lo, hi = st.ci95_acceptance
    assert lo < 0.143 < hi
    assert st.ci95_rounds == (1.0, 1.0)


def test_eve_walk_against_ruin_formula():
    design = StoppingDesign(6, 2, -2)
    st = monte_carlo(SimEve(), design, 200_000, 31)
    assert within_3_sigma(st.accepted, st.sessions, absorption_prob_up(1 / 7, 2, -2))


def test_alice_mean_rounds_against_exact():
    u = miss_and_false_probs(SinglePhoton(68), 0.16, 0.04, 6).u
    design = StoppingDesign.from_barriers(6, 13, -11, u=u)
    st = monte_carlo(SimAlice(SinglePhoton(68)), design, 20_000, 5, CMAP)
    exact = expected_rounds(alice_round_success(6, u), 13, -11)
    assert abs(st.mean_rounds - exact) < 4 * st.sd_rounds / math.sqrt(st.sessions)


# --- CSV -------------------------------------------------------------------------------

def test_trace_and_summary_csv():
    recs = simulate_sessions(SimEve(), StoppingDesign(6, 2, -2), 3, 1)
    buf = io.StringIO()
    write_trace_csv(recs, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(TRACE_COLUMNS)
    assert len(lines) == 1 + sum(r.round_count for r in recs)
    buf = io.StringIO()
    write_summary_csv(SessionStats(4, 1, 10, 30), buf)
    head, row = buf.getvalue().splitlines()
    assert head == ",".join(SUMMARY_COLUMNS)
    assert row.split(",")[:4] == ["4", "1", "3", "2.5"]
