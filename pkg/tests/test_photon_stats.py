import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photoauth.errors import DomainError
from photoauth.photon_stats import (
    Coherent,
    PerceptionModel,
    SinglePhoton,
    coherent_detect_pmf,
    detection_distribution,
    make_source,
    miss_and_false_probs,
    p_see,
    prob_below,
    single_photon_detect_pmf,
)

alphas = st.floats(0.0, 1.0)


def brute_force_loss_pmf(alpha, n_exact):
    """Enumerate all 2^n survive/lose patterns of the incident photons."""
    patterns = np.arange(2**n_exact, dtype=np.uint32)
    survived = np.zeros(patterns.size, dtype=np.int64)
    for bit in range(n_exact):
        survived += (patterns >> bit) & 1
    weights = alpha ** survived.astype(float) * (1 - alpha) ** (n_exact - survived).astype(float)
    return np.bincount(survived, weights=weights, minlength=n_exact + 1)


# --- sources ---------------------------------------------------------------------

def test_source_validation():
    with pytest.raises(DomainError):
        Coherent(-1.0)
    with pytest.raises(DomainError):
        Coherent(float("inf"))
    with pytest.raises(DomainError):
        SinglePhoton(2.5)
    with pytest.raises(DomainError):
        SinglePhoton(-3)
    assert SinglePhoton(60.0).n_exact == 60
    assert make_source("single", 68) == SinglePhoton(68)
    with pytest.raises(DomainError):
        make_source("thermal", 10)


def test_perception_default_threshold():
    assert PerceptionModel().k_threshold == 6
    with pytest.raises(DomainError):
        PerceptionModel(-1)


# --- pmfs --------------------------------------------------------------------------

def test_coherent_pmf_at_zero():
    assert coherent_detect_pmf(0.1, 10, 0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert coherent_detect_pmf(0.1, 10, 0) == pytest.approx(0.367879, abs=1e-6)


def test_coherent_pmf_direct_term():
    # e^-9.6 9.6^9 / 9!, evaluated at 40 digits
    assert coherent_detect_pmf(0.16, 60, 9) == pytest.approx(0.12925609709588381732, rel=1e-13)
    direct = math.exp(-9.6) * 9.6**9 / math.factorial(9)
    assert coherent_detect_pmf(0.16, 60, 9) == pytest.approx(direct, rel=1e-13)


def test_coherent_pmf_large_n_is_finite():
    v = coherent_detect_pmf(1.0, 500, 500)
    assert 0 < v < 1
    assert v == pytest.approx(1 / math.sqrt(2 * math.pi * 500), rel=1e-3)


@pytest.mark.parametrize("alpha,nbar", [(0.0, 10), (0.16, 60), (0.04, 69.4), (0.25, 200), (0.9, 200), (1.0, 3.3)])
def test_coherent_normalization_and_moments(alpha, nbar):
    d = detection_distribution(Coherent(nbar), alpha)
    assert abs(d.total - 1.0) <= 1e-12
    assert d.mean == pytest.approx(alpha * nbar, abs=1e-9)
    assert d.variance == pytest.approx(alpha * nbar, abs=1e-9)


def test_coherent_truncation_point_is_recorded():
    d = detection_distribution(Coherent(200), 0.9)
    assert d.truncated_at == d.pmf.size - 1
    assert d.pmf[-1] < 1e-15
    assert math.fsum(d.pmf[: d.truncated_at]) > 1 - 1e-12


def test_single_photon_lossless_point_mass():
    assert single_photon_detect_pmf(1.0, 60, 60) == 1.0
    assert all(single_photon_detect_pmf(1.0, 60, n) == 0.0 for n in range(60))


def test_single_photon_symmetric():
    assert single_photon_detect_pmf(0.5, 2, 1) == pytest.approx(0.5, abs=1e-15)
    assert single_photon_detect_pmf(0.5, 2, 3) == 0.0


def test_single_photon_large_budget_stable():
    total = math.fsum(single_photon_detect_pmf(0.3, 1000, n) for n in range(1001))
    assert total == pytest.approx(1.0, abs=1e-12)
    assert single_photon_detect_pmf(0.9, 1000, 0) == 0.0  # 0.1^1000 underflows cleanly


@pytest.mark.parametrize("alpha,n_exact", [(0.0, 5), (0.16, 60), (0.04, 68), (0.5, 200), (1.0, 7)])
def test_single_photon_normalization_and_moments(alpha, n_exact):
    d = detection_distribution(SinglePhoton(n_exact), alpha)
    assert abs(d.total - 1.0) <= 1e-12
    assert d.mean == pytest.approx(alpha * n_exact, abs=1e-9)
    assert d.variance == pytest.approx(alpha * (1 - alpha) * n_exact, abs=1e-9)


def test_single_photon_narrower_than_coherent():
    c = detection_distribution(Coherent(60), 0.16)
    q = detection_distribution(SinglePhoton(60), 0.16)
    assert c.mean == pytest.approx(9.6, abs=1e-9)
    assert q.mean == pytest.approx(9.6, abs=1e-9)
    assert q.variance / c.variance == pytest.approx(0.84, abs=1e-9)


@pytest.mark.parametrize("n_exact", [0, 1, 5, 13, 20])
@pytest.mark.parametrize("alpha", [0.04, 0.16, 0.5, 0.93])
def test_single_photon_matches_loss_pattern_enumeration(alpha, n_exact):
    oracle = brute_force_loss_pmf(alpha, n_exact)
    got = np.array([single_photon_detect_pmf(alpha, n_exact, n) for n in range(n_exact + 1)])
    np.testing.assert_allclose(got, oracle, rtol=0, atol=1e-12)


def test_domain_errors():
    with pytest.raises(DomainError):
        coherent_detect_pmf(1.2, 10, 0)
    with pytest.raises(DomainError):
        coherent_detect_pmf(0.1, -1, 0)
    with pytest.raises(DomainError):
        single_photon_detect_pmf(-0.1, 10, 0)
    with pytest.raises(DomainError):
        p_see(Coherent(10), 0.1, -1)


# --- perception --------------------------------------------------------------------

def test_p_see_no_light():
    assert p_see(Coherent(0), 0.3, 6) == 0.0
    assert p_see(SinglePhoton(0), 0.3, 6) == 0.0


@given(alphas, st.floats(0, 200), st.integers(0, 200))
def test_p_see_zero_threshold_is_one(alpha, nbar, n_exact):
    assert p_see(Coherent(nbar), alpha, 0) == 1.0
    assert p_see(SinglePhoton(n_exact), alpha, 0) == 1.0


def test_p_see_six_term_oracle():
    # 1 - sum_{n<6} e^-6 6^n / n!
    lam = 6.0
    below = math.exp(-lam) * (1 + lam + lam**2 / 2 + lam**3 / 6 + lam**4 / 24 + lam**5 / 120)
    assert p_see(Coherent(60), 0.10, 6) == pytest.approx(1 - below, abs=1e-14)
    assert p_see(Coherent(60), 0.10, 6) == pytest.approx(0.55432035863538876, abs=1e-14)


def test_single_photon_threshold_above_budget():
    assert p_see(SinglePhoton(5), 1.0, 6) == 0.0
    assert p_see(SinglePhoton(6), 1.0, 6) == 1.0


@settings(max_examples=200)
@given(st.floats(0.1, 150), st.floats(0.001, 1.0), st.integers(1, 30))
def test_coherent_scale_invariance(nbar, alpha, k):
    base = p_see(Coherent(nbar), alpha, k)
    for c in (0.5, 2.0, 10.0):
        if alpha / c <= 1.0:
            assert p_see(Coherent(c * nbar), alpha / c, k) == pytest.approx(base, abs=1e-12)


@settings(max_examples=100)
@given(alphas, st.integers(0, 150), st.integers(1, 12))
def test_p_see_monotone(alpha, n, k):
    for src, bigger in ((Coherent(n), Coherent(n + 1.5)), (SinglePhoton(n), SinglePhoton(n + 1))):
        assert p_see(bigger, alpha, k) >= p_see(src, alpha, k) - 1e-15
        assert p_see(src, alpha, k + 1) <= p_see(src, alpha, k) + 1e-15
        assert p_see(src, min(1.0, alpha + 0.05), k) >= p_see(src, alpha, k) - 1e-15


def test_prob_below_complements_p_see():
    for src in (Coherent(69.4), SinglePhoton(68)):
        for k in range(10):
            assert prob_below(src, 0.16, k) + p_see(src, 0.16, k) == pytest.approx(1.0, abs=1e-15)


# --- miss and false probabilities -------------------------------------------------

@given(alphas, st.floats(0, 200), st.integers(0, 200), st.integers(0, 20))
def test_equal_alphas_give_u_one(alpha, nbar, n_exact, k):
    assert miss_and_false_probs(Coherent(nbar), alpha, alpha, k, allow_equal=True).u == 1.0
    assert miss_and_false_probs(SinglePhoton(n_exact), alpha, alpha, k, allow_equal=True).u == 1.0


def test_alpha_order_is_enforced():
    with pytest.raises(DomainError):
        miss_and_false_probs(Coherent(60), 0.04, 0.16, 6)
    with pytest.raises(DomainError):
        miss_and_false_probs(Coherent(60), 0.1, 0.1, 6)


def test_u_at_reference_optima():
    pc = miss_and_false_probs(Coherent(69.4), 0.16, 0.04, 6)
    pq = miss_and_false_probs(SinglePhoton(68), 0.16, 0.04, 6)
    # reference values are rounded to four places (u_q = 0.083849 prints as 0.0839)
    assert pc.u == pytest.approx(0.0983, abs=1e-4)
    assert pq.u == pytest.approx(0.0839, abs=1e-4)
    assert pc.u == pytest.approx(pc.p_high_miss + pc.p_low_seen, abs=1e-15)
    for r in (pc, pq):
        assert 0 <= r.p_high_miss <= 1 and 0 <= r.p_low_seen <= 1
