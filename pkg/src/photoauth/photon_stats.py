"""Detected-photon statistics at the retina for coherent and single-photon stimuli.

A pulse with incident photon budget ``nbar`` crosses a lossy path of
transmission ``alpha``. For coherent light the detected count is Poisson with
mean ``alpha * nbar``; for a source that emits exactly ``n_exact`` photons it is
binomial ``(n_exact, alpha)``. A spot is perceived when the detected count
reaches the threshold ``K``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import DomainError

DEFAULT_K = 6
PHOTON_BUDGET_CAP = 200.0
SUMMATION_WINDOW_S = 0.4
PMF_TAIL_TOL = 1e-12


@dataclass(frozen=True)
class Coherent:
    """Laser-like stimulus: Poissonian photon number with mean ``nbar``."""

    nbar: float

    def __post_init__(self):
        nbar = float(self.nbar)
        if not math.isfinite(nbar) or nbar < 0:
            raise DomainError(f"coherent mean photon number must be finite and >= 0, got {self.nbar!r}")
        object.__setattr__(self, "nbar", nbar)

    kind = "coherent"

    @property
    def budget(self) -> float:
        return self.nbar


@dataclass(frozen=True)
class SinglePhoton:
    """Stimulus carrying exactly ``n_exact`` photons per pulse."""

    n_exact: int

    def __post_init__(self):
        n = self.n_exact
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            if isinstance(n, float) and n.is_integer():
                n = int(n)
            else:
                raise DomainError(f"single-photon count must be an integer, got {self.n_exact!r}")
        if n < 0:
            raise DomainError(f"single-photon count must be >= 0, got {n}")
        object.__setattr__(self, "n_exact", int(n))

    kind = "single"

    @property
    def budget(self) -> int:
        return self.n_exact


LightSource = Union[Coherent, SinglePhoton]

SOURCE_KINDS = ("coherent", "single")


def make_source(kind: str, budget: float) -> LightSource:
    """Build a source of ``kind`` ('coherent' or 'single') with the given photon budget."""
    if kind == "coherent":
        return Coherent(budget)
    if kind in ("single", "single-photon", "quantum"):
        return SinglePhoton(budget)
    raise DomainError(f"unknown source kind {kind!r}; expected one of {SOURCE_KINDS}")


def check_budget(source: LightSource, cap: float = PHOTON_BUDGET_CAP) -> None:
    if source.budget > cap:
        raise DomainError(f"photon budget {source.budget} exceeds cap {cap}")


@dataclass(frozen=True)
class PerceptionModel:
    """Perception threshold ``K``.

    The pulse duration and summation window only document the regime the
    budget cap comes from; no formula reads them.
    """

    k_threshold: int = DEFAULT_K
    pulse_duration_s: float | None = None
    summation_window_s: float = SUMMATION_WINDOW_S

    def __post_init__(self):
        _check_k(self.k_threshold)


@dataclass(frozen=True)
class DetectionDistribution:
    pmf: np.ndarray
    mean: float
    variance: float
    truncated_at: int | None  # last index kept when the support is infinite

    @property
    def total(self) -> float:
        return float(self.pmf.sum())


class MissFalse(NamedTuple):
    p_high_miss: float
    p_low_seen: float
    u: float


def _check_alpha(alpha: float, name: str = "alpha") -> float:
    a = float(alpha)
    if not (0.0 <= a <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {alpha!r}")
    return a


def _check_k(k: int) -> int:
    if isinstance(k, bool) or int(k) != k or k < 0:
        raise DomainError(f"threshold K must be a non-negative integer, got {k!r}")
    return int(k)


_EXACT_LOG_LIMIT = 5000


def _log_factorial(n: int) -> float:
    # log of the exact integer is correctly rounded; lgamma drifts by ~1e-11 at n ~ 250
    return math.log(math.factorial(n)) if n <= _EXACT_LOG_LIMIT else math.lgamma(n + 1)


def _poisson_log_term(lam: float, n: int) -> float:
    if lam == 0.0:
        return 0.0 if n == 0 else -math.inf
    return -lam + n * math.log(lam) - _log_factorial(n)


def _binomial_log_term(alpha: float, n_exact: int, n: int) -> float:
    if alpha == 0.0:
        return 0.0 if n == 0 else -math.inf
    if alpha == 1.0:
        return 0.0 if n == n_exact else -math.inf
    if n_exact <= _EXACT_LOG_LIMIT:
        log_comb = math.log(math.comb(n_exact, n))
    else:
        log_comb = math.lgamma(n_exact + 1) - math.lgamma(n + 1) - math.lgamma(n_exact - n + 1)
    return log_comb + n * math.log(alpha) + (n_exact - n) * math.log1p(-alpha)


def coherent_detect_pmf(alpha: float, nbar: float, n: int) -> float:
    """P[n photons detected] for coherent light, evaluated in log space."""
    alpha = _check_alpha(alpha)
    nbar = Coherent(nbar).nbar
    if n < 0:
        return 0.0
    return math.exp(_poisson_log_term(alpha * nbar, int(n)))


def single_photon_detect_pmf(alpha: float, n_exact: int, n: int) -> float:
    """P[n photons detected] when exactly ``n_exact`` photons are incident."""
    alpha = _check_alpha(alpha)
    n_exact = SinglePhoton(n_exact).n_exact
    if n < 0 or n > n_exact:
        return 0.0
    return math.exp(_binomial_log_term(alpha, n_exact, int(n)))


def detect_pmf(source: LightSource, alpha: float, n: int) -> float:
    if isinstance(source, Coherent):
        return coherent_detect_pmf(alpha, source.nbar, n)
    return single_photon_detect_pmf(alpha, source.n_exact, n)


def detection_distribution(source: LightSource, alpha: float) -> DetectionDistribution:
    """Full pmf of the detected count.

    The Poisson support is cut once the kept mass exceeds 1 - 1e-12 and the
    dropped tail is too small to shift the variance.
    """
    alpha = _check_alpha(alpha)
    if isinstance(source, SinglePhoton):
        n_exact = source.n_exact
        pmf = np.array([math.exp(_binomial_log_term(alpha, n_exact, n)) for n in range(n_exact + 1)])
        truncated_at = None
    else:
        lam = alpha * source.nbar
        terms = []
        cumulative = 0.0
        n = 0
        t = math.exp(-lam)
        use_logs = t == 0.0  # e^{-lam} underflows only far beyond the photon cap
        while True:
            if use_logs:
                t = math.exp(_poisson_log_term(lam, n))
            elif n > 0:
                t *= lam / n
            terms.append(t)
            cumulative += t
            if cumulative > 1.0 - PMF_TAIL_TOL and n + 1 > lam:
                # past the mode the tail is at most t / (1 - lam/(n+1)); cut once it no
                # longer moves the second moment either
                tail = t / (1.0 - lam / (n + 1))
                if tail * (n + 1 - lam) ** 2 < PMF_TAIL_TOL * 1e-3:
                    break
            n += 1
        pmf = np.array(terms)
        truncated_at = len(terms) - 1
    idx = np.arange(pmf.size)
    mean = float(np.dot(idx, pmf))
    variance = float(np.dot((idx - mean) ** 2, pmf))
    return DetectionDistribution(pmf=pmf, mean=mean, variance=variance, truncated_at=truncated_at)


def prob_below(source: LightSource, alpha: float, k: int) -> float:
    """P[detected < k]: the probability a spot is *not* perceived."""
    alpha = _check_alpha(alpha)
    k = _check_k(k)
    if k == 0:
        return 0.0
    if isinstance(source, Coherent):
        lam = alpha * source.nbar
        # t_{n+1} = t_n * lam / (n + 1), starting from e^{-lam}
        term = math.exp(-lam)
        total = term
        for n in range(1, k):
            term *= lam / n
            total += term
        return min(total, 1.0)
    n_exact = source.n_exact
    if k > n_exact:
        return 1.0
    total = math.fsum(math.exp(_binomial_log_term(alpha, n_exact, n)) for n in range(k))
    return min(total, 1.0)


def p_see(source: LightSource, alpha: float, k: int = DEFAULT_K) -> float:
    """Probability that a pulse from ``source`` on a spot of transmission ``alpha`` is perceived."""
    if _check_k(k) == 0:
        _check_alpha(alpha)
        return 1.0
    return 1.0 - prob_below(source, alpha, k)


def miss_and_false_probs(
    source: LightSource,
    alpha_h: float,
    alpha_l: float,
    k: int = DEFAULT_K,
    *,
    allow_equal: bool = False,
) -> MissFalse:
    """Return (p_H, p_L, u): miss rate on high spots, false-seen rate on low spots, and their sum.

    ``allow_equal`` admits alpha_h == alpha_l, which must give u == 1.
    """
    alpha_h = _check_alpha(alpha_h, "alpha_H")
    alpha_l = _check_alpha(alpha_l, "alpha_L")
    if alpha_l > alpha_h or (alpha_l == alpha_h and not allow_equal):
        raise DomainError(f"alpha_L ({alpha_l}) must be below alpha_H ({alpha_h})")
    below_h = prob_below(source, alpha_h, k)
    below_l = prob_below(source, alpha_l, k)
    p_h = below_h
    p_l = 1.0 - below_l
    # written as 1 - (difference) so equal alphas give exactly 1
    u = 1.0 - (below_l - below_h)
    return MissFalse(p_h, p_l, u)
