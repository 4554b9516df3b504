"""Closed-form round and session statistics for the spot-counting protocol.

Each round lights ``N`` spots, ``H ~ Uniform{0..N}`` of them high-alpha. Alice
answers correctly when her missed high spots equal her falsely seen low spots;
Eve, who cannot tell spots apart, is right with probability ``1/(N+1)``. The
score ``S`` then performs a +-1 walk between absorbing barriers ``S- < 0 < S+``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateDesignError, DomainError, DriftError, SizeError

BRUTE_FORCE_MAX_N = 14
_SNAP = 1e-9


def _check_prob(x: float, name: str) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {x!r}")
    return x


def _check_n(n: int, minimum: int = 0, name: str = "N") -> int:
    if isinstance(n, bool) or int(n) != n or n < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {n!r}")
    return int(n)


def _equal_count_prob(n: int, s: float) -> float:
    # [1 - (1 - s)^(n+1)] / ((n+1) s) for s in [0, 2]
    if s == 0.0:
        return 1.0
    if s <= 1.0:
        numerator = -math.expm1((n + 1) * math.log1p(-s)) if s < 1.0 else 1.0
    else:
        numerator = 1.0 - (1.0 - s) ** (n + 1)
    return numerator / ((n + 1) * s)


def equal_errors_prob(n: int, p: float, q: float) -> float:
    """P[E_fn = E_fp] when H is uniform on {0..n} and the errors are Bin(H, p), Bin(n-H, q)."""
    n = _check_n(n)
    p = _check_prob(p, "p")
    q = _check_prob(q, "q")
    return _equal_count_prob(n, p + q)


def equal_errors_prob_sum(n: int, p: float, q: float) -> float:
    """Same probability by the explicit double sum over H = k and E_fn = E_fp = j."""
    n = _check_n(n)
    if n > BRUTE_FORCE_MAX_N:
        raise SizeError(f"brute-force enumeration limited to N <= {BRUTE_FORCE_MAX_N}, got {n}")
    p = _check_prob(p, "p")
    q = _check_prob(q, "q")
    terms = []
    for k in range(n + 1):
        for j in range(min(k, n - k) + 1):
            terms.append(
                math.comb(k, j) * math.comb(n - k, j)
                * p**j * (1 - p) ** (k - j) * q**j * (1 - q) ** (n - k - j)
            )
    return math.fsum(terms) / (n + 1)


def gamma(n: int, p: float, q: float) -> float:
    """gamma_n from gamma_n = (2-p-q) gamma_{n-1} + (p+q-1) gamma_{n-2}, gamma_0 = 1, gamma_1 = 2-(p+q)."""
    n = _check_n(n)
    s = _check_prob(p, "p") + _check_prob(q, "q")
    prev, cur = 1.0, 2.0 - s
    if n == 0:
        return prev
    for _ in range(2, n + 1):
        prev, cur = cur, (2.0 - s) * cur + (s - 1.0) * prev
    return cur


def equal_errors_prob_recursive(n: int, p: float, q: float) -> float:
    """Same probability as gamma_n / (n + 1)."""
    return gamma(n, p, q) / (int(n) + 1)


def alice_round_success(n_spots: int, u: float) -> float:
    """P_A(N, u) = [1 - (1-u)^(N+1)] / ((N+1) u)."""
    n_spots = _check_n(n_spots, 1, "n_spots")
    u = float(u)
    if not (0.0 <= u <= 2.0):
        raise DomainError(f"u must lie in [0, 2], got {u!r}")
    return _equal_count_prob(n_spots, u)


def eve_round_success(n_spots: int) -> float:
    return 1.0 / (_check_n(n_spots, 1, "n_spots") + 1)


def _snap(x: float) -> float:
    r = round(x)
    return float(r) if abs(x - r) <= _SNAP * max(1.0, abs(x)) else x


def s_plus_threshold(n_spots: int, p_fp_target: float) -> int:
    """Smallest S+ with N^(-S+) <= p_fp."""
    n_spots = _check_n(n_spots, 1, "n_spots")
    if not (0.0 < p_fp_target < 1.0):
        raise DomainError(f"p_fp target must lie in (0, 1), got {p_fp_target!r}")
    if n_spots == 1:
        raise DegenerateDesignError("N = 1 gives Eve a fair coin; no S+ bounds her acceptance")
    return max(1, math.ceil(_snap(-math.log(p_fp_target) / math.log(n_spots))))


def s_minus_threshold(p_alice: float, p_fn_target: float) -> int:
    """Greatest S- with (P_A / (1 - P_A))^(S-) <= p_fn."""
    p_alice = _check_prob(p_alice, "p_alice")
    if not (0.0 < p_fn_target < 1.0):
        raise DomainError(f"p_fn target must lie in (0, 1), got {p_fn_target!r}")
    if p_alice <= 0.5:
        raise DriftError(f"P_A = {p_alice} <= 1/2: Alice's walk has no upward drift")
    if p_alice == 1.0:
        return -1  # Alice never steps down; any barrier meets the target
    log_odds = math.log(p_alice) - math.log1p(-p_alice)
    return min(-1, math.floor(_snap(math.log(p_fn_target) / log_odds)))


def _check_barriers(s_plus: int, s_minus: int) -> None:
    if int(s_plus) != s_plus or int(s_minus) != s_minus or not (s_minus < 0 < s_plus):
        raise DomainError(f"need integer barriers S- < 0 < S+, got S+={s_plus!r}, S-={s_minus!r}")


def absorption_prob_up(p_step: float, s_plus: int, s_minus: int) -> float:
    """P[the walk from 0 hits S+ before S-] with up-step probability ``p_step``."""
    p = _check_prob(p_step, "p_step")
    _check_barriers(s_plus, s_minus)
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    if s_plus == 1 and s_minus == -1:
        return p  # decided by the first step
    width = s_plus - s_minus
    if p == 0.5:
        return -s_minus / width
    # gambler's ruin with start -S- on [0, S+ - S-]; rho < 1 keeps every power bounded
    if p > 0.5:
        rho = (1.0 - p) / p
        return -math.expm1(-s_minus * math.log(rho)) / -math.expm1(width * math.log(rho))
    rho = p / (1.0 - p)
    return (rho**s_plus - rho**width) / -math.expm1(width * math.log(rho))


def absorption_prob_down(p_step: float, s_plus: int, s_minus: int) -> float:
    """P[the walk from 0 hits S- before S+], by the mirrored walk."""
    _check_barriers(s_plus, s_minus)
    return absorption_prob_up(1.0 - _check_prob(p_step, "p_step"), -s_minus, -s_plus)


def eve_false_positive(n_spots: int, s_plus: int, s_minus: int) -> float:
    """Eve's acceptance probability, written as (1 - N^S-) / (N^S+ - N^S-)."""
    n_spots = _check_n(n_spots, 1, "n_spots")
    _check_barriers(s_plus, s_minus)
    if n_spots == 1:
        return -s_minus / (s_plus - s_minus)
    if s_plus == 1 and s_minus == -1:
        return 1.0 / (n_spots + 1)  # one round decides; the general form can be off by an ulp
    # divided through by N^S+: c (1 - a (1 - c) / (1 - a c)) with a = N^S-, c = N^-S+;
    # no overflow, and the bracket cannot round above 1, so the result never exceeds N^-S+
    n = float(n_spots)
    a = n**s_minus
    c = n**-s_plus
    return c * (1.0 - a * (1.0 - c) / (1.0 - a * c))


def eve_false_positive_bound(n_spots: int, s_plus: int) -> float:
    return float(n_spots) ** -s_plus


def alice_false_negative_bound(p_alice: float, s_minus: int) -> float:
    """((1 - P_A) / P_A)^(-S-)."""
    if p_alice == 1.0:
        return 0.0
    return math.exp(-s_minus * (math.log1p(-p_alice) - math.log(p_alice)))


def expected_rounds(p_alice: float, s_plus: int, s_minus: int) -> float:
    """Exact mean absorption time of Alice's walk:
    S+/(2P-1) - (S+ - S-)/(2P-1) * P[hit S- first]."""
    p = _check_prob(p_alice, "p_alice")
    _check_barriers(s_plus, s_minus)
    if p <= 0.5:
        raise DriftError(f"P_A = {p} <= 1/2: expected authentication time is not defined here")
    drift = 2.0 * p - 1.0
    down = absorption_prob_down(p, s_plus, s_minus)
    return s_plus / drift - (s_plus - s_minus) / drift * down


def expected_rounds_bound(p_alice: float, s_plus: int) -> float:
    p = _check_prob(p_alice, "p_alice")
    if p <= 0.5:
        raise DriftError(f"P_A = {p} <= 1/2")
    return s_plus / (2.0 * p - 1.0)


@dataclass(frozen=True)
class RoundModel:
    n_spots: int
    u: float
    p_alice: float
    p_eve: float

    @classmethod
    def from_u(cls, n_spots: int, u: float) -> RoundModel:
        return cls(n_spots, float(u), alice_round_success(n_spots, u), eve_round_success(n_spots))


@dataclass(frozen=True)
class StoppingDesign:
    """Barriers plus the exact error rates and Alice's expected session length.

    Target fields are None when the barriers were fixed by hand; Alice's
    fields are None when no u is attached.
    """

    n_spots: int
    s_plus: int
    s_minus: int
    p_fp_target: float | None = None
    p_fn_target: float | None = None
    p_alice: float | None = None
    p_fp_exact: float | None = None
    p_fn_exact: float | None = None
    t_alice: float | None = None
    t_alice_bound: float | None = None

    def __post_init__(self):
        _check_n(self.n_spots, 1, "n_spots")
        _check_barriers(self.s_plus, self.s_minus)

    @classmethod
    def from_barriers(
        cls, n_spots: int, s_plus: int, s_minus: int, u: float | None = None
    ) -> StoppingDesign:
        p_fp = eve_false_positive(n_spots, s_plus, s_minus)
        if u is None:
            return cls(n_spots, s_plus, s_minus, p_fp_exact=p_fp)
        p_a = alice_round_success(n_spots, u)
        p_fn = absorption_prob_down(p_a, s_plus, s_minus)
        if p_a > 0.5:
            t, t_bound = expected_rounds(p_a, s_plus, s_minus), expected_rounds_bound(p_a, s_plus)
        else:
            t = t_bound = None
        return cls(n_spots, s_plus, s_minus, None, None, p_a, p_fp, p_fn, t, t_bound)


def design_stopping(n_spots: int, u: float, p_fp: float, p_fn: float) -> StoppingDesign:
    """Pick S+ for Eve's false-positive target and S- for Alice's false-negative target."""
    p_a = alice_round_success(n_spots, u)
    s_plus = s_plus_threshold(n_spots, p_fp)
    s_minus = s_minus_threshold(p_a, p_fn)
    return StoppingDesign(
        n_spots=n_spots,
        s_plus=s_plus,
        s_minus=s_minus,
        p_fp_target=p_fp,
        p_fn_target=p_fn,
        p_alice=p_a,
        p_fp_exact=eve_false_positive(n_spots, s_plus, s_minus),
        p_fn_exact=absorption_prob_down(p_a, s_plus, s_minus),
        t_alice=expected_rounds(p_a, s_plus, s_minus),
        t_alice_bound=expected_rounds_bound(p_a, s_plus),
    )
