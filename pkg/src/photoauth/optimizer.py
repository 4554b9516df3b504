"""Protocol design: choose the photon budget that minimizes u, then the spot
count N that minimizes Alice's expected authentication time."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import DomainError, DriftError
from .photon_stats import DEFAULT_K, PHOTON_BUDGET_CAP, make_source, miss_and_false_probs
from .protocol_math import design_stopping

DEFAULT_P_FP = 1e-10
DEFAULT_P_FN = 1e-6
DEFAULT_N_RANGE = range(2, 51)
INV_PHI = (math.sqrt(5) - 1) / 2

# Inferred defaults: the round targets that give S+ = 13 and S- = -13 at N = 6.
TARGETS_NOTE = "p_fp/p_fn defaults are inferred from S+ = 13 at N = 6; pass --p-fp/--p-fn to change them"


class FlatCurveWarning(UserWarning):
    pass


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float = 1e-6) -> float:
    """Minimizer of a unimodal ``f`` on [a, b] to within ``tol``."""
    a, b = min(a, b), max(a, b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (a + b) / 2


@dataclass(frozen=True)
class UCurve:
    kind: str
    nbar_opt: float
    u_min: float
    nbar_grid_opt: float
    curve: tuple[tuple[float, float], ...]  # (nbar, u), in scan order


def u_of_budget(kind: str, budget: float, alpha_h: float, alpha_l: float, k: int = DEFAULT_K,
                allow_equal: bool = False) -> float:
    return miss_and_false_probs(make_source(kind, budget), alpha_h, alpha_l, k, allow_equal=allow_equal).u


def minimize_u(kind: str, alpha_h: float, alpha_l: float, k: int = DEFAULT_K,
               nbar_range: tuple[float, float] = (1.0, PHOTON_BUDGET_CAP), resolution: float = 0.1,
               cap: float = PHOTON_BUDGET_CAP, refine_tol: float = 1e-6) -> UCurve:
    """Coherent: grid scan at ``resolution`` then golden-section refinement
    around the best grid point. Single-photon: exhaustive integer scan."""
    lo, hi = nbar_range
    if not (0 <= lo < hi <= cap):
        raise DomainError(f"photon range [{lo}, {hi}] must be increasing and within [0, {cap}]")
    allow_equal = alpha_h == alpha_l

    def u(x):
        return u_of_budget(kind, x, alpha_h, alpha_l, k, allow_equal)

    if kind == "coherent":
        if not 0 < resolution <= 0.1:
            raise DomainError(f"coherent resolution must be in (0, 0.1], got {resolution}")
        steps = int(math.floor((hi - lo) / resolution + 1e-9))
        grid = [round(lo + i * resolution, 12) for i in range(steps + 1)]
    else:
        grid = list(range(math.ceil(lo), math.floor(hi) + 1))
        if not grid:
            raise DomainError(f"no integer photon number in [{lo}, {hi}]")
    curve = tuple((x, u(x)) for x in grid)
    i_best = min(range(len(curve)), key=lambda i: curve[i][1])
    x_grid, u_best = curve[i_best]
    x_best = x_grid
    if kind == "coherent":
        a = max(lo, x_grid - resolution)
        b = min(hi, x_grid + resolution)
        x_ref = golden_section(u, a, b, refine_tol)
        if u(x_ref) <= u_best:
            x_best, u_best = x_ref, u(x_ref)
    if u_best > 0.99:
        warnings.warn(f"u(nbar) is flat near 1 (min {u_best:.4g}): alpha_H and alpha_L are not separable",
                      FlatCurveWarning, stacklevel=2)
    return UCurve(kind, x_best, u_best, x_grid, curve)


@dataclass(frozen=True)
class TimeCurveRow:
    n_spots: int
    s_plus: int
    s_minus: int
    p_alice: float
    t_alice: float
    t_alice_bound: float


@dataclass(frozen=True)
class TimeCurve:
    n_opt: int
    s_plus: int
    s_minus: int
    t_alice: float
    t_alice_bound: float
    rows: tuple[TimeCurveRow, ...]
    skipped: tuple[int, ...] = ()  # N with P_A <= 1/2


def minimize_expected_time(u: float, p_fp: float = DEFAULT_P_FP, p_fn: float = DEFAULT_P_FN,
                           n_range: Sequence[int] = DEFAULT_N_RANGE) -> TimeCurve:
    rows, skipped = [], []
    for n in n_range:
        if not 2 <= n <= 50:
            raise DomainError(f"spot counts must lie in 2..50, got {n}")
        try:
            d = design_stopping(n, u, p_fp, p_fn)
        except DriftError:
            skipped.append(n)
            continue
        rows.append(TimeCurveRow(n, d.s_plus, d.s_minus, d.p_alice, d.t_alice, d.t_alice_bound))
    if not rows:
        raise DriftError(f"P_A <= 1/2 for every N probed at u = {u}")
    best = min(rows, key=lambda r: (r.t_alice, r.n_spots))
    return TimeCurve(best.n_spots, best.s_plus, best.s_minus, best.t_alice, best.t_alice_bound,
                     tuple(rows), tuple(skipped))


@dataclass(frozen=True)
class OptimizationResult:
    kind: str
    nbar_opt: float
    u_min: float
    n_opt: int
    s_plus: int
    s_minus: int
    t_a_opt: float
    t_a_bound: float
    alpha_h: float
    alpha_l: float
    k: int
    p_fp: float
    p_fn: float
    u_curve: UCurve = field(repr=False)
    time_curve: TimeCurve = field(repr=False)

    @property
    def photons_per_auth(self) -> float:
        """Expected rounds times photons per spot per pulse."""
        return self.t_a_opt * self.nbar_opt


def optimize(kind: str, alpha_h: float, alpha_l: float, k: int = DEFAULT_K,
             p_fp: float = DEFAULT_P_FP, p_fn: float = DEFAULT_P_FN,
             nbar_range: tuple[float, float] = (1.0, PHOTON_BUDGET_CAP), resolution: float = 0.1,
             n_range: Sequence[int] = DEFAULT_N_RANGE) -> OptimizationResult:
    uc = minimize_u(kind, alpha_h, alpha_l, k, nbar_range, resolution)
    tc = minimize_expected_time(uc.u_min, p_fp, p_fn, n_range)
    return OptimizationResult(kind, uc.nbar_opt, uc.u_min, tc.n_opt, tc.s_plus, tc.s_minus,
                              tc.t_alice, tc.t_alice_bound, alpha_h, alpha_l, k, p_fp, p_fn, uc, tc)


@dataclass(frozen=True)
class AdvantageReport:
    classical: OptimizationResult
    quantum: OptimizationResult

    @property
    def p_fp(self) -> float:
        return self.classical.p_fp

    @property
    def p_fn(self) -> float:
        return self.classical.p_fn

    @property
    def time_advantage(self) -> float:
        return 1.0 - self.quantum.t_a_opt / self.classical.t_a_opt

    @property
    def photon_advantage(self) -> float:
        return 1.0 - self.quantum.photons_per_auth / self.classical.photons_per_auth

    def to_text(self) -> str:
        c = self.classical
        lines = [f"alpha_H = {c.alpha_h!r}", f"alpha_L = {c.alpha_l!r}", f"K = {c.k}",
                 f"p_fp = {self.p_fp!r}", f"p_fn = {self.p_fn!r}"]
        for tag, r in (("coherent", self.classical), ("single", self.quantum)):
            lines += [
                f"{tag}.nbar_opt = {r.nbar_opt:.6g}",
                f"{tag}.u_min = {r.u_min:.17g}",
                f"{tag}.N_opt = {r.n_opt}",
                f"{tag}.S_plus = {r.s_plus}",
                f"{tag}.S_minus = {r.s_minus}",
                f"{tag}.T_A = {r.t_a_opt:.17g}",
                f"{tag}.T_A_bound = {r.t_a_bound:.17g}",
                f"{tag}.photons_per_auth = {r.photons_per_auth:.17g}",
            ]
        lines += [
            f"time_advantage = {self.time_advantage:.17g}",
            f"photon_advantage = {self.photon_advantage:.17g}",
            f"note = {TARGETS_NOTE}",
        ]
        return "\n".join(lines) + "\n"


def advantage_report(classical: OptimizationResult, quantum: OptimizationResult) -> AdvantageReport:
    """Compare two optimized designs; both must share alpha_H, alpha_L, K and the error targets."""
    key = lambda r: (r.alpha_h, r.alpha_l, r.k, r.p_fp, r.p_fn)
    if key(classical) != key(quantum):
        raise DomainError(f"results were optimized under different settings: {key(classical)} vs {key(quantum)}")
    return AdvantageReport(classical, quantum)
