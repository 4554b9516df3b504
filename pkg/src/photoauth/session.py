"""The interrogation state machine and its seeded Monte Carlo harness.

A session starts at S = 0. Every round the device draws H uniformly on
{0..N}, lights H high spots and N - H low spots (a fresh random subset of each
class), asks the subject how many were seen, and moves S by +1 for a correct
count and -1 otherwise, until S reaches S+ (authenticated) or S- (rejected).

Sessions are simulated in fixed blocks of ``BLOCK_SIZE``, vectorized across
the sessions of a block. Block ``b`` draws from the stream
``SeedSequence(master_seed, spawn_key=(b,))`` and always simulates its full
width, so session ``i`` depends only on ``(master_seed, i)``, never on how many
sessions were requested or how blocks were spread over workers.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Iterable, Protocol, Sequence, Union

import numpy as np

from .alphamap import ClassifiedMap
from .errors import DomainError, NonAbsorptionError, ScriptExhaustedError
from .photon_stats import Coherent, LightSource, PerceptionModel
from .protocol_math import StoppingDesign

BLOCK_SIZE = 4096
DEFAULT_ROUND_CAP = 1_000_000
Z95 = 1.959963984540054

AUTHENTICATED = "authenticated"
REJECTED = "rejected"


def block_rng(master_seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(block,)))


def sample_h(n_spots: int, rng: np.random.Generator, size: int | None = None):
    """Number of high spots to light, uniform on {0..N}."""
    if n_spots < 1:
        raise DomainError(f"n_spots must be >= 1, got {n_spots}")
    return rng.integers(0, n_spots + 1, size=size)


# --- Eve ------------------------------------------------------------------

class EveStrategy(Protocol):
    def answer(self, n_spots: int, size: int, rng: np.random.Generator) -> np.ndarray: ...


@dataclass(frozen=True)
class FixedMode:
    mode: int

    def answer(self, n_spots, size, rng):
        if not 0 <= self.mode <= n_spots:
            raise DomainError(f"fixed answer {self.mode} outside 0..{n_spots}")
        return np.full(size, self.mode, dtype=np.int64)


@dataclass(frozen=True)
class UniformRandom:
    def answer(self, n_spots, size, rng):
        return rng.integers(0, n_spots + 1, size=size)


@dataclass(frozen=True)
class ModeSet:
    """Uniform choice among a set of candidate modes."""

    modes: tuple[int, ...]

    def answer(self, n_spots, size, rng):
        modes = np.asarray(self.modes, dtype=np.int64)
        if modes.size == 0 or modes.min() < 0 or modes.max() > n_spots:
            raise DomainError(f"mode set {self.modes} must be a non-empty subset of 0..{n_spots}")
        return modes[rng.integers(0, modes.size, size=size)]


def eve_response(n_spots: int, strategy: EveStrategy, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    return np.asarray(strategy.answer(n_spots, size, rng))


# --- rounds and subjects -----------------------------------------------------

@dataclass
class RoundBatch:
    """One round for ``size`` concurrent sessions. Only Alice and scripted
    responders look past ``n_spots``."""

    n_spots: int
    size: int
    round_index: int
    h: np.ndarray
    lit_alpha: np.ndarray | None = None  # (size, N)
    lit_high: np.ndarray | None = None  # (size, N) bool
    lit_index: np.ndarray | None = None  # (size, N) flat spot index in the map


def alice_response(lit_alpha: np.ndarray, source: LightSource, perception: PerceptionModel,
                   rng: np.random.Generator) -> np.ndarray:
    """Count of lit spots whose detected photon number reaches K (last axis = spots)."""
    lit_alpha = np.asarray(lit_alpha, dtype=float)
    if isinstance(source, Coherent):
        counts = rng.poisson(lit_alpha * source.nbar)
    else:
        counts = rng.binomial(source.n_exact, lit_alpha)
    return (counts >= perception.k_threshold).sum(axis=-1)


@dataclass(frozen=True)
class SimAlice:
    source: LightSource
    perception: PerceptionModel = field(default_factory=PerceptionModel)
    needs_map = True

    def respond(self, batch: RoundBatch, rng):
        return alice_response(batch.lit_alpha, self.source, self.perception, rng)


@dataclass(frozen=True)
class SimEve:
    strategy: EveStrategy = field(default_factory=UniformRandom)
    needs_map = False

    def respond(self, batch: RoundBatch, rng):
        return eve_response(batch.n_spots, self.strategy, rng, batch.size)


CORRECT = "correct"
WRONG = "wrong"


@dataclass(frozen=True)
class Scripted:
    """Replays a fixed response list, one entry per round.

    An entry is a literal count, or ``"correct"`` / ``"wrong"`` to answer H or
    a count different from H.
    """

    responses: tuple[Union[int, str], ...]
    needs_map = False

    def __post_init__(self):
        for r in self.responses:
            if r not in (CORRECT, WRONG) and not (isinstance(r, (int, np.integer)) and r >= 0):
                raise DomainError(f"invalid scripted response {r!r}")
        object.__setattr__(self, "responses", tuple(self.responses))

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> Scripted:
        out = []
        for line in lines:
            tok = line.split("#", 1)[0].strip()
            if tok:
                out.append(tok if tok in (CORRECT, WRONG) else int(tok))
        return cls(tuple(out))

    def respond(self, batch: RoundBatch, rng):
        if batch.round_index >= len(self.responses):
            raise ScriptExhaustedError(f"script has {len(self.responses)} responses; round {batch.round_index + 1} needs more")
        tok = self.responses[batch.round_index]
        if tok == CORRECT:
            return batch.h.copy()
        if tok == WRONG:
            return (batch.h + 1) % (batch.n_spots + 1)
        return np.full(batch.size, tok, dtype=np.int64)


SubjectModel = Union[SimAlice, SimEve, Scripted]


def _select_spots(cmap: ClassifiedMap, h: np.ndarray, n_spots: int, rng: np.random.Generator):
    m = h.size
    alphas = cmap.source.alphas.ravel()
    cols = cmap.source.cols
    high = np.array([r * cols + c for r, c in cmap.high_spots])
    low = np.array([r * cols + c for r, c in cmap.low_spots])
    # first N entries of a uniform random permutation of each class
    pick_h = high[np.argsort(rng.random((m, high.size)), axis=1)[:, :n_spots]]
    pick_l = low[np.argsort(rng.random((m, low.size)), axis=1)[:, :n_spots]]
    j = np.arange(n_spots)
    lit_high = j[None, :] < h[:, None]
    low_col = np.where(lit_high, 0, j[None, :] - h[:, None])
    lit_index = np.where(lit_high, pick_h, np.take_along_axis(pick_l, low_col, axis=1))
    return alphas[lit_index], lit_high, lit_index


# --- records and statistics --------------------------------------------------

@dataclass(frozen=True)
class Interrogation:
    h: int
    lit_spots: tuple[tuple[tuple[int, int], bool], ...]  # ((row, col), is_high); empty without a map
    response: int
    correct: bool


@dataclass(frozen=True)
class SessionRecord:
    rounds: tuple[Interrogation, ...]
    s_trajectory: tuple[int, ...]  # S after each round
    outcome: str

    @property
    def round_count(self) -> int:
        return len(self.rounds)


@dataclass(frozen=True)
class SessionStats:
    """Merge-only accumulator; all fields are exact integers, so merging is
    associative and commutative."""

    sessions: int = 0
    accepted: int = 0
    sum_rounds: int = 0
    sum_sq_rounds: int = 0

    def __add__(self, other: SessionStats) -> SessionStats:
        return SessionStats(
            self.sessions + other.sessions,
            self.accepted + other.accepted,
            self.sum_rounds + other.sum_rounds,
            self.sum_sq_rounds + other.sum_sq_rounds,
        )

    @classmethod
    def of(cls, rounds: np.ndarray, accepted: np.ndarray) -> SessionStats:
        r = [int(x) for x in rounds]
        return cls(len(r), int(np.count_nonzero(accepted)), sum(r), sum(x * x for x in r))

    @property
    def rejected(self) -> int:
        return self.sessions - self.accepted

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.sessions

    @property
    def rejection_rate(self) -> float:
        return self.rejected / self.sessions

    @property
    def mean_rounds(self) -> float:
        return self.sum_rounds / self.sessions

    @property
    def sd_rounds(self) -> float:
        n = self.sessions
        if n < 2:
            return 0.0
        # exact integer numerator before the single float division
        return math.sqrt((n * self.sum_sq_rounds - self.sum_rounds**2) / (n * (n - 1)))

    @property
    def ci95_rounds(self) -> tuple[float, float]:
        half = Z95 * self.sd_rounds / math.sqrt(self.sessions)
        return self.mean_rounds - half, self.mean_rounds + half

    @property
    def ci95_acceptance(self) -> tuple[float, float]:
        """Wilson score interval."""
        n, p = self.sessions, self.acceptance_rate
        z2 = Z95 * Z95
        centre = (p + z2 / (2 * n)) / (1 + z2 / n)
        half = Z95 * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n)
        return max(0.0, centre - half), min(1.0, centre + half)


# --- the walk -----------------------------------------------------------------

def _walk(subject, design: StoppingDesign, cmap: ClassifiedMap | None, size: int,
          rng: np.random.Generator, round_cap: int, record: bool):
    n = design.n_spots
    if subject.needs_map and cmap is None:
        raise DomainError(f"{type(subject).__name__} needs a classified alpha-map")
    if cmap is not None:
        cmap.require(n)
    s = np.zeros(size, dtype=np.int64)
    rounds = np.zeros(size, dtype=np.int64)
    accepted = np.zeros(size, dtype=bool)
    active = np.arange(size)
    log = [[] for _ in range(size)] if record else None
    t = 0
    while active.size:
        if t >= round_cap:
            raise NonAbsorptionError(f"{active.size} session(s) still open after {round_cap} rounds")
        h = sample_h(n, rng, active.size)
        batch = RoundBatch(n, active.size, t, h)
        if cmap is not None:
            batch.lit_alpha, batch.lit_high, batch.lit_index = _select_spots(cmap, h, n, rng)
        resp = np.asarray(subject.respond(batch, rng), dtype=np.int64)
        correct = resp == h
        s[active] += np.where(correct, 1, -1)
        rounds[active] += 1
        cur = s[active]
        if record:
            for k, i in enumerate(active):
                lit = ()
                if cmap is not None:
                    cols = cmap.source.cols
                    lit = tuple(((int(f) // cols, int(f) % cols), bool(hi))
                                for f, hi in zip(batch.lit_index[k], batch.lit_high[k]))
                log[i].append((Interrogation(int(h[k]), lit, int(resp[k]), bool(correct[k])), int(cur[k])))
        up = cur >= design.s_plus
        done = up | (cur <= design.s_minus)
        accepted[active[up]] = True
        active = active[~done]
        t += 1
    return rounds, accepted, log


def _to_records(log, accepted) -> list[SessionRecord]:
    out = []
    for entries, acc in zip(log, accepted):
        out.append(SessionRecord(
            rounds=tuple(e[0] for e in entries),
            s_trajectory=tuple(e[1] for e in entries),
            outcome=AUTHENTICATED if acc else REJECTED,
        ))
    return out


def run_session(subject: SubjectModel, design: StoppingDesign, classified_map: ClassifiedMap | None = None,
                rng: np.random.Generator | int | None = None,
                round_cap: int = DEFAULT_ROUND_CAP) -> SessionRecord:
    """Run one session to absorption. The light source lives in the subject model."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    rounds, accepted, log = _walk(subject, design, classified_map, 1, rng, round_cap, record=True)
    return _to_records(log, accepted)[0]


def _block_stats(args) -> SessionStats:
    subject, design, cmap, seed, block, count, block_size, round_cap = args
    rounds, accepted, _ = _walk(subject, design, cmap, block_size, block_rng(seed, block), round_cap, False)
    return SessionStats.of(rounds[:count], accepted[:count])


def _blocks(n_sessions: int, block_size: int):
    for b in range(math.ceil(n_sessions / block_size)):
        yield b, min(block_size, n_sessions - b * block_size)


def monte_carlo(subject: SubjectModel, design: StoppingDesign, n_sessions: int, master_seed: int,
                classified_map: ClassifiedMap | None = None, workers: int = 1,
                block_size: int = BLOCK_SIZE, round_cap: int = DEFAULT_ROUND_CAP) -> SessionStats:
    """Simulate ``n_sessions`` independent sessions and aggregate them."""
    if n_sessions < 1:
        raise DomainError(f"n_sessions must be >= 1, got {n_sessions}")
    tasks = [(subject, design, classified_map, master_seed, b, c, block_size, round_cap)
             for b, c in _blocks(n_sessions, block_size)]
    if workers <= 1 or len(tasks) == 1:
        parts = map(_block_stats, tasks)
        total = sum(parts, SessionStats())
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            total = sum(pool.map(_block_stats, tasks), SessionStats())
    return total


def simulate_sessions(subject: SubjectModel, design: StoppingDesign, n_sessions: int, master_seed: int,
                      classified_map: ClassifiedMap | None = None, block_size: int = BLOCK_SIZE,
                      round_cap: int = DEFAULT_ROUND_CAP) -> list[SessionRecord]:
    """Full records for sessions 0..n-1, drawn exactly as ``monte_carlo`` draws them."""
    records: list[SessionRecord] = []
    for b, count in _blocks(n_sessions, block_size):
        _, accepted, log = _walk(subject, design, classified_map, block_size,
                                 block_rng(master_seed, b), round_cap, record=True)
        records.extend(_to_records(log[:count], accepted[:count]))
    return records


# --- CSV export ---------------------------------------------------------------

TRACE_COLUMNS = ("session_id", "round", "H", "response", "correct", "S")
SUMMARY_COLUMNS = ("sessions", "accepted", "rejected", "mean_rounds", "sd_rounds", "ci95_low", "ci95_high")


def write_trace_csv(records: Sequence[SessionRecord], out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for sid, rec in enumerate(records):
        for t, (it, s) in enumerate(zip(rec.rounds, rec.s_trajectory), start=1):
            w.writerow((sid, t, it.h, it.response, int(it.correct), s))


def write_summary_csv(stats: SessionStats, out: IO[str]) -> None:
    lo, hi = stats.ci95_rounds
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    w.writerow((stats.sessions, stats.accepted, stats.rejected, f"{stats.mean_rounds:.17g}",
                f"{stats.sd_rounds:.17g}", f"{lo:.17g}", f"{hi:.17g}"))
