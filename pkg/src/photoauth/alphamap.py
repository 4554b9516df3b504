"""Alpha-maps: per-spot transmission grids that serve as the biometric template.

File format (UTF-8, one record per line, ``#`` comments ignored)::

    alphamap v1
    subject <id>
    grid <rows> <cols>
    spot <row> <col> <alpha>      # rows*cols lines, row-major
"""
from __future__ import annotations

import io
import os
import statistics
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .errors import DomainError, InsufficientSpotsError, InvariantError, ParseError

FORMAT_TAG = "alphamap v1"
DEFAULT_THETA_H = 0.10
DEFAULT_THETA_L = 0.05

Spot = tuple[int, int]


@dataclass(frozen=True, eq=False)
class AlphaMap:
    alphas: np.ndarray  # shape (rows, cols), read-only
    subject_id: str = ""

    def __post_init__(self):
        a = np.array(self.alphas, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise InvariantError(f"alpha grid must be 2-D and non-empty, got shape {a.shape}")
        bad = np.argwhere(~((a >= 0.0) & (a <= 1.0)))
        if bad.size:
            r, c = bad[0]
            raise InvariantError(f"spot ({r}, {c}) has alpha {a[r, c]!r} outside [0, 1]")
        if any(ch.isspace() for ch in self.subject_id):
            raise InvariantError(f"subject id must not contain whitespace: {self.subject_id!r}")
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)

    @property
    def rows(self) -> int:
        return self.alphas.shape[0]

    @property
    def cols(self) -> int:
        return self.alphas.shape[1]

    def __eq__(self, other):
        if not isinstance(other, AlphaMap):
            return NotImplemented
        return self.subject_id == other.subject_id and np.array_equal(self.alphas, other.alphas)

    def __hash__(self):
        return hash((self.subject_id, self.alphas.shape, self.alphas.tobytes()))


@dataclass(frozen=True)
class ClassifiedMap:
    source: AlphaMap
    theta_h: float
    theta_l: float
    high_spots: tuple[Spot, ...]
    low_spots: tuple[Spot, ...]
    alpha_h_rep: float
    alpha_l_rep: float

    @property
    def high_alphas(self) -> np.ndarray:
        return np.array([self.source.alphas[s] for s in self.high_spots])

    @property
    def low_alphas(self) -> np.ndarray:
        return np.array([self.source.alphas[s] for s in self.low_spots])

    def require(self, n_spots: int) -> None:
        if len(self.high_spots) < n_spots or len(self.low_spots) < n_spots:
            raise InsufficientSpotsError(n_spots, len(self.high_spots), len(self.low_spots))


def classify(
    alpha_map: AlphaMap,
    theta_h: float = DEFAULT_THETA_H,
    theta_l: float = DEFAULT_THETA_L,
    min_per_class: int = 1,
) -> ClassifiedMap:
    """Split spots into high (alpha >= theta_h) and low (alpha <= theta_l); the band between is not played."""
    if not theta_l < theta_h:
        raise DomainError(f"theta_L ({theta_l}) must be below theta_H ({theta_h})")
    a = alpha_map.alphas
    high = tuple((int(r), int(c)) for r, c in np.argwhere(a >= theta_h))
    low = tuple((int(r), int(c)) for r, c in np.argwhere(a <= theta_l))
    if len(high) < min_per_class or len(low) < min_per_class:
        raise InsufficientSpotsError(min_per_class, len(high), len(low))
    return ClassifiedMap(
        source=alpha_map,
        theta_h=float(theta_h),
        theta_l=float(theta_l),
        high_spots=high,
        low_spots=low,
        # exact rational mean: a class of identical values represents itself bit-exactly
        alpha_h_rep=statistics.mean(float(a[s]) for s in high),
        alpha_l_rep=statistics.mean(float(a[s]) for s in low),
    )


def generate_synthetic(
    rows: int,
    cols: int,
    alpha_high_mean: float = 0.16,
    alpha_low_mean: float = 0.04,
    jitter: float = 0.0,
    fraction_high: float = 0.5,
    seed: int | None = None,
    subject_id: str = "synthetic",
) -> AlphaMap:
    """Random two-class map: each spot is high with probability ``fraction_high``,
    its alpha uniform on mean +- jitter, clamped to [0, 1]."""
    if rows < 1 or cols < 1:
        raise DomainError(f"grid must be at least 1x1, got {rows}x{cols}")
    for name, v in (("alpha_high_mean", alpha_high_mean), ("alpha_low_mean", alpha_low_mean),
                    ("fraction_high", fraction_high)):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"{name} must lie in [0, 1], got {v!r}")
    if jitter < 0:
        raise DomainError(f"jitter must be >= 0, got {jitter!r}")
    rng = np.random.default_rng(seed)
    is_high = rng.random((rows, cols)) < fraction_high
    offsets = rng.uniform(-jitter, jitter, size=(rows, cols)) if jitter > 0 else np.zeros((rows, cols))
    alphas = np.where(is_high, alpha_high_mean, alpha_low_mean) + offsets
    return AlphaMap(np.clip(alphas, 0.0, 1.0), subject_id)


def two_class_map(rows: int, cols: int, alpha_h: float, alpha_l: float, subject_id: str = "ideal") -> AlphaMap:
    """Checkerboard of exactly two alpha values."""
    r, c = np.indices((rows, cols))
    return AlphaMap(np.where((r + c) % 2 == 0, alpha_h, alpha_l), subject_id)


def dumps(alpha_map: AlphaMap) -> str:
    out = [FORMAT_TAG, f"subject {alpha_map.subject_id}", f"grid {alpha_map.rows} {alpha_map.cols}"]
    for (r, c), a in np.ndenumerate(alpha_map.alphas):
        out.append(f"spot {r} {c} {float(a)!r}")
    return "\n".join(out) + "\n"


def save(alpha_map: AlphaMap, destination: str | os.PathLike | IO[str]) -> None:
    text = dumps(alpha_map)
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(text)


def _records(lines: Iterable[str]):
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line.split()


def _parse_int(tok: str, what: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"{what} must be an integer, got {tok!r}", lineno) from None


def loads(text: str) -> AlphaMap:
    records = _records(io.StringIO(text))
    lineno, fields = next(records, (1, []))
    if " ".join(fields) != FORMAT_TAG:
        raise ParseError(f"expected '{FORMAT_TAG}'", lineno)

    lineno, fields = next(records, (lineno + 1, []))
    subject = ""
    if fields and fields[0] == "subject":
        if len(fields) > 2:
            raise ParseError("subject id must be a single token", lineno)
        subject = fields[1] if len(fields) == 2 else ""
        lineno, fields = next(records, (lineno + 1, []))
    if not fields or fields[0] != "grid" or len(fields) != 3:
        raise ParseError("expected grid header 'grid <rows> <cols>'", lineno)
    rows = _parse_int(fields[1], "rows", lineno)
    cols = _parse_int(fields[2], "cols", lineno)
    if rows < 1 or cols < 1:
        raise ParseError(f"grid must be at least 1x1, got {rows}x{cols}", lineno)

    alphas = np.empty((rows, cols))
    expected = ((r, c) for r in range(rows) for c in range(cols))
    for want in expected:
        lineno, fields = next(records, (lineno + 1, []))
        if not fields:
            raise ParseError(f"missing spot {want[0]} {want[1]} (file ends early)", lineno)
        if fields[0] != "spot" or len(fields) != 4:
            raise ParseError("expected 'spot <row> <col> <alpha>'", lineno)
        where = (_parse_int(fields[1], "row", lineno), _parse_int(fields[2], "col", lineno))
        if where != want:
            raise ParseError(f"expected spot {want[0]} {want[1]} (row-major), got {where[0]} {where[1]}", lineno)
        try:
            alpha = float(fields[3])
        except ValueError:
            raise ParseError(f"alpha must be a number, got {fields[3]!r}", lineno) from None
        if not 0.0 <= alpha <= 1.0:
            raise InvariantError(f"line {lineno}: spot ({where[0]}, {where[1]}) has alpha {alpha!r} outside [0, 1]")
        alphas[want] = alpha
    extra = next(records, None)
    if extra is not None:
        raise ParseError("unexpected content after the last spot", extra[0])
    return AlphaMap(alphas, subject)


def load(source: str | os.PathLike | IO[str]) -> AlphaMap:
    if hasattr(source, "read"):
        return loads(source.read())
    with open(source, encoding="utf-8") as fh:
        return loads(fh.read())


def classification_report(cm: ClassifiedMap) -> str:
    """Key-value summary plus a grid picture: H high, L low, . unused."""
    a = cm.source
    grid = [["."] * a.cols for _ in range(a.rows)]
    for r, c in cm.high_spots:
        grid[r][c] = "H"
    for r, c in cm.low_spots:
        grid[r][c] = "L"
    lines = [
        f"subject = {a.subject_id}",
        f"grid = {a.rows} {a.cols}",
        f"theta_H = {cm.theta_h!r}",
        f"theta_L = {cm.theta_l!r}",
        f"n_high = {len(cm.high_spots)}",
        f"n_low = {len(cm.low_spots)}",
        f"n_excluded = {a.rows * a.cols - len(cm.high_spots) - len(cm.low_spots)}",
        f"alpha_H_rep = {cm.alpha_h_rep:.17g}",
        f"alpha_L_rep = {cm.alpha_l_rep:.17g}",
    ]
    lines += ["# " + " ".join(row) for row in grid]
    return "\n".join(lines) + "\n"
