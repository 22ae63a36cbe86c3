"""Raw liquidity parsing, LP aggregation and surface assembly.

A snapshot stores a piecewise-constant tick -> liquidity step function. Ticks
are multiples of the pool's tick spacing. Between two stored ticks the
liquidity of the lower one holds; outside the stored support it is zero.
"""

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_odd_M
from .exceptions import (
    GapError,
    InsufficientJumpsError,
    LogDomainError,
    OrderingError,
    ParseError,
    ValidationError,
)

FORMATS = ("snapshot-json", "positions-json")


@dataclass(frozen=True)
class LpPosition:
    liquidity_level: float
    range_lower_tick: int
    range_upper_tick: int

    def __post_init__(self):
        if not np.isfinite(self.liquidity_level) or self.liquidity_level <= 0:
            raise ValidationError(f"liquidity_level must be positive, got {self.liquidity_level}")
        if self.range_lower_tick >= self.range_upper_tick:
            raise ValidationError(
                f"empty range [{self.range_lower_tick}, {self.range_upper_tick})"
            )

    def check_spacing(self, tick_spacing):
        if self.range_lower_tick % tick_spacing or self.range_upper_tick % tick_spacing:
            raise ValidationError(
                f"range [{self.range_lower_tick}, {self.range_upper_tick}) "
                f"is not aligned to tick spacing {tick_spacing}"
            )


@dataclass(frozen=True)
class LiquiditySnapshot:
    """One block's liquidity step function.

    ``ticks`` and ``liquidity`` are parallel arrays; ``ticks`` is strictly
    increasing and every entry is a multiple of ``tick_spacing``.
    """

    block_number: int
    tick_spacing: int
    current_tick: int
    ticks: np.ndarray
    liquidity: np.ndarray

    def __post_init__(self):
        ticks = np.asarray(self.ticks, dtype=np.int64)
        liq = np.asarray(self.liquidity, dtype=float)
        object.__setattr__(self, "ticks", ticks)
        object.__setattr__(self, "liquidity", liq)
        if self.block_number < 0:
            raise ValidationError(f"negative block number {self.block_number}")
        if self.tick_spacing <= 0:
            raise ValidationError(f"tick_spacing must be positive, got {self.tick_spacing}")
        if ticks.ndim != 1 or ticks.shape != liq.shape:
            raise ValidationError("ticks and liquidity must be 1-D arrays of equal length")
        if np.any(ticks % self.tick_spacing):
            bad = int(ticks[np.flatnonzero(ticks % self.tick_spacing)[0]])
            raise ValidationError(
                f"block {self.block_number}: tick {bad} is not a multiple of {self.tick_spacing}"
            )
        if ticks.size > 1:
            steps = np.diff(ticks)
            if np.any(steps == 0):
                dup = int(ticks[1:][steps == 0][0])
                raise ValidationError(f"block {self.block_number}: duplicate tick {dup}")
            if np.any(steps < 0):
                raise ValidationError(f"block {self.block_number}: ticks not sorted ascending")
        if not np.all(np.isfinite(liq)) or np.any(liq < 0):
            raise ValidationError(f"block {self.block_number}: liquidity must be finite and >= 0")

    @classmethod
    def from_positions(cls, block_number, tick_spacing, current_tick, positions, tick_range=None):
        liq = aggregate_positions(positions, tick_spacing, tick_range)
        return cls(
            block_number,
            tick_spacing,
            current_tick,
            np.fromiter(liq.keys(), dtype=np.int64, count=len(liq)),
            np.fromiter(liq.values(), dtype=float, count=len(liq)),
        )

    def liquidity_at(self, ticks):
        """Evaluate the step function at arbitrary integer ticks."""
        ticks = np.asarray(ticks, dtype=np.int64)
        if self.ticks.size == 0:
            return np.zeros(ticks.shape)
        idx = np.searchsorted(self.ticks, ticks, side="right") - 1
        out = self.liquidity[np.clip(idx, 0, None)]
        upper = self.ticks[-1]
        return np.where((idx < 0) | (ticks > upper), 0.0, out)

    def jump_ticks(self):
        """Ticks ``i`` (multiples of s) where L(i) differs from L(i - s).

        Only stored ticks and the first tick past the support can qualify,
        because the step function is flat everywhere else.
        """
        if self.ticks.size == 0:
            return self.ticks.copy()
        s = self.tick_spacing
        prev = np.concatenate(([0.0], self.liquidity[:-1]))
        # a gap between stored ticks keeps the lower value, so prev is exact
        inner = self.ticks[self.liquidity != prev]
        if self.liquidity[-1] != 0.0:
            inner = np.append(inner, self.ticks[-1] + s)
        return inner


@dataclass(frozen=True)
class SurfaceGrid:
    """T x M log-liquidity matrix on the rank-standardized grid."""

    block_numbers: np.ndarray
    grid_x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        blocks = np.asarray(self.block_numbers, dtype=np.int64)
        grid = np.asarray(self.grid_x, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "block_numbers", blocks)
        object.__setattr__(self, "grid_x", grid)
        object.__setattr__(self, "values", values)
        M = check_odd_M(grid.size)
        if values.ndim != 2 or values.shape != (blocks.size, M):
            raise ValidationError(
                f"values shape {values.shape} does not match ({blocks.size}, {M})"
            )
        if grid[(M - 1) // 2] != 0.0 or np.any(grid != -grid[::-1]):
            raise ValidationError("grid_x must be symmetric with 0 at the centre")
        if blocks.size > 1 and np.any(np.diff(blocks) <= 0):
            raise OrderingError("block numbers must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValidationError("surface contains non-finite values")

    @property
    def T(self):
        return self.values.shape[0]

    @property
    def M(self):
        return self.values.shape[1]

    def central(self, M):
        """Restrict to the ``M`` centre columns, re-expressed on the M-point grid."""
        M = check_odd_M(M)
        if M > self.M:
            raise ValidationError(f"cannot widen a {self.M}-point surface to {M}")
        lo = (self.M - M) // 2
        return SurfaceGrid(self.block_numbers, standard_grid(M), self.values[:, lo : lo + M])

    def rows(self, start, stop):
        return SurfaceGrid(
            self.block_numbers[start:stop], self.grid_x, self.values[start:stop]
        )

    def to_csv(self, path):
        write_surface_csv(self, path)


@dataclass(frozen=True)
class SummaryFunctions:
    mean: np.ndarray
    std: np.ndarray = field(repr=False)


def standard_grid(M):
    """Equally spaced grid 2(j - j*)/(M - 1), exactly symmetric with 0 at j*."""
    M = check_odd_M(M)
    half = (M - 1) // 2
    right = np.arange(1, half + 1) / half
    return np.concatenate((-right[::-1], [0.0], right))


# -- parsing ------------------------------------------------------------------


def _records(path):
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            items = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON array: {exc.msg}", exc.lineno) from None
        for n, item in enumerate(items, start=1):
            yield n, item
        return
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None


def _int_field(rec, key, lineno):
    try:
        value = rec[key]
    except (KeyError, TypeError):
        raise ParseError(f"missing field {key!r}", lineno) from None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"field {key!r} must be an integer, got {value!r}", lineno)
    return value


def _parse_snapshot_record(rec, lineno):
    block = _int_field(rec, "block", lineno)
    spacing = _int_field(rec, "tick_spacing", lineno)
    current = _int_field(rec, "current_tick", lineno)
    pairs = rec.get("liquidity")
    if not isinstance(pairs, list):
        raise ParseError("field 'liquidity' must be a list of [tick, value] pairs", lineno)
    ticks, values = [], []
    for pair in pairs:
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or isinstance(pair[0], bool)
            or not isinstance(pair[0], int)
            or not isinstance(pair[1], (int, float))
        ):
            raise ParseError(f"malformed liquidity entry {pair!r}", lineno)
        ticks.append(pair[0])
        values.append(float(pair[1]))
    try:
        return LiquiditySnapshot(block, spacing, current, np.array(ticks, dtype=np.int64), np.array(values))
    except ValidationError as exc:
        raise type(exc)(f"line {lineno}: {exc}") from None


def _parse_positions_record(rec, lineno):
    block = _int_field(rec, "block", lineno)
    spacing = _int_field(rec, "tick_spacing", lineno)
    current = _int_field(rec, "current_tick", lineno)
    raw = rec.get("positions")
    if not isinstance(raw, list):
        raise ParseError("field 'positions' must be a list", lineno)
    positions = []
    try:
        for p in raw:
            if not isinstance(p, dict):
                raise ParseError(f"malformed position {p!r}", lineno)
            pos = LpPosition(float(p["L"]), int(p["lower"]), int(p["upper"]))
            pos.check_spacing(spacing)
            positions.append(pos)
        return LiquiditySnapshot.from_positions(block, spacing, current, positions)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed position: {exc}", lineno) from None
    except ValidationError as exc:
        raise type(exc)(f"line {lineno}: {exc}") from None


def parse_snapshot_file(path, format="snapshot-json"):
    """Read snapshots from a JSON-lines file (a single JSON array also works).

    Parameters
    ----------
    path : path-like
    format : {'snapshot-json', 'positions-json'}

    Returns
    -------
    list of LiquiditySnapshot
        In strictly increasing block order.
    """
    if format not in FORMATS:
        raise ValidationError(f"unknown format {format!r}; expected one of {FORMATS}")
    parse = _parse_snapshot_record if format == "snapshot-json" else _parse_positions_record
    snapshots = []
    for lineno, rec in _records(path):
        if not isinstance(rec, dict):
            raise ParseError("record must be a JSON object", lineno)
        snap = parse(rec, lineno)
        if snapshots and snap.block_number <= snapshots[-1].block_number:
            raise OrderingError(
                f"line {lineno}: block {snap.block_number} follows block "
                f"{snapshots[-1].block_number}"
            )
        snapshots.append(snap)
    return snapshots


def write_snapshot_file(snapshots, path):
    lines = []
    for s in snapshots:
        rec = {
            "block": int(s.block_number),
            "tick_spacing": int(s.tick_spacing),
            "current_tick": int(s.current_tick),
            "liquidity": [[int(t), float(v)] for t, v in zip(s.ticks, s.liquidity)],
        }
        lines.append(json.dumps(rec))
    Path(path).write_text("\n".join(lines) + "\n")


# -- aggregation and standardization -----------------------------------------


def aggregate_positions(positions, tick_spacing, tick_range=None):
    """Sum LP liquidity levels over half-open ranges on the tick grid.

    Parameters
    ----------
    positions : sequence of LpPosition
    tick_spacing : int
    tick_range : (int, int), optional
        Inclusive first and last tick to evaluate. Defaults to the span of
        all position bounds.

    Returns
    -------
    dict
        Ordered ``tick -> aggregate liquidity`` map.
    """
    s = int(tick_spacing)
    if s <= 0:
        raise ValidationError(f"tick_spacing must be positive, got {tick_spacing}")
    for p in positions:
        p.check_spacing(s)
    if tick_range is None:
        if not positions:
            return {}
        tick_range = (
            min(p.range_lower_tick for p in positions),
            max(p.range_upper_tick for p in positions),
        )
    lo, hi = (int(v) for v in tick_range)
    if lo % s or hi % s or hi < lo:
        raise ValidationError(f"tick_range {tick_range} must be ordered multiples of {s}")
    ticks = np.arange(lo, hi + s, s, dtype=np.int64)
    # difference array over the grid; indices past either end are clipped away
    delta = np.zeros(ticks.size + 1)
    for p in positions:
        a = np.searchsorted(ticks, p.range_lower_tick)
        b = np.searchsorted(ticks, p.range_upper_tick)
        delta[a] += p.liquidity_level
        delta[b] -= p.liquidity_level
    values = np.cumsum(delta[:-1])
    # cancel round-off so ticks outside every range are exactly zero
    covered = np.zeros(ticks.size, dtype=bool)
    for p in positions:
        covered |= (ticks >= p.range_lower_tick) & (ticks < p.range_upper_tick)
    values[~covered] = 0.0
    return dict(zip(ticks.tolist(), values.tolist()))


def rank_standardize(snapshot, M):
    """Map a snapshot to ``M`` rank-standardized coordinates around the price.

    The anchor is the current tick; the ``(M-1)/2`` nearest jump ticks on
    each side fill the remaining slots.

    Returns
    -------
    grid_x : ndarray of shape (M,)
    values : ndarray of shape (M,)
        Raw (not log) liquidity at the selected ticks.
    """
    M = check_odd_M(M)
    half = (M - 1) // 2
    jumps = snapshot.jump_ticks()
    cur = snapshot.current_tick
    left = jumps[jumps < cur]
    right = jumps[jumps > cur]
    if left.size < half or right.size < half:
        raise InsufficientJumpsError(
            f"block {snapshot.block_number}: need {half} jumps per side, "
            f"found {left.size} left and {right.size} right of tick {cur}"
        )
    ticks = np.concatenate((left[-half:], [cur], right[:half]))
    return standard_grid(M), snapshot.liquidity_at(ticks)


def build_surface(snapshots, block_spacing, M, allow_gaps=False):
    """Subsample snapshots on a regular block grid and log-transform.

    The first snapshot fixes the grid origin. With ``allow_gaps`` a missing
    block drops its row with a warning instead of raising.
    """
    M = check_odd_M(M)
    if block_spacing <= 0:
        raise ValidationError(f"block_spacing must be positive, got {block_spacing}")
    if not snapshots:
        raise ValidationError("no snapshots")
    by_block = {s.block_number: s for s in snapshots}
    b0 = snapshots[0].block_number
    last = snapshots[-1].block_number
    blocks, rows = [], []
    grid = standard_grid(M)
    for b in range(b0, last + 1, block_spacing):
        snap = by_block.get(b)
        if snap is None:
            if not allow_gaps:
                raise GapError(b)
            warnings.warn(f"dropping missing block {b}", stacklevel=2)
            continue
        _, liq = rank_standardize(snap, M)
        bad = np.flatnonzero(liq <= 0)
        if bad.size:
            raise LogDomainError(b, grid[bad[0]])
        blocks.append(b)
        rows.append(np.log(liq))
    return SurfaceGrid(np.array(blocks, dtype=np.int64), grid, np.vstack(rows))


def mean_std_functions(surface):
    """Pointwise sample mean and standard deviation with the 1/T convention."""
    Y = surface.values if isinstance(surface, SurfaceGrid) else np.asarray(surface, dtype=float)
    mean = Y.mean(axis=0)
    dev = Y - mean
    std = np.sqrt(np.mean(dev * dev, axis=0))
    # constant columns must give exactly zero
    std[np.all(Y == Y[0], axis=0)] = 0.0
    return SummaryFunctions(mean, std)


# -- surface CSV --------------------------------------------------------------


def surface_header(grid_x):
    return ["block"] + [f"{x:.6f}" for x in grid_x]


def write_surface_csv(surface, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(surface_header(surface.grid_x))
        for b, row in zip(surface.block_numbers, surface.values):
            w.writerow([int(b)] + [repr(float(v)) for v in row])


def read_surface_csv(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[0] != "block":
                raise ParseError("surface CSV must start with a 'block' column", 1)
            M = len(header) - 1
            blocks, rows = [], []
            for lineno, rec in enumerate(reader, start=2):
                if len(rec) != M + 1:
                    raise ParseError(f"expected {M + 1} fields, got {len(rec)}", lineno)
                try:
                    blocks.append(int(rec[0]))
                    rows.append([float(v) for v in rec[1:]])
                except ValueError as exc:
                    raise ParseError(str(exc), lineno) from None
    except StopIteration:
        raise ParseError("empty surface file", 1) from None
    grid = standard_grid(M)
    if [f"{x:.6f}" for x in grid] != header[1:]:
        raise ParseError("grid header does not match the standard rank grid", 1)
    return SurfaceGrid(np.array(blocks, dtype=np.int64), grid, np.array(rows).reshape(-1, M))
