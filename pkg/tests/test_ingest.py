import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liqsurf.exceptions import (
    GapError,
    InsufficientJumpsError,
    LogDomainError,
    OrderingError,
    ParseError,
    ValidationError,
)
from liqsurf.ingest import (
    LiquiditySnapshot,
    LpPosition,
    SurfaceGrid,
    aggregate_positions,
    build_surface,
    mean_std_functions,
    parse_snapshot_file,
    rank_standardize,
    read_surface_csv,
    standard_grid,
    write_snapshot_file,
    write_surface_csv,
)


def _write_lines(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    return path


def _snap(block, current=0, ticks=(-2, -1, 0, 1, 2), values=(1.0, 2.0, 3.0, 4.0, 5.0), s=1):
    return LiquiditySnapshot(block, s, current, np.array(ticks), np.array(values))


# -- parsing -------------------------------------------------------------------


def test_parse_minimal_snapshot(tmp_path):
    f = _write_lines(tmp_path / "s.jsonl", [
        {"block": 5, "tick_spacing": 10, "current_tick": 0, "liquidity": [[-10, 1.0], [0, 2.0], [10, 3.0]]}
    ])
    snaps = parse_snapshot_file(f)
    assert len(snaps) == 1
    assert snaps[0].ticks.tolist() == [-10, 0, 10]
    assert snaps[0].liquidity.tolist() == [1.0, 2.0, 3.0]


def test_parse_duplicate_tick_is_validation_error(tmp_path):
    f = _write_lines(tmp_path / "s.jsonl", [
        {"block": 1, "tick_spacing": 1, "current_tick": 0, "liquidity": [[100, 1.0], [100, 2.0]]}
    ])
    with pytest.raises(ValidationError, match="duplicate tick 100"):
        parse_snapshot_file(f)


def test_parse_non_increasing_blocks(tmp_path):
    rec = {"tick_spacing": 1, "current_tick": 0, "liquidity": [[0, 1.0]]}
    f = _write_lines(tmp_path / "s.jsonl", [{"block": 200, **rec}, {"block": 100, **rec}])
    with pytest.raises(OrderingError):
        parse_snapshot_file(f)


def test_parse_error_names_line(tmp_path):
    f = tmp_path / "bad.jsonl"
    good = json.dumps({"block": 1, "tick_spacing": 1, "current_tick": 0, "liquidity": [[0, 1.0]]})
    f.write_text(good + "\n{not json\n")
    with pytest.raises(ParseError, match="line 2"):
        parse_snapshot_file(f)


def test_parse_missing_field(tmp_path):
    f = _write_lines(tmp_path / "s.jsonl", [{"block": 1, "tick_spacing": 1, "liquidity": []}])
    with pytest.raises(ParseError, match="line 1"):
        parse_snapshot_file(f)


def test_parse_positions_format(tmp_path):
    f = _write_lines(tmp_path / "p.jsonl", [{
        "block": 3, "tick_spacing": 10, "current_tick": 50,
        "positions": [{"L": 3.0, "lower": 0, "upper": 100}, {"L": 4.0, "lower": 50, "upper": 150}],
    }])
    (snap,) = parse_snapshot_file(f, "positions-json")
    assert snap.liquidity_at([0, 40, 60, 100, 140, 150]).tolist() == [3.0, 3.0, 7.0, 4.0, 4.0, 0.0]


def test_snapshot_file_roundtrip(tmp_path):
    snaps = [_snap(0), _snap(10, values=(2.0, 1.0, 3.0, 5.0, 4.0))]
    write_snapshot_file(snaps, tmp_path / "s.jsonl")
    back = parse_snapshot_file(tmp_path / "s.jsonl")
    for a, b in zip(snaps, back):
        assert a.block_number == b.block_number
        np.testing.assert_array_equal(a.ticks, b.ticks)
        np.testing.assert_array_equal(a.liquidity, b.liquidity)


def test_snapshot_rejects_off_spacing_tick():
    with pytest.raises(ValidationError, match="not a multiple"):
        LiquiditySnapshot(0, 10, 0, np.array([0, 15]), np.array([1.0, 1.0]))


def test_snapshot_rejects_negative_liquidity():
    with pytest.raises(ValidationError):
        LiquiditySnapshot(0, 1, 0, np.array([0, 1]), np.array([1.0, -1.0]))


# -- aggregation ---------------------------------------------------------------


def test_single_position_half_open():
    liq = aggregate_positions([LpPosition(5.0, 0, 100)], 1, (0, 150))
    assert liq[50] == 5.0
    assert liq[100] == 0.0
    assert liq[0] == 5.0


def test_overlapping_positions_add():
    liq = aggregate_positions([LpPosition(3.0, 0, 100), LpPosition(4.0, 50, 150)], 10)
    assert liq[60] == 7.0
    assert liq[40] == 3.0
    assert liq[140] == 4.0


def test_empty_positions_all_zero():
    liq = aggregate_positions([], 10, (-50, 50))
    assert set(liq.values()) == {0.0}
    assert len(liq) == 11


def test_position_validation():
    with pytest.raises(ValidationError):
        LpPosition(0.0, 0, 10)
    with pytest.raises(ValidationError):
        LpPosition(1.0, 10, 10)
    with pytest.raises(ValidationError):
        aggregate_positions([LpPosition(1.0, 0, 15)], 10)


_position = st.builds(
    lambda L, lo, width: LpPosition(L, 10 * lo, 10 * (lo + width)),
    st.floats(0.5, 1e6),
    st.integers(-20, 20),
    st.integers(1, 15),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(_position, max_size=6), st.lists(_position, max_size=6))
def test_aggregation_is_additive(a, b):
    rng = (-200, 350)
    both = aggregate_positions(a + b, 10, rng)
    sa, sb = aggregate_positions(a, 10, rng), aggregate_positions(b, 10, rng)
    for t in both:
        assert both[t] == pytest.approx(sa[t] + sb[t], rel=1e-12, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(_position, min_size=1, max_size=6))
def test_aggregation_matches_indicator_sum(positions):
    liq = aggregate_positions(positions, 10, (-200, 350))
    for t, v in liq.items():
        expected = sum(p.liquidity_level for p in positions if p.range_lower_tick <= t < p.range_upper_tick)
        assert v == pytest.approx(expected, rel=1e-12, abs=1e-9)


# -- rank standardization ------------------------------------------------------


def _brute_force_jumps(snap, lo, hi):
    s = snap.tick_spacing
    ticks = np.arange(lo, hi + s, s)
    vals = snap.liquidity_at(ticks)
    prev = snap.liquidity_at(ticks - s)
    return ticks[vals != prev]


def test_m3_one_jump_each_side():
    # step function: 2 on [-30, 10), 5 on [10, 40), zero elsewhere
    snap = LiquiditySnapshot(0, 10, 0, np.array([-30, 10, 40]), np.array([2.0, 5.0, 0.0]))
    grid, vals = rank_standardize(snap, 3)
    assert grid.tolist() == [-1.0, 0.0, 1.0]
    # left jumps: -30; right: 10, 40 -> nearest is 10
    assert vals.tolist() == [2.0, 2.0, 5.0]
    np.testing.assert_array_equal(snap.jump_ticks(), _brute_force_jumps(snap, -100, 100))


def test_constant_liquidity_jumps_only_at_support_edges():
    snap = LiquiditySnapshot(0, 1, 0, np.array([-5, 0, 5]), np.array([3.0, 3.0, 3.0]))
    assert snap.jump_ticks().tolist() == [-5, 6]
    with pytest.raises(InsufficientJumpsError):
        rank_standardize(snap, 5)


def test_uniform_liquidity_everywhere_zero():
    snap = LiquiditySnapshot(0, 1, 0, np.array([], dtype=int), np.array([]))
    with pytest.raises(InsufficientJumpsError):
        rank_standardize(snap, 3)


def test_side_deficit():
    snap = LiquiditySnapshot(0, 1, 0, np.array([-1, 0, 1, 2, 3]), np.array([1.0, 2.0, 3.0, 4.0, 5.0]))
    # left of 0 only tick -1 jumps
    with pytest.raises(InsufficientJumpsError, match="1 left"):
        rank_standardize(snap, 5)


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.integers(0, 4), min_size=3, max_size=25),
    st.integers(-8, 8),
    st.sampled_from([1, 10, 60]),
)
def test_jump_set_matches_brute_force(levels, current, s):
    ticks = np.arange(-10, -10 + len(levels)) * s
    snap = LiquiditySnapshot(0, s, current * s, ticks, np.array(levels, dtype=float))
    np.testing.assert_array_equal(
        snap.jump_ticks(), _brute_force_jumps(snap, (-12) * s, (len(levels) + 2) * s)
    )


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([3, 5, 11, 51, 201]))
def test_standard_grid_exact(M):
    grid = standard_grid(M)
    half = (M - 1) // 2
    assert grid[half] == 0.0
    np.testing.assert_array_equal(grid, -grid[::-1])
    np.testing.assert_allclose(grid, 2 * (np.arange(1, M + 1) - (half + 1)) / (M - 1), atol=1e-15)
    assert grid[0] == -1.0 and grid[-1] == 1.0


def test_even_m_rejected():
    with pytest.raises(ValidationError):
        standard_grid(4)
    with pytest.raises(ValidationError):
        rank_standardize(_snap(0), 4)


# -- surface assembly -----------------------------------------------------------


def test_build_surface_counts_rows_and_logs():
    snaps = [_snap(b, values=(1.0, 2.0, 1.0, 4.0, 5.0)) for b in range(0, 9601, 2400)]
    surf = build_surface(snaps, 2400, 3)
    assert surf.T == 5
    assert surf.block_numbers.tolist() == [0, 2400, 4800, 7200, 9600]
    # current tick 0 has liquidity 1.0 -> log 0
    assert surf.values[0, 1] == 0.0
    np.testing.assert_allclose(surf.values[0], np.log([2.0, 1.0, 4.0]))


def test_build_surface_subsamples():
    snaps = [_snap(b) for b in range(0, 100, 10)]
    surf = build_surface(snaps, 30, 3)
    assert surf.block_numbers.tolist() == [0, 30, 60, 90]


def test_build_surface_zero_liquidity_is_log_domain_error():
    snap = LiquiditySnapshot(7, 1, 0, np.array([-2, -1, 0, 1, 2]), np.array([1.0, 0.0, 2.0, 3.0, 4.0]))
    with pytest.raises(LogDomainError, match="block 7"):
        build_surface([snap], 1, 3)


def test_build_surface_gap():
    snaps = [_snap(0), _snap(10), _snap(30)]
    with pytest.raises(GapError, match="20"):
        build_surface(snaps, 10, 3)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        surf = build_surface(snaps, 10, 3, allow_gaps=True)
    assert surf.block_numbers.tolist() == [0, 10, 30]
    assert any("20" in str(x.message) for x in w)


def test_surface_grid_invariants():
    with pytest.raises(ValidationError):
        SurfaceGrid([0, 1], standard_grid(3), np.zeros((2, 5)))
    with pytest.raises(OrderingError):
        SurfaceGrid([1, 1], standard_grid(3), np.zeros((2, 3)))
    with pytest.raises(ValidationError):
        SurfaceGrid([0], standard_grid(3), np.array([[0.0, np.inf, 1.0]]))


def test_surface_csv_roundtrip_bit_exact(tmp_path, rng):
    surf = SurfaceGrid(np.arange(4) * 7, standard_grid(11), rng.normal(size=(4, 11)))
    write_surface_csv(surf, tmp_path / "s.csv")
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header.startswith("block,-1.000000,-0.800000")
    back = read_surface_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.values, surf.values)
    np.testing.assert_array_equal(back.block_numbers, surf.block_numbers)


def test_parse_build_serialize_deterministic(tmp_path):
    snaps = [_snap(b, values=(1.0 + b, 2.0, 3.0, 4.0, 5.0 + b)) for b in range(0, 50, 10)]
    write_snapshot_file(snaps, tmp_path / "s.jsonl")
    outs = []
    for i in range(2):
        surf = build_surface(parse_snapshot_file(tmp_path / "s.jsonl"), 10, 5)
        write_surface_csv(surf, tmp_path / f"o{i}.csv")
        outs.append((tmp_path / f"o{i}.csv").read_bytes())
    assert outs[0] == outs[1]


def test_central_subgrid():
    surf = SurfaceGrid([0], standard_grid(7), np.arange(7.0)[None, :])
    sub = surf.central(3)
    assert sub.values.tolist() == [[2.0, 3.0, 4.0]]
    assert sub.grid_x.tolist() == [-1.0, 0.0, 1.0]


# -- summary functions ----------------------------------------------------------


def test_mean_std_constant_surface():
    surf = SurfaceGrid([0, 1, 2], standard_grid(3), np.full((3, 3), 4.2))
    sf = mean_std_functions(surf)
    np.testing.assert_array_equal(sf.mean, 4.2)
    np.testing.assert_array_equal(sf.std, 0.0)


def test_mean_std_population_convention():
    sf = mean_std_functions(np.array([[0.0], [2.0]]))
    assert sf.mean.tolist() == [1.0]
    assert sf.std.tolist() == [1.0]


def test_mean_std_single_row():
    sf = mean_std_functions(np.array([[1.0, 2.0, 3.0]]))
    assert sf.mean.tolist() == [1.0, 2.0, 3.0]
    assert sf.std.tolist() == [0.0, 0.0, 0.0]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_mean_std_moment_identity(T, seed):
    Y = np.random.default_rng(seed).normal(3.0, 2.0, size=(T, 5))
    sf = mean_std_functions(Y)
    lhs = sf.std**2 + sf.mean**2
    rhs = np.mean(Y**2, axis=0)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)
