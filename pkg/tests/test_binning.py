import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netdens.binning import (
    VARIANCE_FLOOR,
    BinConfig,
    bin_events,
    bin_offsets,
    default_bin_width,
    merge_binned,
    plugin_variance,
    write_histogram_csv,
)
from netdens.network import NetworkPoint
from netdens.simulate import star_network

STAR = star_network(3)


def test_four_events_in_one_bin(star):
    pts = [NetworkPoint("e1", s) for s in (0.21, 0.22, 0.25, 0.29)]
    b = bin_events(star, pts, 0.1)
    e1 = b["e1"]
    assert e1.heights[2] == pytest.approx(10.0, abs=1e-12)
    assert np.count_nonzero(e1.heights) == 1
    assert not b["e2"].counts.any()


def test_width_adapts_to_tile_the_edge(star):
    b = bin_events(star, [NetworkPoint("e1", 0.5)], BinConfig(0.3))
    assert b["e1"].n_bins == 3
    assert b["e1"].actual_width == pytest.approx(1 / 3)
    np.testing.assert_allclose(b["e1"].centers, [1 / 6, 1 / 2, 5 / 6])


def test_offset_on_bin_edge_goes_up_and_endpoint_stays():
    idx = bin_offsets(np.array([0.0, 0.25, 0.5, 0.75, 1.0]), 1.0, 4)
    np.testing.assert_array_equal(idx, [0, 1, 2, 3, 3])
    # widths that are not exactly representable
    idx = bin_offsets(np.array([0.1, 0.2, 0.3]), 1.0, 10)
    np.testing.assert_array_equal(idx, [1, 2, 3])


def test_rejects_empty_and_bad_input(star):
    with pytest.raises(ValueError):
        bin_events(star, [], 0.1)
    with pytest.raises(ValueError):
        bin_events(star, {"e1": [1.5]}, 0.1)
    with pytest.raises(ValueError):
        BinConfig(0.0)


def test_heights_are_counts_over_n_width(star, rng):
    pts = {"e1": rng.random(50), "e3": rng.random(30)}
    b = bin_events(star, pts, 0.07)
    for e in b.edges.values():
        np.testing.assert_array_equal(e.heights, e.counts / (80 * e.actual_width))
        np.testing.assert_allclose(np.diff(e.centers), e.actual_width)
    assert sum(int(e.counts.sum()) for e in b.edges.values()) == 80


def test_merge_equals_joint_binning(star, rng):
    a = {"e1": rng.random(20), "e2": rng.random(5)}
    c = {"e2": rng.random(7), "e3": rng.random(11)}
    joint = {k: np.concatenate([a.get(k, []), c.get(k, [])]) for k in ("e1", "e2", "e3")}
    m = merge_binned(bin_events(star, a, 0.1), bin_events(star, c, 0.1))
    j = bin_events(star, joint, 0.1)
    for k in j.edges:
        np.testing.assert_array_equal(m[k].counts, j[k].counts)
        np.testing.assert_allclose(m[k].heights, j[k].heights, rtol=0, atol=1e-12)


def test_default_width_is_small_relative_to_h():
    assert default_bin_width(0.4) == pytest.approx(0.02)
    assert default_bin_width(0.2, 0.4) == pytest.approx(0.005)


def test_plugin_variance_formula_and_floor():
    np.testing.assert_allclose(plugin_variance([2.0], 100, 0.1), [2.0 / 10 - 4.0 / 100])
    assert plugin_variance([0.0], 100, 0.1)[0] == VARIANCE_FLOOR


def test_histogram_csv(star, tmp_path):
    b = bin_events(star, [NetworkPoint("e2", 0.5)], 0.5)
    path = tmp_path / "h.csv"
    write_histogram_csv(b, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "edge_id,center,count,height"
    assert len(lines) == 1 + 6
    assert "e2,0.75,1,2.0" in lines


events = st.lists(st.tuples(st.sampled_from(["e1", "e2", "e3"]), st.floats(0, 1)), min_size=1, max_size=200)


@settings(max_examples=100, deadline=None)
@given(events, st.floats(0.01, 0.7))
def test_mass_conservation_and_refinement(evs, w):
    pts = [NetworkPoint(e, s) for e, s in evs]
    coarse = bin_events(STAR, pts, w)
    fine = bin_events(STAR, pts, w / 2)
    assert coarse.area() == pytest.approx(1.0, abs=1e-12)
    assert fine.area() == pytest.approx(1.0, abs=1e-12)
    for b in (coarse, fine):
        assert sum(int(e.counts.sum()) for e in b.edges.values()) == len(pts)
