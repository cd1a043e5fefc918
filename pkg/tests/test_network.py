import math

import nets
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netdens.errors import NetworkError
from netdens.network import (
    NetworkPoint,
    build_network,
    crossing_allowed,
    direct_access_filter,
    h_neighborhood,
    network_distance,
)


def test_smallest_network_has_degree_one_ends():
    net = build_network([(0, (0, 0)), (1, (1, 0))], [("e", 0, 1, 1.0)])
    assert net.degree(0) == net.degree(1) == 1
    assert net.total_length == 1.0


def test_star_degrees(star):
    assert star.degree("v") == 3
    assert all(star.degree(f"t{j}") == 1 for j in (1, 2, 3))


def test_unknown_vertex_is_named():
    with pytest.raises(NetworkError, match="ghost") as info:
        build_network([(0, (0, 0))], [("e", 0, "ghost", 1.0)])
    assert info.value.offending_id == "ghost"


@pytest.mark.parametrize(
    "verts, edges, culprit",
    [
        ([(0, (0, 0)), (0, (1, 1))], [("e", 0, 0, 1.0)], 0),
        ([(0, (0, 0)), (1, (1, 1))], [("e", 0, 1, 1.0), ("e", 1, 0, 1.0)], "e"),
        ([(0, (0, 0)), (1, (1, 1))], [("e", 0, 1, 0.0)], "e"),
        ([(0, (0, 0)), (1, (1, 1))], [("e", 0, 1, -2.0)], "e"),
    ],
)
def test_validation_reports_offending_id(verts, edges, culprit):
    with pytest.raises(NetworkError) as info:
        build_network(verts, edges)
    assert info.value.offending_id == culprit


def test_polyline_must_match_length():
    verts = [(0, (0, 0)), (1, (1, 1))]
    poly = [(0, 0), (1, 0), (1, 1)]
    net = build_network(verts, [{"id": "e", "u": 0, "v": 1, "length": 2.0, "polyline": poly}])
    assert net.edge("e").polyline[1] == (1.0, 0.0)
    with pytest.raises(NetworkError, match="polyline"):
        build_network(verts, [{"id": "e", "u": 0, "v": 1, "length": 2.1, "polyline": poly}])


def test_distance_to_self_is_zero(star):
    p = NetworkPoint("e1", 0.3)
    r = network_distance(star, p, p)
    assert r.distance == 0.0 and r.vertex_sequence == () and r.edge_sequence == ()


def test_same_edge_distance(star):
    r = network_distance(star, NetworkPoint("e1", 0.2), NetworkPoint("e1", 0.7))
    assert r.distance == pytest.approx(0.5, abs=1e-15)
    assert r.vertex_sequence == ()


def test_triangle_midpoints(triangle):
    # a = (1,2), b = (2,3): via vertex 2 it is 0.5 + 0.5; the other way 0.5 + 1 + 0.5
    r = network_distance(triangle, NetworkPoint("a", 0.5), NetworkPoint("b", 0.5))
    assert r.distance == pytest.approx(1.0)
    assert r.vertex_sequence == (2,)
    assert r.edge_sequence == ("a", "b")


def test_disconnected_is_infinite():
    net = build_network(
        [(0, (0, 0)), (1, (1, 0)), (2, (5, 0)), (3, (6, 0))],
        [("e", 0, 1, 1.0), ("f", 2, 3, 1.0)],
    )
    r = network_distance(net, NetworkPoint("e", 0.5), NetworkPoint("f", 0.5))
    assert math.isinf(r.distance) and r.vertex_sequence == ()


def test_equal_length_routes_pick_smallest_vertex_ids():
    # square 1-2-3-4-1 of unit sides: opposite midpoints have two routes of length 2
    net = build_network(
        [(1, (0, 0)), (2, (1, 0)), (3, (1, 1)), (4, (0, 1))],
        [("a", 1, 2, 1.0), ("b", 2, 3, 1.0), ("c", 3, 4, 1.0), ("d", 4, 1, 1.0)],
    )
    r = network_distance(net, NetworkPoint("a", 0.5), NetworkPoint("c", 0.5))
    assert r.distance == pytest.approx(2.0)
    assert r.vertex_sequence == (1, 4)


def test_neighborhood_empty_for_small_h(star):
    data = [NetworkPoint("e2", 0.5), NetworkPoint("e1", 0.9)]
    assert len(h_neighborhood(star, NetworkPoint("e1", 0.2), 0.1, data)) == 0


def test_neighborhood_crosses_vertex(star):
    x = NetworkPoint("e1", 0.3)  # 0.3 from v
    nb = h_neighborhood(star, x, 0.5, [NetworkPoint("e2", 0.1)], toward="v")
    (d,) = nb.data
    assert d.signed_offset.value == pytest.approx(0.4)
    assert d.vertices_crossed == ("v",)
    assert d.terminal_edge == "e2"


def test_signed_offsets_change_sign_at_x(star):
    x = NetworkPoint("e1", 0.3)
    nb = h_neighborhood(star, x, 0.5, [NetworkPoint("e1", 0.1), NetworkPoint("e1", 0.6)], toward="v")
    assert [round(d.signed_offset.value, 12) for d in nb] == [0.2, -0.3]


def test_points_at_distance_h_are_excluded(star):
    x = NetworkPoint("e1", 0.5)
    nb = h_neighborhood(star, x, 0.25, [NetworkPoint("e1", 0.75), NetworkPoint("e1", 0.7499)])
    assert [d.point.offset for d in nb] == [0.7499]


def test_cycle_shorter_than_2h_warns():
    net = build_network([(0, (0, 0))], [("loop", 0, 0, 1.0)])
    nb = h_neighborhood(net, NetworkPoint("loop", 0.25), 0.6, [NetworkPoint("loop", 0.5)])
    assert nb.loop_warning
    assert not h_neighborhood(net, NetworkPoint("loop", 0.25), 0.4, []).loop_warning


def test_short_edge_warns(chain):
    nb = h_neighborhood(chain, NetworkPoint("e1", 0.9), 0.5, [])
    assert nb.short_edge_warning and not nb.loop_warning
    assert not h_neighborhood(chain, NetworkPoint("e1", 0.3), 0.2, []).warning


def test_direct_access_identity_and_empty(star):
    x = NetworkPoint("e1", 0.2)
    data = [NetworkPoint("e1", 0.1), NetworkPoint("e2", 0.1), NetworkPoint("e3", 0.05)]
    nb = h_neighborhood(star, x, 0.5, data)
    assert direct_access_filter(nb, {"v", "t1", "t2", "t3"}) == nb.data
    kept = direct_access_filter(nb, set())
    assert [d.point for d in kept] == [NetworkPoint("e1", 0.1)]


def test_direct_access_chain_scenario(chain):
    # accepted at v1, rejected at v2: the datum beyond v2 loses access
    x = NetworkPoint("e1", 0.9)
    x1, x2, x3 = NetworkPoint("e1", 0.7), NetworkPoint("e2", 0.15), NetworkPoint("e3", 0.1)
    nb = h_neighborhood(chain, x, 0.6, [x1, x2, x3])
    assert [d.vertices_crossed for d in nb] == [(), ("v1",), ("v1", "v2")]
    kept = direct_access_filter(nb, {"v1"})
    assert [d.point for d in kept] == [x1, x2]


def test_grouped_access_respects_edge_groups(star):
    groups = {"v": ((("e1", "u"), ("e2", "u")),)}
    assert crossing_allowed(("v", ("e1", "u"), ("e2", "u")), groups)
    assert not crossing_allowed(("v", ("e1", "u"), ("e3", "u")), groups)


# ---------------------------------------------------------------------------
# metric properties on random points


def _random_point(net, draw_edge, draw_off):
    eid = net.edge_ids()[draw_edge % len(net.edge_ids())]
    return NetworkPoint(eid, draw_off * net.edge(eid).length)


point_args = st.tuples(st.integers(0, 10), st.floats(0, 1))

TRIANGLE, CHAIN = nets.triangle(), nets.chain()


@settings(max_examples=60, deadline=None)
@given(point_args, point_args, point_args)
def test_symmetry_and_triangle_inequality(pa, pb, pc):
    for net in (TRIANGLE, CHAIN):
        a, b, c = (_random_point(net, *p) for p in (pa, pb, pc))
        dab = network_distance(net, a, b).distance
        assert dab == pytest.approx(network_distance(net, b, a).distance, abs=1e-12)
        dac = network_distance(net, a, c).distance
        dbc = network_distance(net, b, c).distance
        assert dac <= dab + dbc + 1e-12


@settings(max_examples=40, deadline=None)
@given(point_args, st.floats(0.05, 1.5), st.floats(0.05, 1.5), st.integers(0, 2**31))
def test_neighborhood_consistency_and_monotonicity(px, h1, h2, seed):
    chain = CHAIN
    r = np.random.default_rng(seed)
    x = _random_point(chain, *px)
    data = [_random_point(chain, int(r.integers(0, 5)), float(r.random())) for _ in range(25)]
    lo, hi = sorted((h1, h2))
    small = h_neighborhood(chain, x, lo, data)
    big = h_neighborhood(chain, x, hi, data)
    assert {d.index for d in small} <= {d.index for d in big}
    for d in big:
        exact = network_distance(chain, x, d.point).distance
        assert abs(d.signed_offset.value) == pytest.approx(exact, abs=1e-12)
        assert abs(d.signed_offset.value) < hi
