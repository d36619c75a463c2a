from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fppflow.capacity import (Bernoulli, CapacityField, Constant, Exponential, PointMassMixture, SeedSpec,
                              Uniform, sample_capacities)
from fppflow.flow import (FlowNetwork, OracleSizeError, Stream, Violation, brute_force_min_cut,
                          brute_force_packing, count_disjoint_open_paths, flow_value, max_flow, min_cut,
                          slab_upper_bound, validate_packing, validate_stream)
from fppflow.lattice import CylinderSpec, build_cylinder, diamond_connected, is_cut
from oracles import has_path, min_separating_value


def cyl(d, k, m):
    return build_cylinder(CylinderSpec(d, tuple(k), m))


def const(g, v):
    return CapacityField(g, np.full(g.n_edges, float(v)), Constant(float(v)))


def test_all_ones_three_columns():
    g = cyl(2, (2,), 3)
    res = max_flow(g, const(g, 1))
    assert res.value == 3 and res.exact
    assert len(res.cut) == 3 and res.cut_value == 3
    assert is_cut(res.cut, g) and min_cut(g, const(g, 1)) == res.cut
    n, packing = count_disjoint_open_paths(g, const(g, 1))
    assert n == 3 and validate_packing(g, const(g, 1), packing)


def test_all_zeros():
    g = cyl(2, (2,), 3)
    f = const(g, 0)
    res = max_flow(g, f)
    assert res.value == 0 and res.cut_value == 0
    assert not has_path(g, res.cut)
    assert count_disjoint_open_paths(g, f)[0] == 0
    assert brute_force_min_cut(g, f) == 0


def test_blocked_left_column():
    g = cyl(2, (1,), 1)
    vals = np.ones(4)
    vals[g.edge_index((0, 0), (0, 1))] = 0
    f = CapacityField(g, vals, Bernoulli(0.5))
    assert max_flow(g, f).value == 1
    assert brute_force_min_cut(g, f, "subsets") == 1 == min_separating_value(g, vals.tolist())


def test_unit_square_brute_force():
    g = cyl(2, (1,), 1)
    assert brute_force_min_cut(g, const(g, 1)) == 2
    assert brute_force_min_cut(g, const(g, 1), "subsets") == 2


def test_quarter_capacity_column():
    g = cyl(2, (1,), 2)
    vals = np.ones(g.n_edges)
    for x in (0, 1):
        vals[g.edge_index((x, 0), (x, 1))] = 0.25
    f = CapacityField(g, vals, PointMassMixture(((0.25, 0.5), (1.0, 0.5))))
    res = max_flow(g, f)
    assert res.value == Fraction(1, 2) == brute_force_min_cut(g, f)
    assert res.cut_value == res.value


def test_bernoulli_cut_matches_subset_oracle():
    g = cyl(2, (2,), 2)
    assert g.n_edges <= 16
    for r in range(20):
        f = sample_capacities(g, Bernoulli(0.5), SeedSpec(31, r))
        res = max_flow(g, f)
        expected = min_separating_value(g, f.values.tolist())
        assert res.value == res.cut_value == expected == brute_force_min_cut(g, f, "subsets")
        assert is_cut(res.cut, g)


def test_menger_bernoulli_07():
    g = cyl(2, (3,), 3)
    assert g.n_edges == 24
    for r in range(10):
        f = sample_capacities(g, Bernoulli(0.7), SeedSpec(5, r))
        n, packing = count_disjoint_open_paths(g, f)
        assert n == brute_force_packing(g, f) == flow_value(g, f)
        assert validate_packing(g, f, packing)


def test_disjoint_paths_need_binary():
    g = cyl(2, (1,), 1)
    with pytest.raises(TypeError):
        count_disjoint_open_paths(g, const(g, 2))


def test_oracle_size_refusal():
    g = cyl(2, (3,), 4)
    assert g.n_edges > 25
    with pytest.raises(OracleSizeError):
        brute_force_min_cut(g, const(g, 1))
    with pytest.raises(OracleSizeError):
        brute_force_packing(g, const(g, 1))
    with pytest.raises(OracleSizeError):
        brute_force_min_cut(cyl(2, (2,), 3), const(cyl(2, (2,), 3), 1), "subsets")


def test_validate_stream_examples():
    g = cyl(2, (2,), 3)
    f = const(g, 1)
    assert validate_stream(g, f, Stream.zero(g)) == 0
    net = [0] * g.n_edges
    for j in range(3):
        net[g.edge_index((0, j), (0, j + 1))] = 1
    assert validate_stream(g, f, Stream.from_net(net)) == 1
    over = list(net)
    over[g.edge_index((0, 0), (0, 1))] = 2
    v = validate_stream(g, f, Stream.from_net(over))
    assert isinstance(v, Violation) and v.kind == "capacity" and v.where == g.edge_index((0, 0), (0, 1))
    leak = [0] * g.n_edges
    leak[g.edge_index((0, 0), (0, 1))] = 1
    v = validate_stream(g, f, Stream.from_net(leak))
    assert isinstance(v, Violation) and v.kind == "conservation"


def test_downward_flow_counts_negative():
    g = cyl(2, (1,), 1)
    net = [0] * 4
    net[g.edge_index((0, 0), (0, 1))] = -1
    net[g.edge_index((1, 0), (1, 1))] = 1
    net[g.edge_index((0, 0), (1, 0))] = 0
    assert validate_stream(g, const(g, 1), Stream.from_net(net)) == 0


DISTS = [Bernoulli(0.6), PointMassMixture(((0.0, 0.3), (1.0, 0.4), (3.0, 0.3))),
         PointMassMixture(((0.0, 0.2),), Exponential(1.0), 0.8), PointMassMixture((), Uniform(0.0, 2.0), 1.0)]


@pytest.mark.parametrize("dist", DISTS, ids=["bern", "atoms", "exp", "unif"])
@pytest.mark.parametrize("shape", [(2, (4,), 5), (3, (2, 2), 3)])
def test_max_flow_invariants(dist, shape):
    g = cyl(*shape)
    for r in range(5):
        f = sample_capacities(g, dist, SeedSpec(77, r))
        res = max_flow(g, f)
        tol = 1e-9 * max(1.0, float(f.values.max()))
        assert abs(validate_stream(g, f, res.stream) - res.value) <= tol * g.n_edges
        assert abs(res.cut_value - res.value) <= tol * g.n_edges
        assert res.value <= slab_upper_bound(g, f) + tol
        assert is_cut(res.cut, g)
        if res.cut:
            assert diamond_connected(g.edge_set(res.cut))
        assert flow_value(g, f) == res.value


def test_max_flow_is_deterministic():
    g = cyl(2, (4,), 4)
    f = sample_capacities(g, DISTS[2], SeedSpec(1))
    a, b = max_flow(g, f), max_flow(g, f)
    assert a.value == b.value and a.cut == b.cut and a.stream == b.stream
    assert a.to_json(True) == b.to_json(True)


@given(st.integers(0, 2**32), st.integers(0, 30), st.floats(0, 3))
@settings(max_examples=40, deadline=None)
def test_monotone_in_single_capacity(seed, e, bump):
    g = cyl(2, (3,), 4)
    f = sample_capacities(g, DISTS[1], SeedSpec(seed))
    vals = f.values.copy()
    vals[e] += bump
    g2 = CapacityField(g, vals, PointMassMixture((), Uniform(0.0, 1.0), 1.0))
    assert flow_value(g, g2) >= flow_value(g, f) - 1e-9


def test_network_directed_pairs():
    net = FlowNetwork(4)
    net.add_pair(0, 1, 3)
    net.add_pair(1, 2, 2, 2)
    net.add_pair(2, 3, 5)
    net.add_pair(0, 2, 1)
    assert net.max_flow([0], [3]) == 3
