import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fppflow.bounds import (BoundParams, bounds_grid, chebyshev_exponent, choose_lambda_delta, choose_lambda_p0,
                            count_diamond_sets, count_vertex_animals, diamond_root, epsilon0_renorm,
                            growth_table, log_zero_flow_bound, renorm_exponent, zero_flow_bound)
from fppflow.flow import OracleSizeError
from fppflow.lattice import edge_key, key_edge
from oracles import connected_sets_containing, plaquettes_meet

mp.mp.dps = 50


def mp_bracket(p, eps, lam, c, rho=0):
    p, eps, lam, c, rho = map(mp.mpf, (p, eps, lam, c, rho))
    return -rho - mp.log(c) + lam * (1 - eps) - mp.log(p + (1 - p) * mp.exp(lam))


def test_bracket_collapses():
    assert chebyshev_exponent(BoundParams(0.7, 0.1, 2, 0.0, 5.0, 0.3)) == pytest.approx(-0.3 - math.log(5))
    assert chebyshev_exponent(BoundParams(1.0, 0.1, 2, 4.0, 5.0, 0.0)) == pytest.approx(-math.log(5) + 3.6)


@pytest.mark.parametrize("p,eps,lam,c,rho", [(0.9, 0.1, 3.0, 2.0, 0.0), (0.5, 0.0, 1.0, 1.5, 0.2),
                                             (0.999, 0.3, 200.0, 40.0, 0.0), (0.0, 0.5, 700.0, 3.0, 0.0)])
def test_bracket_matches_mpmath(p, eps, lam, c, rho):
    got = chebyshev_exponent(BoundParams(p, eps, 2, lam, c, rho))
    assert got == pytest.approx(float(mp_bracket(p, eps, lam, c, rho)), rel=1e-12, abs=1e-12)


def test_lambda_p0_at_c_equal_e():
    lam, p0 = choose_lambda_p0(0.0, math.e)
    assert lam == pytest.approx(3.0)
    e3 = mp.e ** 3
    expected = (e3 - mp.e) / (e3 - 1)
    assert p0 == pytest.approx(float(expected), rel=1e-14)
    assert p0 == pytest.approx(0.90997, abs=1e-5)
    assert float(mp.log(p0 + (1 - p0) * e3)) == pytest.approx(1.0, rel=1e-12)


def test_working_example_needs_p_above_p0():
    # with eps=0.2 and c=40 the admissible p0 sits above 0.99
    lam, p0 = choose_lambda_p0(0.2, 40.0)
    assert p0 > 0.99
    at_p0 = chebyshev_exponent(BoundParams(p0, 0.2, 2, lam, 40.0))
    assert at_p0 >= math.log(40) - 1e-9
    below = chebyshev_exponent(BoundParams(0.99, 0.2, 2, lam, 40.0))
    assert below == pytest.approx(float(mp_bracket(0.99, 0.2, lam, 40.0)), rel=1e-12)
    assert below < math.log(40)


def test_lambda_p0_limits():
    p0s = [choose_lambda_p0(eps, 3.0)[1] for eps in (0.0, 0.3, 0.6, 0.9)]
    assert all(a < b for a, b in zip(p0s, p0s[1:])) and p0s[-1] < 1
    # at eps=0.99, 1 - p0 is about 1e-143, far below the spacing of floats near 1
    assert choose_lambda_p0(0.99, 3.0)[1] == 1.0
    # as c -> 1+, lam -> 0+ but p0 -> 1 - (1 - eps)/3, not 0
    lam, p0 = choose_lambda_p0(0.2, 1 + 1e-9)
    assert lam < 1e-8
    assert p0 == pytest.approx(1 - 0.8 / 3, abs=1e-6)
    with pytest.raises(ValueError):
        choose_lambda_p0(1.0, 2.0)
    with pytest.raises(ValueError):
        choose_lambda_p0(0.1, 1.0)


@given(st.floats(0, 0.95), st.floats(1.01, 60), st.floats(0, 1), st.floats(0, 2))
@settings(max_examples=200)
def test_bracket_above_ln_c(eps, c, t, rho):
    lam, p0 = choose_lambda_p0(eps, c)
    p = min(p0 + t * (1 - p0), 1.0)
    p = max(p, p0)
    assert chebyshev_exponent(BoundParams(p, eps, 2, lam, c, rho)) >= math.log(c) - rho - 1e-12
    assert mp_bracket(p, eps, lam, c, rho) >= mp.log(c) - rho - mp.mpf("1e-13")


def test_bounds_grid_shape():
    grid = bounds_grid([0.0, 0.1], [2.0, 40.0])
    assert grid.shape == (12, 7)
    assert (grid[:, 5] >= grid[:, 6] - 1e-9).all()


def test_renorm_exponent():
    lam, delta = choose_lambda_delta(2.0, 2)
    assert lam == pytest.approx(54 * math.log(2))
    assert renorm_exponent(2.0, lam, 2, delta) == pytest.approx(-math.log(2) + lam / 9 - math.log(2))
    assert renorm_exponent(2.0, lam, 2, delta) >= math.log(2) - 1e-9


def test_epsilon0_examples():
    assert epsilon0_renorm(2, 2) == 0.25
    assert epsilon0_renorm(8, 3) == 1 / 128
    assert epsilon0_renorm(8, 2, eta=0.5) == 1 / 32
    with pytest.raises(ValueError):
        epsilon0_renorm(3, 2)


def test_zero_flow_examples():
    assert zero_flow_bound(2, 1024, 0.0, 2) == 0.0
    assert zero_flow_bound(2, 1024, 1.0, 2) == 1.0
    ln = log_zero_flow_bound(2, 1024, 0.5, 2)
    assert ln / math.log(10) == pytest.approx(-59.4, abs=0.05)
    assert ln == pytest.approx(float(1024 * mp.log(mp.mpf(7) / 8)), rel=1e-13)


def test_zero_flow_monotone():
    ps = np.linspace(0.05, 0.95, 10)
    vals = [log_zero_flow_bound(3, 50, p, 2) for p in ps]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert all(log_zero_flow_bound(n, 50, 0.3, 3) < log_zero_flow_bound(n + 1, 50, 0.3, 3) for n in range(1, 6))
    assert all(log_zero_flow_bound(3, h, 0.3, 2) > log_zero_flow_bound(3, h + 1, 0.3, 2) for h in range(1, 20))


def _edge_neighbours(key):
    """All edges whose plaquette meets that of ``key``, by scanning a window."""
    x, axis = key
    e = key_edge(key)
    d = len(x)
    out = []
    for off in np.ndindex(*(5,) * d):
        w = tuple(c + o - 2 for c, o in zip(x, off))
        for a in range(d):
            f = (w, w[:a] + (w[a] + 1,) + w[a + 1:])
            if f != e and plaquettes_meet(e, f):
                out.append(edge_key(f))
    return out


@pytest.mark.parametrize("d,s_max", [(2, 5), (3, 3)])
def test_diamond_counts_match_brute_force(d, s_max):
    root = diamond_root(d)
    cache = {}

    def nbrs(k):
        if k not in cache:
            cache[k] = _edge_neighbours(k)
        return cache[k]

    for s in range(1, s_max + 1):
        assert count_diamond_sets(s, d).count == connected_sets_containing(root, nbrs, s)


def test_diamond_count_examples():
    assert count_diamond_sets(1, 2).count == 1 and count_diamond_sets(1, 3).count == 1
    assert count_diamond_sets(2, 2).count == 6
    assert count_diamond_sets(3, 2).count <= 6 * 2 * 6
    with pytest.raises(OracleSizeError):
        count_diamond_sets(7, 2)


def test_vertex_animals_known_values():
    # fixed polyominoes counted with a marked cell: s * A(s) = 1, 4, 18, 76, 315
    assert [count_vertex_animals(s, 2).count for s in range(1, 6)] == [1, 4, 18, 76, 315]
    assert [count_vertex_animals(s, 3).count for s in range(1, 4)] == [1, 6, 45]


def test_growth_bounded():
    g = [a.growth for a in growth_table(2)]
    assert max(g) < 12
