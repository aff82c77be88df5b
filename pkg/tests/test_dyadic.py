import numpy as np
import pytest

from homoglab import dyadic as dy
from homoglab import weights as wt

BALL = ((0.5, 0.5), 0.45)


def scan_cz_properties(E, cubes, max_level):
    """Exhaustive cell-scan oracle for the three decomposition properties."""
    n = 1 << max_level
    cover = np.zeros((n, n), dtype=int)
    for c in cubes:
        sl = c.cell_slice(max_level)
        assert E[sl].all(), "cube not contained in E"
        cover[sl] += 1
        parent = c.parent()
        if parent is not None:
            assert not E[parent.cell_slice(max_level)].all(), \
                "parent contained in E"
    assert cover.max() <= 1, "cubes overlap"
    assert np.array_equal(cover == 1, E), "union differs from E"


def test_cube_geometry():
    q = dy.DyadicCube(2, (1, 3), root_corner=(0.0, 0.0), root_side=1.0)
    assert q.side == 0.25
    assert q.corner == (0.25, 0.75)
    assert q.parent().index == (0, 1)
    kids = q.children()
    assert len(kids) == 4 and all(k.level == 3 for k in kids)


def test_cz_empty_set():
    assert dy.cz_decompose(dy.DyadicCube(0, (0, 0)), np.zeros((8, 8), bool), 3) == []


def test_cz_single_cell():
    E = np.zeros((8, 8), dtype=bool)
    E[5, 2] = True
    cubes = dy.cz_decompose(dy.DyadicCube(0, (0, 0)), E, 3)
    assert len(cubes) == 1
    assert cubes[0].level == 3 and cubes[0].index == (5, 2)


def test_cz_measure_precondition():
    E = np.ones((8, 8), dtype=bool)
    E[0, 0] = False
    with pytest.raises(dy.DyadicError, match="measure precondition"):
        dy.cz_decompose(dy.DyadicCube(0, (0, 0)), E, 3)


def test_cz_random_sets_satisfy_lemma_properties():
    Q = dy.DyadicCube(0, (0, 0))
    rng = np.random.default_rng(7)
    for _ in range(30):
        E = rng.random((64, 64)) < rng.uniform(0.05, 0.24)
        if E.sum() >= 64 * 64 // 4:
            continue
        cubes = dy.cz_decompose(Q, E, 6)
        scan_cz_properties(E, cubes, 6)
        levels = [c.level for c in cubes]
        assert levels == sorted(levels)  # deterministic order


# -- localized maximal operators --------------------------------------------

def test_maximal_constant_function():
    f = dy.GridFunction(np.full((64, 64), -3.0))
    m, mask = dy.local_maximal(f, BALL)
    assert np.allclose(m[mask], 3.0)


def test_maximal_indicator_left_half():
    v = np.zeros((64, 64))
    v[:32, :] = 1.0
    m, mask = dy.local_maximal(dy.GridFunction(v), BALL)
    left = mask.copy()
    left[32:, :] = False
    assert np.allclose(m[left], 1.0)
    vals = m[mask]
    assert vals.min() > 0.0 and vals.max() <= 1.0


def test_maximal_dominates_function():
    f = dy.GridFunction(np.random.default_rng(1).standard_normal((64, 64)))
    m, mask = dy.local_maximal(f, BALL)
    assert np.all(m[mask] >= np.abs(f.values)[mask] - 1e-14)


def test_maximal_monotone():
    rng = np.random.default_rng(2)
    f = rng.random((64, 64))
    g = f + rng.random((64, 64))
    mf, mask = dy.local_maximal(dy.GridFunction(f), BALL)
    mg, _ = dy.local_maximal(dy.GridFunction(g), BALL)
    assert np.all(mf[mask] <= mg[mask] + 1e-14)


def test_coarse_ladder_against_exhaustive_oracle():
    """Spec oracle: coarse <= exhaustive <= coarse * 1.2 on random grids."""
    for s in range(3):
        f = dy.GridFunction(np.random.default_rng(100 + s).random((64, 64)))
        mc, mask = dy.local_maximal(f, BALL)
        me, _ = dy.local_maximal(f, BALL,
                                 radii=dy.exhaustive_radii(f.cell, BALL[1]))
        ratio = me[mask] / mc[mask]
        assert np.nanmin(ratio) >= 1.0 - 1e-12
        assert np.nanmax(ratio) <= 1.2


def test_truncated_equals_local_at_smallest_radius():
    f = dy.GridFunction(np.random.default_rng(4).random((64, 64)))
    ml, _ = dy.local_maximal(f, BALL)
    mt, _ = dy.truncated_maximal(f, BALL, f.cell / 2)
    assert np.array_equal(np.nan_to_num(ml), np.nan_to_num(mt))


def test_truncated_constant():
    f = dy.GridFunction(np.full((64, 64), 2.5))
    m, mask = dy.truncated_maximal(f, BALL, 4 * f.cell)
    assert np.allclose(m[mask & np.isfinite(m)], 2.5)


def test_truncated_empty_family():
    f = dy.GridFunction(np.ones((32, 32)))
    with pytest.raises(dy.DyadicError, match="empty ball family"):
        dy.truncated_maximal(f, BALL, 0.5)


def test_truncated_nonincreasing_in_eps():
    f = dy.GridFunction(np.random.default_rng(5).random((64, 64)))
    m1, _ = dy.truncated_maximal(f, BALL, 2 * f.cell)
    m2, _ = dy.truncated_maximal(f, BALL, 4 * f.cell)
    both = np.isfinite(m1) & np.isfinite(m2)
    assert np.all(m2[both] <= m1[both] + 1e-14)


def test_truncated_scaling_comparison():
    """M^eps <= L^d M^(L eps) pointwise for L = 2 (paper-backed)."""
    for s in range(10):
        f = dy.GridFunction(np.random.default_rng(s).random((64, 64)))
        eps = 2 * f.cell
        m1, _ = dy.truncated_maximal(f, BALL, eps)
        m2, _ = dy.truncated_maximal(f, BALL, 2 * eps)
        both = np.isfinite(m1) & np.isfinite(m2)
        assert np.all(m1[both] <= 4.0 * m2[both] + 1e-12)


# -- distribution sets -------------------------------------------------------

def test_distribution_set_extremes():
    vals = np.random.default_rng(6).random((16, 16)) + 0.5
    gf = dy.GridFunction(vals)
    Q0 = dy.DyadicCube(1, (0, 1))
    assert dy.distribution_set(gf, Q0, vals.max() + 1).measure_cells == 0
    full = dy.distribution_set(gf, Q0, 1e-12)
    assert full.measure_cells == 8 * 8  # all of Q0


def test_distribution_set_monotone_nesting():
    vals = np.random.default_rng(8).random((32, 32))
    gf = dy.GridFunction(vals)
    e1 = dy.distribution_set(gf, None, 0.3).members
    e2 = dy.distribution_set(gf, None, 0.7).members
    assert np.all(e2 <= e1)


# -- weighted maximal bounds --------------------------------------------------

def test_strong_type_ratio_for_constant_f(square):
    w = wt.make_distance_weight(square, -0.5)
    rep = dy.verify_weighted_maximal_bounds(
        dy.GridFunction(np.ones((64, 64))), w, BALL, p=2.0)
    assert rep.strong_ratio == pytest.approx(1.0, abs=1e-12)


def test_weighted_bounds_finite_for_indicator():
    v = np.zeros((64, 64))
    v[20:40, 12:50] = 1.0
    rep = dy.verify_weighted_maximal_bounds(
        dy.GridFunction(v), wt.constant_weight(1.0), BALL, p=2.0)
    assert 1.0 <= rep.strong_ratio < np.inf
    assert 0.0 < rep.weak_ratio < np.inf


def test_indicator_ratio_below_exhaustive_oracle():
    v = np.zeros((64, 64))
    v[:32, :] = 1.0
    f = dy.GridFunction(v)
    w = wt.constant_weight(1.0)
    mc, mask = dy.local_maximal(f, BALL)
    me, _ = dy.local_maximal(f, BALL, radii=dy.exhaustive_radii(f.cell, BALL[1]))
    # the measured strong-type ratio with the coarse ladder is bounded by the
    # exhaustive-ladder oracle ratio
    num_c = np.nansum(mc[mask] ** 2)
    num_e = np.nansum(me[mask] ** 2)
    assert num_c <= num_e <= num_c * 1.2 ** 2
