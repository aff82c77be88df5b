import numpy as np
import pytest

from homoglab import weights as wt

REGION = (np.array([0.0, 0.0]), np.array([1.0, 1.0]))


def test_constant_weight_eval(square):
    w = wt.constant_weight(1.0)
    assert wt.eval_weight(w, np.array([0.37, 0.9])) == 1.0


def test_zero_exponent_is_one(square):
    w = wt.make_distance_weight(square, 0.0)
    pts = np.random.default_rng(0).random((10, 2))
    assert np.all(wt.eval_weight(w, pts) == 1.0)


def test_distance_weight_analytic_value(square):
    w = wt.make_distance_weight(square, -0.5)
    assert wt.eval_weight(w, np.array([0.5, 0.25])) == pytest.approx(2.0)


def test_singular_boundary_evaluation(square):
    w = wt.make_distance_weight(square, -0.5)
    with pytest.raises(wt.SingularEvaluationError, match="singular"):
        wt.eval_weight(w, np.array([0.0, 0.5]))


def test_inadmissible_exponent_rejected(square):
    for sg in (-1.0, 1.0, -1.5, 2.0):
        with pytest.raises(wt.WeightError, match="inadmissible"):
            wt.make_distance_weight(square, sg)


def test_regime_flags(square):
    assert wt.make_distance_weight(square, -0.5).a1_regime
    assert wt.make_distance_weight(square, 0.0).a1_regime
    assert not wt.make_distance_weight(square, 0.5).a1_regime


def test_tabulated_weight_positive_only():
    with pytest.raises(wt.WeightError, match="invalid weight"):
        wt.tabulated_weight(np.array([[1.0, -2.0]]), REGION)


# -- A_p estimation ---------------------------------------------------------

def _sampling(n=300, quad=16, seed=42, radii=(0.01, 0.25)):
    return wt.BallSampling(n_balls=n, radius_range=radii, quad_n=quad, seed=seed)


def test_constant_weight_ap_is_exactly_one(square):
    est = wt.estimate_ap_constant(wt.constant_weight(1.0), 2.0, REGION, _sampling())
    assert est.constant == 1.0
    est1 = wt.estimate_ap_constant(wt.make_distance_weight(square, 0.0), 1.0,
                                   REGION, _sampling())
    assert est1.constant == 1.0


def test_per_ball_quantity_at_least_one(square):
    w = wt.make_distance_weight(square, -0.5)
    s = _sampling(n=100)
    centers, radii = wt.sample_ball_family(REGION, s)
    for c, r in zip(centers, radii):
        vals = wt.ball_values(w, c, r, s.quad_n)
        for p in (1.0, 1.5, 2.0, 4.0):
            assert wt.ap_ball_quantity(vals, p) >= 1.0 - 1e-12


def test_ap_monotone_in_p_same_family(square):
    w = wt.make_distance_weight(square, -0.5)
    s = _sampling()
    prev = np.inf
    for p in (1.0, 1.5, 2.0, 3.0):
        est = wt.estimate_ap_constant(w, p, REGION, s)
        assert est.constant <= prev * (1 + 1e-9)
        prev = est.constant


def test_ap_scaling_invariance(square):
    w = wt.make_distance_weight(square, -0.5)
    s = _sampling(n=100)
    base = wt.estimate_ap_constant(w, 2.0, REGION, s).constant
    centers, radii = wt.sample_ball_family(REGION, s)
    # same ball set, scaled values
    sup = 0.0
    for c, r in zip(centers, radii):
        vals = 7.25 * wt.ball_values(w, c, r, s.quad_n)
        sup = max(sup, wt.ap_ball_quantity(vals, 2.0))
    assert sup == pytest.approx(base, rel=1e-12)


def test_ap_estimate_stability_under_doubling(square):
    """Spec's sampling oracle: value stable within 10% when n_balls and
    quadrature both double (families are nested by construction)."""
    w = wt.make_distance_weight(square, -0.5)
    a = wt.estimate_ap_constant(w, 1.0, REGION, _sampling(n=2000, quad=16)).constant
    b = wt.estimate_ap_constant(w, 1.0, REGION, _sampling(n=4000, quad=32)).constant
    assert np.isfinite(a) and a >= 1.0
    assert abs(b - a) / a < 0.10


def test_doubling_condition_with_measured_constant(square):
    """omega(2B) <= C_1 * 2^d * omega(B) with C_1 measured over a family
    containing the doubled balls."""
    w = wt.make_distance_weight(square, -0.5)
    s = _sampling(n=150, quad=24, radii=(0.01, 0.1))
    centers, radii = wt.sample_ball_family(REGION, s)
    c1 = 1.0
    for c, r in zip(centers, radii):
        for rr in (r, 2 * r):
            vals = wt.ball_values(w, c, rr, s.quad_n)
            c1 = max(c1, wt.ap_ball_quantity(vals, 1.0))
    for c, r in zip(centers, radii):
        v1 = wt.ball_values(w, c, r, s.quad_n)
        v2 = wt.ball_values(w, c, 2 * r, s.quad_n)
        ratio = (v2.mean() * (2 * r) ** 2) / (v1.mean() * r ** 2)
        assert ratio <= c1 * 4 * 1.05


# -- reverse Hoelder --------------------------------------------------------

def test_rh_constant_weight_passes_everything():
    probe = wt.probe_reverse_holder(wt.constant_weight(2.0), REGION,
                                    _sampling(n=50))
    assert probe.exponent == 0.9
    assert probe.constant == pytest.approx(1.0, abs=1e-12)
    assert all(v == pytest.approx(1.0, abs=1e-12) for v in probe.table.values())


def test_rh_discriminates_singular_strength(square):
    s = wt.BallSampling(n_balls=400, radius_range=(0.02, 0.2), quad_n=64,
                        seed=42)
    p5 = wt.probe_reverse_holder(wt.make_distance_weight(square, -0.5),
                                 REGION, s)
    p9 = wt.probe_reverse_holder(wt.make_distance_weight(square, -0.9),
                                 REGION, s)
    assert p5.exponent >= 0.1
    assert np.isfinite(p5.constant)
    assert p9.exponent < p5.exponent
    # the sampled RH functionals are ordered pointwise as well
    assert all(p9.table[s_] >= p5.table[s_] for s_ in p5.table)
