"""Temporal profile suite.

Oracle values frozen from adaptive quadrature (scipy.integrate.quad
with breakpoints at the window edges and sin zeros):
  normalization scale c           = 1.9268386967709543
  ||G||_1                          = 0.7040065540127199
  int g~ g over [0,1] at (10,2,.09) = 1.0 (quad err 4e-10)
"""

from types import SimpleNamespace

import numpy as np
import pytest
from scipy.integrate import quad

from defectflow import profiles as pr


BUMP = pr.bump_profile()


def params(d=2, kappa=10.0, sigma=2, alpha=0.09):
    return SimpleNamespace(d=d, kappa=kappa, sigma=sigma, alpha=alpha)


def quad_over_bumps(fn, prof, power=1.0):
    pts = []
    for m in range(prof.bump_count()):
        pts += list(prof.bump_interval(m))
    val, err = quad(lambda t: np.abs(fn(t)) ** power, 0, 1, points=pts, limit=400)
    return val, err


class TestBumpProfile:
    def test_square_integrates_to_one(self):
        val, err = quad(
            lambda s: float(BUMP(s)) ** 2, 0, 1,
            points=[*pr.SUPPORT, 0.25, 0.5, 0.75], limit=200,
        )
        assert err < 1e-9
        assert abs(val - 1.0) < 1e-10
        assert abs(BUMP.squared_moment() - 1.0) < 1e-12

    def test_mean_zero(self):
        val, _ = quad(
            lambda s: float(BUMP(s)), 0, 1,
            points=[*pr.SUPPORT, 0.25, 0.5, 0.75], limit=200,
        )
        assert abs(val) < 1e-10
        assert abs(BUMP.moment()) < 1e-10

    def test_sup_in_range(self):
        s = np.linspace(0, 1, 100001)
        dense = np.max(np.abs(BUMP(s)))
        assert abs(dense - BUMP.sup) < 1e-9
        assert 1.0 <= BUMP.sup <= 2.0
        assert abs(BUMP.sup - 1.9268386967709543) < 1e-12

    def test_support_strictly_inside(self):
        s = np.array([0.0, 0.05, 0.125, 0.875, 0.93, 1.0])
        assert np.all(BUMP(s) == 0.0)
        assert float(BUMP(0.3)) != 0.0

    def test_l1_frozen_value(self):
        assert abs(BUMP.lq(1) - 0.7040065540127199) < 1e-10
        assert abs(BUMP.lq(2) - 1.0) < 1e-12

    def test_derivative_matches_fd(self):
        rng = np.random.default_rng(3)
        s = rng.uniform(0.15, 0.85, 100)
        h = 1e-7
        fd = (BUMP(s + h) - BUMP(s - h)) / (2 * h)
        an = BUMP.derivative(s)
        assert np.max(np.abs(an - fd)) / np.max(np.abs(an)) < 1e-4

    def test_antiderivative_saturates_at_one(self):
        H = BUMP.squared_antiderivative()
        assert abs(H(0.0)) < 1e-14
        assert abs(H(1.0) - 1.0) < 1e-13
        assert abs(H(0.9) - 1.0) < 1e-13  # support ends at 7/8


class TestGProfiles:
    def test_defining_scalings(self):
        p = params()
        gt, gs = pr.g_profiles(1, p)
        t = np.linspace(0, 1, 777)
        tau = (p.sigma * t) % 1.0
        expect_t = p.kappa**p.alpha * BUMP(p.kappa * tau)
        assert np.max(np.abs(gt(t) - expect_t)) < 1e-12
        ratio = p.kappa ** (1 - 2 * p.alpha)
        assert np.max(np.abs(gs(t) - ratio * gt(t))) < 1e-10

    def test_pairing_integral_is_one(self):
        gt, gs = pr.g_profiles(1, params())
        val, err = quad_over_bumps(lambda t: gt(t) * gs(t), gt)
        assert err < 1e-8
        assert abs(val - 1.0) < 1e-9

    @pytest.mark.parametrize("q", [1.0, 2.0])
    def test_lq_closed_form_vs_quadrature(self, q):
        gt, _ = pr.g_profiles(1, params())
        val, err = quad_over_bumps(gt, gt, power=q)
        assert abs(val ** (1 / q) - gt.lq(q)) < max(1e-8, 10 * err)

    def test_g_small_l1(self):
        p = params()
        _, gs = pr.g_profiles(1, p)
        expect = p.kappa ** (-p.alpha) * BUMP.lq(1)
        assert abs(gs.lq(1) - expect) < 1e-14
        val, _ = quad_over_bumps(gs, gs)
        assert abs(val - expect) < 1e-8

    def test_disjoint_supports(self):
        p = params(d=3, kappa=12.0, sigma=3)
        t = np.linspace(0, 1, 20011)
        gts = [pr.g_profiles(k, p)[0] for k in (1, 2, 3)]
        vals = [g(t) for g in gts]
        for a in range(3):
            for b in range(a + 1, 3):
                assert np.max(np.abs(vals[a] * vals[b])) == 0.0

    def test_derivative_norm_ratio_profile_constant(self):
        # ||g~'||_q / (kappa sigma ||g~||_q) independent of kappa, sigma
        vals = set()
        for kap, sig in [(10.0, 2), (40.0, 5), (160.0, 3)]:
            gt, _ = pr.g_profiles(1, params(kappa=kap, sigma=sig))
            r = gt.deriv_lq(2) / (kap * sig * gt.lq(2))
            vals.add(round(r, 10))
        assert len(vals) == 1

    def test_derivative_consistency_random_points(self):
        gt, _ = pr.g_profiles(1, params())
        rng = np.random.default_rng(5)
        lo, hi = gt.bump_interval(0)
        t = rng.uniform(lo, hi, 100)
        width = (hi - lo)
        h = 1e-6 * width
        fd = (gt(t + h) - gt(t - h)) / (2 * h)
        an = gt.derivative(t)
        assert np.max(np.abs(an - fd)) / np.max(np.abs(an)) < 1e-4

    def test_kappa_below_d_rejected(self):
        with pytest.raises(ValueError):
            pr.g_profiles(2, params(d=3, kappa=2.0))

    def test_bump_parametrization(self):
        # round-tripping through t costs ~kappa*eps in the bump variable,
        # so the tolerance scales with kappa
        s = np.linspace(0, 1, 101)
        for kap, tol in ((1e3, 1e-10), (1e6, 1e-7)):
            gt, _ = pr.g_profiles(1, params(kappa=kap, sigma=7))
            for m in (0, 3, 6):
                t = gt.bump_time(m, s)
                assert np.max(np.abs(gt(t) - gt.eval_in_bump(s))) < tol * gt.sup


class TestHCorrector:
    def test_zero_at_period_boundaries(self):
        h = pr.h_corrector(1, params())
        assert abs(float(h(0.0))) < 1e-12
        assert abs(float(h(0.5))) < 1e-12  # 1/sigma with sigma = 2
        assert abs(float(h(1.0))) < 1e-12

    def test_defining_ode(self):
        # sigma^-1 h' = g~ g - 1 at 1000 points
        p = params()
        h = pr.h_corrector(1, p)
        gt, gs = pr.g_profiles(1, p)
        t = np.linspace(0, 1, 1000, endpoint=False)
        lhs = h.derivative(t) / p.sigma
        rhs = gt(t) * gs(t) - 1.0
        assert np.max(np.abs(lhs - rhs)) < 1e-8

    def test_integral_form(self):
        # h(t) = sigma * int_0^t (g~ g - 1), checked against quadrature
        p = params()
        h = pr.h_corrector(1, p)
        gt, gs = pr.g_profiles(1, p)
        pts = [x for m in range(2) for x in gt.bump_interval(m)]
        for t_end in (0.2, 0.4, 0.77):
            ref, err = quad(
                lambda t: gt(t) * gs(t) - 1.0, 0, t_end,
                points=[x for x in pts if x < t_end], limit=400,
            )
            assert abs(float(h(t_end)) - p.sigma * ref) < max(1e-8, 10 * err)

    def test_sup_at_most_one(self):
        for kap in (10.0, 1e4):
            for k in (1, 2):
                h = pr.h_corrector(k, params(kappa=kap))
                t = np.linspace(0, 1, 40001)
                assert np.max(np.abs(h(t))) <= 1.0
                assert h.sup <= 1.0

    def test_lq_against_dense_sampling(self):
        p = params()
        h = pr.h_corrector(1, p)
        t = np.linspace(0, 1, 2_000_001)
        for q in (1.0, 2.0):
            ref = (np.mean(np.abs(h(t)) ** q)) ** (1 / q)
            assert abs(h.lq(q) - ref) < 2e-5

    def test_periodicity(self):
        p = params(sigma=3)
        h = pr.h_corrector(1, p)
        t = np.linspace(0, 1 / 3, 500, endpoint=False)
        assert np.max(np.abs(h(t) - h(t + 1 / 3))) < 1e-10


def test_csv_dump(tmp_path):
    gt, _ = pr.g_profiles(1, params())
    ts = np.linspace(0, 1, 11)
    path = tmp_path / "gt.csv"
    pr.dump_csv(gt, ts, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,value,derivative"
    assert len(lines) == 12
    # byte-stable: a second dump is identical
    path2 = tmp_path / "gt2.csv"
    pr.dump_csv(gt, ts, path2)
    assert path.read_bytes() == path2.read_bytes()
