"""Spatial block suite.

Frozen oracle constants (adaptive quadrature over the unit cell, d=2):
  normalization scale c = 0.01166928868342121
  sup phi             = 3.6466527135691282
  ||phi||_1           = 0.5004747197909694
"""

import numpy as np
import pytest
from scipy.integrate import quad

from defectflow import fields as fl
from defectflow import mikado as mk


P2 = mk.SpatialProfile(2)
P3 = mk.SpatialProfile(3)


def phi_zero_points():
    r = 1.0 / (np.sqrt(2.0) * mk.GAUSS_WIDTH)
    return [0.5 - r, 0.5 + r]


class TestSpatialProfile:
    def test_scale_frozen(self):
        assert abs(P2.scale - 0.01166928868342121) < 1e-15

    def test_phi_sq_integrates_to_one(self):
        val, err = quad(lambda y: float(P2.phi(y)) ** 2, 0, 1, points=phi_zero_points(), limit=200)
        assert err < 1e-11
        assert abs(val - 1.0) < 1e-10

    def test_phi_sq_d3(self):
        v1, _ = quad(lambda y: (P3.scale * mk.gauss_derivative(y, 2)) ** 2, 0, 1, limit=200)
        v2, _ = quad(lambda y: mk.gauss_derivative(y, 0) ** 2, 0, 1, limit=200)
        assert abs(v1 * v2 - 1.0) < 1e-10

    def test_phi_mean_zero(self):
        val, _ = quad(lambda y: float(P2.phi(y)), 0, 1, points=phi_zero_points(), limit=200)
        assert abs(val) < 1e-10

    def test_omega_mean_zero(self):
        val, _ = quad(lambda y: float(P2.omega(y)[0]), 0, 1, limit=200)
        assert abs(val) < 1e-10

    def test_div_omega_is_phi_d2(self):
        # independent oracle: fourth-order FD of Omega
        rng = np.random.default_rng(42)
        y = rng.uniform(0.02, 0.98, 1000)
        h = 1e-4
        om = lambda y: P2.omega(y)[0]
        fd = (-om(y + 2 * h) + 8 * om(y + h) - 8 * om(y - h) + om(y - 2 * h)) / (12 * h)
        assert np.max(np.abs(fd - P2.phi(y))) < 1e-9

    def test_div_omega_is_phi_d3(self):
        rng = np.random.default_rng(43)
        y1 = rng.uniform(0.02, 0.98, 1000)
        y2 = rng.uniform(0.02, 0.98, 1000)
        h = 1e-4
        om = lambda a: P3.omega(a, y2)[0]
        fd = (-om(y1 + 2 * h) + 8 * om(y1 + h) - 8 * om(y1 - h) + om(y1 - 2 * h)) / (12 * h)
        assert np.max(np.abs(fd - P3.phi(y1, y2))) < 1e-9
        # second component is identically zero, so it adds nothing to the divergence
        assert np.max(np.abs(P3.omega(y1, y2)[1])) == 0.0

    def test_omega_support_inside_unit_cell(self):
        y = np.array([-0.5, 0.0, 1.0, 1.5])
        assert np.all(P2.omega(y)[0] == 0.0)
        assert np.all(P2.phi(y) == 0.0)

    def test_sup_and_l1_frozen(self):
        assert abs(P2.phi_deriv_sup((0,)) - 3.6466527135691282) < 1e-9
        assert abs(P2.phi_lq(1) - 0.5004747197909694) < 1e-9
        assert abs(P2.phi_lq(2) - 1.0) < 1e-12

    def test_phi_deriv_evaluator_matches_fd(self):
        rng = np.random.default_rng(44)
        y = rng.uniform(0.1, 0.9, 200)
        h = 1e-4
        d1 = P2.phi_deriv((1,))
        fd = (-P2.phi(y + 2 * h) + 8 * P2.phi(y + h) - 8 * P2.phi(y - h) + P2.phi(y - 2 * h)) / (12 * h)
        assert np.max(np.abs(d1(y) - fd)) / np.max(np.abs(d1(y))) < 1e-8

    def test_antiderivative_of_phi_sq(self):
        H = P2.phi_sq_antiderivative()
        assert abs(H(0.0)) < 1e-14
        assert abs(H(1.0) - 1.0) < 1e-10
        ref, _ = quad(lambda y: float(P2.phi(y)) ** 2, 0, 0.4, points=[p for p in phi_zero_points() if p < 0.4], limit=200)
        assert abs(H(0.4) - ref) < 1e-10

    def test_rejects_bad_dimension(self):
        with pytest.raises(ValueError):
            mk.SpatialProfile(4)


def build(sigma, mu, d=2, mult=64):
    n = int(mult * sigma * mu)
    g = fl.grid(d, n)
    profile = P2 if d == 2 else P3
    return mk.MikadoSet(profile, sigma, mu, g)


class TestMikadoSet:
    @pytest.mark.parametrize("sigma,mu", [(2, 8), (4, 16)])
    def test_identities_d2(self, sigma, mu):
        ms = build(sigma, mu)
        for k in (1, 2):
            phi = ms.Phi[k]
            assert abs(phi.mean()) < 1e-10
            for c in ms.W[k].components + ms.Omega[k].components:
                assert abs(c.mean()) < 1e-10
            scale_w = fl.sup(ms.W[k].components[k - 1])
            assert fl.lp(fl.divergence(ms.W[k]), 2) < 1e-8 * max(scale_w, 1)
            pw = fl.VectorField([phi * c for c in ms.W[k].components])
            assert fl.lp(fl.divergence(pw), 2) < 1e-8 * fl.sup(phi) * scale_w
            resid = fl.divergence(ms.Omega[k]) - sigma * phi
            assert fl.lp(resid, 2) < 1e-8 * sigma * fl.lp(phi, 2)
            flux = ms.flux(k)
            ek = np.eye(2)[k - 1]
            assert np.max(np.abs(flux - ek)) < 1e-8

    def test_identities_d3(self):
        n = 192
        ms = mk.MikadoSet(P3, 1, 4.0, fl.grid(3, n))
        for k in (1, 2, 3):
            phi = ms.Phi[k]
            assert abs(phi.mean()) < 1e-10
            assert fl.lp(fl.divergence(ms.W[k]), 2) < 1e-8 * fl.sup(ms.W[k].components[k - 1])
            resid = fl.divergence(ms.Omega[k]) - 1 * phi
            assert fl.lp(resid, 2) < 1e-8 * fl.lp(phi, 2)
            flux = ms.flux(k)
            assert np.max(np.abs(flux - np.eye(3)[k - 1])) < 1e-8

    def test_l2_closed_form_frozen(self):
        ms = build(2, 8.0)
        assert abs(ms.phi_lp(2) - 8.0**-0.5) < 1e-12
        assert abs(fl.lp(ms.Phi[1], 2) - 8.0**-0.5) < 1e-6

    @pytest.mark.parametrize("p", [2.0, 4.0])
    def test_grid_lp_matches_closed_even(self, p):
        ms = build(2, 8.0)
        for k in (1, 2):
            grid_n = fl.lp(ms.Phi[k], p)
            assert abs(grid_n - ms.phi_lp(p)) / ms.phi_lp(p) < 1e-6
            grid_w = fl.lp(ms.W[k].components[k - 1], p)
            assert abs(grid_w - ms.w_lp(p)) / ms.w_lp(p) < 1e-6

    @pytest.mark.parametrize("p", [1.0, 3.0])
    def test_quadrature_lp_matches_closed_odd(self, p):
        # grid quadrature is kink-limited for odd p; the oracle is 1D adaptive
        # quadrature of the periodized profile
        sigma, mu = 2, 8.0
        ms = build(sigma, mu)
        pts = sorted(
            (m + z / mu) / sigma for m in range(sigma) for z in [0.0, *phi_zero_points(), 1.0]
        )
        val, err = quad(
            lambda v: np.abs(float(P2.phi(mu * ((sigma * v) % 1.0)))) ** p,
            0, 1, points=pts, limit=400,
        )
        assert abs(val ** (1 / p) - ms.phi_lp(p)) / ms.phi_lp(p) < 1e-8

    def test_omega_lp_closed_form(self):
        sigma, mu = 2, 8.0
        ms = build(sigma, mu)
        val, _ = quad(
            lambda v: (float(P2.omega(mu * ((sigma * v) % 1.0))[0]) / mu) ** 2,
            0, 1, limit=400,
        )
        assert abs(np.sqrt(val) - ms.omega_lp(2)) / ms.omega_lp(2) < 1e-8
        grid_n = np.sqrt(sum(fl.lp(c, 2) ** 2 for c in ms.Omega[1].components))
        assert abs(grid_n - ms.omega_lp(2)) / ms.omega_lp(2) < 1e-6

    def test_sobolev_scaling_matches_grid(self):
        # derivative norms engage the resolution guard: band ~22 sigma mu
        # must stay under n/4, hence the 128x grid
        sigma, mu = 2, 8.0
        ms = build(sigma, mu, mult=128)
        closed = ms.phi_sobolev(1, 2)
        grid_n = fl.norm(ms.Phi[1], fl.NormSpec("Wsp", p=2, order=1))
        assert abs(grid_n - closed) / closed < 1e-6

    def test_ck_scaling_matches_grid(self):
        sigma, mu = 2, 8.0
        ms = build(sigma, mu, mult=128)
        closed = ms.phi_ck(1)
        grid_n = fl.norm(ms.Phi[1], fl.NormSpec("Ck", order=1))
        # grid max is a lower bound of the sup; the worst-case gap when the
        # argmax falls mid-cell is curvature/(2 sup) * (spacing/2)^2 ~ 5e-3 here
        assert grid_n <= closed * (1 + 1e-9)
        assert grid_n >= closed * (1 - 1e-2)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            mk.MikadoSet(P2, 2, 0.5, fl.grid(2, 64))
        with pytest.raises(ValueError):
            mk.MikadoSet(P2, 2, 8.0, fl.grid(2, 64))  # 64 < 8*2*8
        with pytest.raises(ValueError):
            mk.MikadoSet(P3, 2, 8.0, fl.grid(2, 256))  # d mismatch
