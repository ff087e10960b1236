"""Exponent arithmetic suite.

The chooser table below was worked out by hand with exact fractions;
every entry passes all three conditions with equality allowed.
"""

import math
import warnings
from fractions import Fraction

import pytest

from defectflow import params as pm


CHOOSER_TABLE = {
    # (d, p): (alpha, gamma, r)
    (2, 1): (Fraction(24, 100), Fraction(1, 5), Fraction(112, 100)),
    (2, 2): (Fraction(9, 100), Fraction(1, 10), Fraction(105, 100)),
    (2, 4): (Fraction(3, 100), Fraction(1, 20), Fraction(102, 100)),
    (3, 1): (Fraction(31, 100), Fraction(1, 5), Fraction(105, 100)),
    (3, 2): (Fraction(12, 100), Fraction(1, 5), Fraction(105, 100)),
    (3, 4): (Fraction(4, 100), Fraction(1, 10), Fraction(102, 100)),
}


class TestChooseExponents:
    @pytest.mark.parametrize("dp", sorted(CHOOSER_TABLE))
    def test_table(self, dp):
        exps = pm.choose_exponents(*dp)
        alpha, gamma, r = CHOOSER_TABLE[dp]
        assert exps.alpha == alpha
        assert exps.gamma == gamma
        assert exps.r == r

    @pytest.mark.parametrize("d", [2, 3])
    @pytest.mark.parametrize("p", [1, 2, 4, 8])
    def test_output_always_feasible(self, d, p):
        exps = pm.choose_exponents(d, p)
        rows = pm.check_conditions(d, p, exps.alpha, exps.gamma, exps.r)
        assert all(row.passed for row in rows)
        assert 0 < exps.gamma < Fraction(1, 4)
        assert exps.alpha < Fraction(2 * d - 1, 2 * (2 * p * p + 2 * d * p))
        assert 1 < exps.r < Fraction(d - 1, 1) / (d - 1 - exps.gamma)

    def test_gamma_cap_reads_as_paperbound(self):
        # (d-1)/p >= 5 gamma is an equality at (2, 2)
        exps = pm.choose_exponents(2, 2)
        assert Fraction(2 - 1, 2) == 5 * exps.gamma

    def test_alpha_bound_shrinks_with_p(self):
        bounds = [
            Fraction(2 * 2 - 1, 2 * (2 * p * p + 2 * 2 * p)) for p in (1, 2, 4, 8)
        ]
        assert all(a > b for a, b in zip(bounds, bounds[1:]))
        alphas = [pm.choose_exponents(2, p).alpha for p in (1, 2, 4, 8)]
        assert all(a > b for a, b in zip(alphas, alphas[1:]))

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            pm.choose_exponents(1, 2)
        with pytest.raises(ValueError):
            pm.choose_exponents(2, 0)


class TestCheckConditions:
    def test_worked_example_2_2(self):
        rows = {r.id: r for r in pm.check_conditions(
            2, 2, Fraction(9, 100), Fraction(1, 10), Fraction(105, 100)
        )}
        assert rows["exp-density-perturbation"].lhs == Fraction(24, 10) - Fraction(82, 10)
        assert rows["exp-density-perturbation"].lhs == Fraction(-58, 10)
        # the velocity condition is exactly tight here: -1/10 <= -1/10
        assert rows["exp-velocity-field"].lhs == Fraction(-1, 10)
        assert rows["exp-velocity-field"].rhs == Fraction(-1, 10)
        assert rows["exp-velocity-field"].passed
        assert all(r.passed for r in rows.values())

    def test_acceleration_at_r_one_limit(self):
        # as r -> 1 the exponent tends to -2 gamma <= -gamma
        lhs = pm.condition_exponents(2, 2, Fraction(9, 100), Fraction(1, 10), Fraction(1, 1))
        assert lhs["exp-acceleration"] == -2 * Fraction(1, 10)

    def test_infeasible_r_two_fails(self):
        rows = {r.id: r for r in pm.check_conditions(
            2, 2, Fraction(9, 100), Fraction(1, 10), Fraction(2)
        )}
        row = rows["exp-acceleration"]
        assert row.lhs == Fraction(3, 10)
        assert not row.passed

    def test_lambda_independence(self):
        for lam in (2.0, 10.0, 100.0):
            rows = pm.check_conditions(
                2, 2, Fraction(9, 100), Fraction(1, 10), Fraction(105, 100),
                log_lam=math.log(lam),
            )
            assert [r.passed for r in rows] == [True, True, True]

    def test_describe_lines(self):
        rows = pm.check_conditions(2, 2, Fraction(9, 100), Fraction(1, 10), Fraction(2))
        text = [r.describe() for r in rows]
        assert any("FAIL" in line for line in text)
        assert any("pass" in line for line in text)


class TestRealize:
    def test_sigma_example(self):
        exps = pm.choose_exponents(2, 2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ps = pm.realize(exps, lam=1024.0)
        assert ps.sigma == 4
        assert ps.mu == 1024.0

    def test_kappa_warning_at_lambda_4(self):
        exps = pm.choose_exponents(2, 2)
        with pytest.warns(RuntimeWarning, match="kappa"):
            ps = pm.realize(exps, lam=4.0)
        # kappa = 4^20 ~ 1.1e12
        assert abs(ps.kappa - 4.0**20) / 4.0**20 < 1e-12

    def test_kappa_below_d_rejected(self):
        exps = pm.choose_exponents(2, 2)
        with pytest.raises(ValueError, match="raise lambda"):
            pm.realize(exps, lam=1.02)

    def test_override_gives_identity_mode(self):
        exps = pm.choose_exponents(2, 2)
        ps = pm.realize(exps, lam=16.0, kappa_override=8.0)
        assert ps.mode == "identity-check"
        assert ps.kappa == 8.0
        with pytest.raises(ValueError):
            pm.realize(exps, lam=16.0, kappa_override=1.5)

    def test_exact_sigma_mode(self):
        exps = pm.choose_exponents(2, 2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ps = pm.realize(exps, lam=1000.0, exact_sigma=True)
        # nearest lambda with lambda^(1/5) whole: sigma = 4, lambda = 1024
        assert ps.sigma == 4
        assert abs(ps.lam - 1024.0) < 1e-6

    def test_log_lambda_entry_for_huge_lambda(self):
        exps = pm.choose_exponents(2, 2)
        with pytest.warns(RuntimeWarning, match="kappa"):
            ps = pm.realize(exps, log_lam=771.0)   # lambda ~ 1e335, beyond float64
        assert ps.lam == math.inf
        assert ps.kappa == math.inf
        assert math.isfinite(ps.log_kappa)
        assert ps.sigma == math.ceil(math.exp(0.2 * 771.0) - 1e-12)

    def test_conditions_attached(self):
        exps = pm.choose_exponents(2, 2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ps = pm.realize(exps, lam=1024.0)
        rows = ps.conditions()
        assert all(r.passed for r in rows)
        assert all(math.isfinite(r.lhs_at_lambda) for r in rows)

    def test_input_validation(self):
        exps = pm.choose_exponents(2, 2)
        with pytest.raises(ValueError):
            pm.realize(exps)
        with pytest.raises(ValueError):
            pm.realize(exps, lam=16.0, log_lam=2.0)
        with pytest.raises(ValueError):
            pm.realize(exps, lam=0.5)
