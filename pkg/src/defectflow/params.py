"""Exponent selection and parameter realization.

The three size conditions are power-law comparisons in lambda; they are
checked as exact inequalities between rational exponents (equality is
allowed, and one of them is tight for d=2, p=2, which is exactly why
floating-point comparison is banned here).  lambda enters only at
realization time, and may be given in log form because production runs
push it beyond float64 range.
"""

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

KAPPA_WARN = 1e12


@dataclass(frozen=True)
class Exponents:
    d: int
    p: int
    alpha: Fraction
    gamma: Fraction
    r: Fraction

    def __post_init__(self):
        if self.d < 2 or self.p < 1:
            raise ValueError("need d >= 2 and p >= 1")
        if not 0 < self.gamma < Fraction(1, 4):
            raise ValueError("gamma must lie in (0, 1/4)")
        if self.alpha <= 0 or self.r <= 1:
            raise ValueError("need alpha > 0 and r > 1")


@dataclass(frozen=True)
class ConditionRow:
    id: str
    lhs: Fraction            # lambda-exponent of the left side
    rhs: Fraction            # always -gamma
    passed: bool
    lhs_at_lambda: float = math.nan   # lhs * ln(lambda) when lambda is known

    def describe(self):
        status = "pass" if self.passed else "FAIL"
        return f"{self.id}: exponent {float(self.lhs):+.6g} <= {float(self.rhs):+.6g}  [{status}]"


def condition_exponents(d, p, alpha, gamma, r):
    """lambda-exponents of the three size conditions, as exact rationals."""
    d, p = int(d), int(p)
    alpha, gamma, r = Fraction(alpha), Fraction(gamma), Fraction(r)
    dk = d - 2 * gamma                       # kappa = lambda^{dk/alpha}
    return {
        "exp-density-perturbation": p * (1 + 2 * gamma) + (alpha - Fraction(1, p)) * dk / alpha,
        "exp-velocity-field": -dk + (1 + 2 * gamma) + (d - 1) * (1 - Fraction(1, p)),
        "exp-acceleration": dk - 1 - Fraction(d - 1, 1) / r,
    }


def check_conditions(d, p, alpha, gamma, r, log_lam=None):
    rows = []
    rhs = -Fraction(gamma)
    for cid, lhs in condition_exponents(d, p, alpha, gamma, r).items():
        at_lam = math.nan if log_lam is None else float(lhs) * log_lam
        rows.append(ConditionRow(cid, lhs, rhs, lhs <= rhs, at_lam))
    return rows


def _floor_to(x, denom):
    return Fraction(math.floor(x * denom), denom)


def choose_exponents(d, p):
    """One feasible (alpha, gamma, r) for (d, p), by the sufficient recipe.

    gamma takes its cap min(1/5, (d-1)/(5p)); alpha sits just below
    (d - 1/2)/(2p^2 + 2dp); r sits about halfway to its upper bound
    (d-1)/(d-1-gamma), rounded down to hundredths (finer if that hits 0).
    """
    d, p = int(d), int(p)
    if d < 2 or p < 1:
        raise ValueError("need d >= 2 and p >= 1")
    gamma = min(Fraction(1, 5), Fraction(d - 1, 5 * p))

    alpha_bound = Fraction(2 * d - 1, 2 * (2 * p * p + 2 * d * p))
    alpha = _floor_to(alpha_bound, 100)
    if alpha == alpha_bound:
        alpha -= Fraction(1, 100)
    if alpha <= 0:
        # p large enough to squeeze the hundredths grid to nothing
        denom = 100
        while alpha <= 0 and denom <= 10**6:
            denom *= 10
            alpha = _floor_to(alpha_bound, denom)
            if alpha == alpha_bound:
                alpha -= Fraction(1, denom)
        if alpha <= 0:
            raise ValueError(f"could not place alpha below {alpha_bound}")

    r_bound = Fraction(d - 1, 1) / (d - 1 - gamma)
    half = (r_bound - 1) / 2
    step = _floor_to(half, 100)
    denom = 100
    while step <= 0 and denom <= 10**6:
        denom *= 10
        step = _floor_to(half, denom)
    if step <= 0:
        raise ValueError("could not place r above 1")
    r = 1 + min(Fraction(1, 5), step)

    exps = Exponents(d, p, alpha, gamma, r)
    bad = [row for row in check_conditions(d, p, alpha, gamma, r) if not row.passed]
    assert not bad, f"recipe produced infeasible exponents: {bad}"
    return exps


@dataclass(frozen=True)
class ParameterSet:
    """Realized parameters at a specific lambda.

    log_lambda is the primary field: production lambdas overflow float64
    (kappa does so even for lambda = 4 at some exponents), so everything
    scaling-mode consumes is exposed in log form alongside the plain
    values, which may read as inf.
    """

    exponents: Exponents
    log_lambda: float
    sigma: int
    mode: str = "scaling"
    kappa_override: float = None

    @property
    def d(self):
        return self.exponents.d

    @property
    def p(self):
        return self.exponents.p

    @property
    def alpha(self):
        return float(self.exponents.alpha)

    @property
    def gamma(self):
        return float(self.exponents.gamma)

    @property
    def r(self):
        return float(self.exponents.r)

    @property
    def lam(self):
        try:
            return math.exp(self.log_lambda)
        except OverflowError:
            return math.inf

    @property
    def mu(self):
        return self.lam

    @property
    def log_mu(self):
        return self.log_lambda

    @property
    def log_kappa(self):
        if self.kappa_override is not None:
            return math.log(self.kappa_override)
        e = self.exponents
        return float((e.d - 2 * e.gamma) / e.alpha) * self.log_lambda

    @property
    def kappa(self):
        if self.kappa_override is not None:
            return float(self.kappa_override)
        try:
            return math.exp(self.log_kappa)
        except OverflowError:
            return math.inf

    def conditions(self):
        e = self.exponents
        return check_conditions(e.d, e.p, e.alpha, e.gamma, e.r, log_lam=self.log_lambda)


def override(exps, sigma, mu, kappa):
    """Identity-check ParameterSet with sigma, mu, kappa pinned directly.

    mu doubles as lambda here; the result is only meaningful for
    full-field identity verification, never for scaling studies.
    """
    if int(sigma) != sigma or sigma < 1:
        raise ValueError("sigma must be a positive integer")
    if mu < 1:
        raise ValueError("mu must be at least 1")
    if kappa < exps.d:
        raise ValueError(f"kappa = {kappa} < d = {exps.d}: temporal bumps would overlap")
    return ParameterSet(
        exponents=exps,
        log_lambda=math.log(float(mu)),
        sigma=int(sigma),
        mode="identity-check",
        kappa_override=float(kappa),
    )


def realize(exps, lam=None, log_lam=None, exact_sigma=False, kappa_override=None):
    """ParameterSet at lambda: sigma = ceil(lambda^{2 gamma}), mu = lambda,
    kappa = lambda^{(d-2 gamma)/alpha} unless overridden (identity-check mode).

    exact_sigma nudges lambda to the nearest value with lambda^{2 gamma}
    a whole number, so the temporal period count is exact.
    """
    if (lam is None) == (log_lam is None):
        raise ValueError("pass exactly one of lam, log_lam")
    if log_lam is None:
        if lam <= 1:
            raise ValueError("lambda must exceed 1")
        log_lam = math.log(lam)
    if log_lam <= 0:
        raise ValueError("lambda must exceed 1")

    two_gamma = float(2 * exps.gamma)
    if exact_sigma:
        sigma = max(1, round(math.exp(two_gamma * log_lam)))
        log_lam = math.log(sigma) / two_gamma
    sigma = math.ceil(math.exp(two_gamma * log_lam) - 1e-12)

    ps = ParameterSet(
        exponents=exps,
        log_lambda=log_lam,
        sigma=int(sigma),
        mode="identity-check" if kappa_override is not None else "scaling",
        kappa_override=kappa_override,
    )
    if kappa_override is not None:
        if kappa_override < exps.d:
            raise ValueError(
                f"kappa override {kappa_override} < d = {exps.d}: temporal bumps would overlap"
            )
        return ps
    if ps.log_kappa < math.log(exps.d):
        raise ValueError(
            f"kappa = {ps.kappa:.4g} < d = {exps.d} violates temporal disjointness; raise lambda"
        )
    if ps.log_kappa > math.log(KAPPA_WARN):
        warnings.warn(
            f"kappa exceeds {KAPPA_WARN:g}: full-field sampling is meaningless at this "
            "concentration; use scaling-mode norm formulas",
            RuntimeWarning,
            stacklevel=2,
        )
    return ps
