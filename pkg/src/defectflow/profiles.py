"""Intermittent temporal profiles.

The master bump G is a windowed oscillation, normalized so its square
integrates to one over the unit period.  The per-direction profiles
g_tilde and g_small are rescaled copies concentrated on width-1/kappa
bumps, offset so distinct directions never overlap in time; h is the
sawtooth corrector integrating g_tilde*g_small - 1.

All L^q norms of the rescaled profiles come from change-of-variables
formulas, never from uniform sampling: kappa is astronomically large in
production parameter regimes.
"""

import numpy as np
from scipy.special import erf

from . import chebfit

ZETA = 6.25
SUPPORT = (0.125, 0.875)
_SIN_ZEROS = (0.25, 0.5, 0.75)


def smooth_step(u):
    """0 below 0 and 1 above 1 to float64 round-off, monotone smooth between."""
    u = np.asarray(u, dtype=float)
    return 0.5 * (1.0 + erf(ZETA * (2.0 * u - 1.0)))


def smooth_step_deriv(u):
    u = np.asarray(u, dtype=float)
    z = ZETA * (2.0 * u - 1.0)
    return (2.0 * ZETA / np.sqrt(np.pi)) * np.exp(-z * z)


class BumpProfile:
    """Unit-period master bump: window(s) * sin(4 pi s), normalized in L^2."""

    def __init__(self):
        lo, hi = SUPPORT
        raw_sq = chebfit.fit_resolving(
            lambda s: self._raw(s) ** 2, 0.0, 1.0, must_resolve=[lo, hi], tol=1e-13
        )
        self.scale = 1.0 / np.sqrt(raw_sq.integral())
        # antiderivative of G^2; saturates at exactly 1 by the choice of scale
        self._sq_anti = raw_sq.antiderivative().scaled(self.scale**2)
        self._fit = chebfit.fit_resolving(
            self.__call__, 0.0, 1.0, must_resolve=[lo, *_SIN_ZEROS, hi], tol=1e-13
        )
        self._lq_cache = {}

    @staticmethod
    def _window(s):
        lo, hi = SUPPORT
        return smooth_step(8.0 * (s - lo)) * smooth_step(8.0 * (hi - s))

    def _raw(self, s):
        s = np.asarray(s, dtype=float)
        return self._window(s) * np.sin(4.0 * np.pi * s)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = SUPPORT
        se = np.clip(s, lo - 1.0, hi + 1.0)
        out = self.scale * self._raw(se)
        return np.where((s > lo) & (s < hi), out, 0.0)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = SUPPORT
        se = np.clip(s, lo - 1.0, hi + 1.0)
        w = self._window(se)
        dw = 8.0 * smooth_step_deriv(8.0 * (se - lo)) * smooth_step(8.0 * (hi - se)) \
            - 8.0 * smooth_step(8.0 * (se - lo)) * smooth_step_deriv(8.0 * (hi - se))
        out = self.scale * (
            dw * np.sin(4.0 * np.pi * se) + w * 4.0 * np.pi * np.cos(4.0 * np.pi * se)
        )
        return np.where((s > lo) & (s < hi), out, 0.0)

    @property
    def sup(self):
        # window and |sin| both reach exactly 1 at s = 3/8
        return self.scale

    def derivative2(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = SUPPORT
        out = self._fit.derivative(2)(np.clip(s, lo, hi))
        return np.where((s > lo) & (s < hi), out, 0.0)

    def squared_antiderivative(self):
        return self._sq_anti

    def moment(self):
        return self._fit.integral()

    def squared_moment(self):
        return self._sq_anti(1.0)

    def lq(self, q):
        q = float(q)
        if q not in self._lq_cache:
            if q == np.inf:
                self._lq_cache[q] = self.sup
            else:
                self._lq_cache[q] = self._fit.lp(q)
        return self._lq_cache[q]

    def deriv_lq(self, q, order=1):
        key = ("d", float(q), order)
        if key not in self._lq_cache:
            df = self._fit.derivative(order)
            self._lq_cache[key] = df.sup() if q == np.inf else df.lp(float(q))
        return self._lq_cache[key]

    def sq_deriv_lq(self, q):
        """L^q of (G^2)' = 2 G G' over one period."""
        key = ("sqd", float(q))
        if key not in self._lq_cache:
            fit = chebfit.fit_resolving(
                lambda s: 2.0 * self(s) * self.derivative(s),
                0.0,
                1.0,
                must_resolve=[SUPPORT[0], *_SIN_ZEROS, SUPPORT[1]],
                tol=1e-12,
            )
            self._lq_cache[key] = fit.sup() if q == np.inf else fit.lp(float(q))
        return self._lq_cache[key]


_BUMP = None


def bump_profile():
    global _BUMP
    if _BUMP is None:
        _BUMP = BumpProfile()
    return _BUMP


class TemporalProfile:
    """One of g_tilde_k, g_small_k, h_k on [0, 1].

    All three are 1/sigma-periodic; the g's are supported on sigma
    disjoint bumps of width ~1/(kappa sigma), h is a unit-amplitude
    sawtooth synchronized with the bumps.
    """

    KINDS = ("g_tilde", "g_small", "g_pair", "h_corrector")

    def __init__(self, kind, k, d, kappa, sigma, alpha, bump=None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown profile kind {kind!r}")
        if not 1 <= k <= d:
            raise ValueError("direction index out of range")
        if kappa < d:
            raise ValueError(
                f"kappa = {kappa} < d = {d}: temporal bumps would overlap; raise lambda"
            )
        self.kind = kind
        self.k = int(k)
        self.d = int(d)
        self.kappa = float(kappa)
        self.sigma = int(sigma)
        self.alpha = float(alpha)
        self.t_k = (k - 1) / d
        self.bump = bump if bump is not None else bump_profile()
        if kind == "g_tilde":
            self.amplitude = self.kappa**self.alpha
        elif kind == "g_small":
            self.amplitude = self.kappa ** (1.0 - self.alpha)
        elif kind == "g_pair":
            # the product g_tilde_k g_k; the alphas cancel
            self.amplitude = self.kappa
        else:
            self.amplitude = 1.0

    def _s(self, t):
        tau = np.mod(self.sigma * np.asarray(t, dtype=float), 1.0)
        return self.kappa * (tau - self.t_k), tau

    def __call__(self, t):
        s, tau = self._s(t)
        if self.kind == "h_corrector":
            H = self.bump.squared_antiderivative()
            return H(np.clip(s, 0.0, 1.0)) - tau
        if self.kind == "g_pair":
            return self.amplitude * self.bump(s) ** 2
        return self.amplitude * self.bump(s)

    def derivative(self, t):
        s, _ = self._s(t)
        if self.kind == "h_corrector":
            # sigma * (g_tilde g_small - 1), from the defining integral
            G = self.bump(s)
            return self.sigma * (self.kappa * G * G - 1.0)
        if self.kind == "g_pair":
            G = self.bump(s)
            return self.amplitude * self.kappa * self.sigma * 2.0 * G * self.bump.derivative(s)
        return self.amplitude * self.kappa * self.sigma * self.bump.derivative(s)

    def derivative2(self, t):
        s, _ = self._s(t)
        fast = self.kappa * self.sigma
        if self.kind == "h_corrector":
            return self.sigma * self.kappa * fast * 2.0 * self.bump(s) * self.bump.derivative(s)
        if self.kind == "g_pair":
            dG = self.bump.derivative(s)
            return self.amplitude * fast**2 * 2.0 * (dG * dG + self.bump(s) * self.bump.derivative2(s))
        return self.amplitude * fast**2 * self.bump.derivative2(s)

    # -- exact norm calculus ------------------------------------------------

    def lq(self, q):
        q = float(q)
        if self.kind == "g_tilde":
            expo = self.alpha - (0.0 if q == np.inf else 1.0 / q)
            return self.kappa**expo * self.bump.lq(q)
        if self.kind == "g_small":
            expo = (1.0 - self.alpha) - (0.0 if q == np.inf else 1.0 / q)
            return self.kappa**expo * self.bump.lq(q)
        if self.kind == "g_pair":
            if q == np.inf:
                return self.kappa * self.bump.sup**2
            return self.kappa ** (1.0 - 1.0 / q) * self.bump.lq(2.0 * q) ** 2
        return self._h_lq(q)

    def deriv_lq(self, q):
        q = float(q)
        if self.kind == "g_pair":
            expo = 1.0 - (0.0 if q == np.inf else 1.0 / q)
            return self.kappa * self.sigma * self.kappa**expo * self.bump.sq_deriv_lq(q)
        if self.kind == "h_corrector":
            # h' = sigma (kappa G^2 - 1); the G^2 spike dominates
            if q == np.inf:
                return self.sigma * max(self.kappa * self.bump.sup**2 - 1.0, 1.0)
            spike = self.kappa ** (1.0 - 1.0 / q) * self.bump.lq(2 * q) ** 2
            base = self._offbump_measure() ** (1.0 / q)
            return self.sigma * (spike**q + base**q) ** (1.0 / q)
        scale = self.kappa * self.sigma
        expo = self.alpha if self.kind == "g_tilde" else 1.0 - self.alpha
        expo -= 0.0 if q == np.inf else 1.0 / q
        return scale * self.kappa**expo * self.bump.deriv_lq(q)

    def _offbump_measure(self):
        return 1.0 - 1.0 / self.kappa

    def _h_lq(self, q):
        """L^q[0,1] of the sawtooth, by exact piecewise integration in tau."""
        tk, kap = self.t_k, self.kappa
        if q == np.inf:
            return max(tk, 1.0 - tk - 1.0 / kap)
        H = self.bump.squared_antiderivative()
        # |h| = tau on [0, t_k], = 1 - tau past the bump, Gauss across the bump
        left = tk ** (q + 1.0) / (q + 1.0)
        right = (1.0 - tk - 1.0 / kap) ** (q + 1.0) / (q + 1.0)
        xg, wg = np.polynomial.legendre.leggauss(64)
        sg = 0.5 * (xg + 1.0)
        vals = np.abs(H(sg) - (tk + sg / kap)) ** q
        mid = float(np.sum(wg * vals)) * 0.5 / kap
        return (left + mid + right) ** (1.0 / q)

    @property
    def sup(self):
        if self.kind == "h_corrector":
            return self._h_lq(np.inf)
        if self.kind == "g_pair":
            return self.amplitude * self.bump.sup**2
        return self.amplitude * self.bump.sup

    # -- bump geometry (used by scaling-mode quadrature) ---------------------

    def bump_count(self):
        return self.sigma

    def bump_interval(self, m):
        """Support of bump m in t, as (lo, hi)."""
        lo, hi = SUPPORT
        base = (m + self.t_k) / self.sigma
        w = 1.0 / (self.kappa * self.sigma)
        return base + lo * w, base + hi * w

    def bump_time(self, m, s):
        """Map rescaled bump variable s in [0,1] to t inside bump m."""
        return (m + self.t_k + np.asarray(s, dtype=float) / self.kappa) / self.sigma

    def eval_in_bump(self, s):
        """Profile value at bump_time(m, s), independent of m."""
        s = np.asarray(s, dtype=float)
        if self.kind == "h_corrector":
            # tau = t_k + s/kappa inside the bump
            H = self.bump.squared_antiderivative()
            return H(np.clip(s, 0.0, 1.0)) - (self.t_k + s / self.kappa)
        if self.kind == "g_pair":
            return self.amplitude * self.bump(s) ** 2
        return self.amplitude * self.bump(s)


def g_profiles(k, params):
    """(g_tilde_k, g_small_k) for a parameter set carrying d, kappa, sigma, alpha."""
    common = (k, params.d, params.kappa, params.sigma, params.alpha)
    return (
        TemporalProfile("g_tilde", *common),
        TemporalProfile("g_small", *common),
    )


def h_corrector(k, params):
    return TemporalProfile("h_corrector", k, params.d, params.kappa, params.sigma, params.alpha)


def pair_profile(k, params):
    """g_tilde_k * g_small_k as a single profile (amplitude kappa)."""
    return TemporalProfile("g_pair", k, params.d, params.kappa, params.sigma, params.alpha)


class ProfileDerivative:
    """A profile's derivative, usable wherever a profile is expected."""

    def __init__(self, base):
        self.base = base

    def __call__(self, t):
        return self.base.derivative(t)

    def derivative(self, t):
        return self.base.derivative2(t)

    @property
    def sup(self):
        return self.base.deriv_lq(np.inf)

    def lq(self, q):
        return self.base.deriv_lq(q)


def dump_csv(profile, ts, path):
    """(t, value, derivative) rows; stable text format."""
    ts = np.asarray(ts, dtype=float)
    vals = profile(ts)
    ders = profile.derivative(ts)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("t,value,derivative\n")
        for t, v, dv in zip(ts, vals, ders):
            fh.write(f"{t:.17g},{v:.17g},{dv:.17g}\n")
