"""Mikado building blocks: pipe-concentrated densities, potentials, flows.

The one-dimensional mother shape is a Gaussian bump; the profile pair
is (phi, Omega) = (c g'', c g') for d = 2, so div Omega = phi holds by
construction and compact support of Omega forces the vanishing moments.
For d = 3 the shapes are separable products with a plain Gaussian in
the second transverse variable.

Periodization: Phi_k(x) = phi(mu frac(sigma x_k')) where x_k' are the
coordinates other than k.  Everything a block needs at astronomical
(sigma, mu) is available in closed form; grids only enter in
identity-check mode.
"""

from functools import reduce

import numpy as np
from numpy.polynomial.hermite import Hermite

from . import chebfit
from .fields import PeriodicField, VectorField

GAUSS_WIDTH = 12.5


def gauss_derivative(y, m, width=GAUSS_WIDTH):
    """m-th derivative of exp(-(width(y-1/2))^2), cut off outside (0,1).

    Hermite recurrence: d^m/dy^m e^{-z^2} = width^m (-1)^m H_m(z) e^{-z^2}
    with z = width(y - 1/2).  The cutoff discards only O(1e-17) tails.
    """
    y = np.asarray(y, dtype=float)
    z = width * (y - 0.5)
    h_prev = np.ones_like(z)
    if m == 0:
        h = h_prev
    else:
        h = 2.0 * z
        for j in range(1, m):
            h, h_prev = 2.0 * z * h - 2.0 * j * h_prev, h
    out = (width**m) * ((-1.0) ** m) * h * np.exp(-z * z)
    return np.where((y > 0.0) & (y < 1.0), out, 0.0)


def _hermite_zeros(m, width=GAUSS_WIDTH):
    if m == 0:
        return []
    roots = Hermite.basis(m).roots()
    ys = 0.5 + np.real(roots) / width
    return [float(y) for y in ys if 0.0 < y < 1.0]


class SpatialProfile:
    """Profile pair (phi, Omega) with div Omega = phi and int phi^2 = 1."""

    def __init__(self, d):
        if d not in (2, 3):
            raise ValueError("spatial profiles cover d in {2, 3}")
        self.d = d
        self._fits = {}
        self._sups = {}
        self._lqs = {}
        if d == 2:
            self.scale = 1.0 / self._raw_lq(2, 2.0)
        else:
            self.scale = 1.0 / (self._raw_lq(2, 2.0) * self._raw_lq(0, 2.0))

    # -- 1D factor calculus ---------------------------------------------

    def _fit(self, m):
        if m not in self._fits:
            dense = np.max(np.abs(gauss_derivative(np.linspace(0, 1, 4001), m)))
            self._fits[m] = chebfit.fit_resolving(
                lambda y: gauss_derivative(y, m),
                0.0, 1.0,
                must_resolve=_hermite_zeros(m),
                tol=1e-13 * dense,
            )
        return self._fits[m]

    def _raw_sup(self, m):
        if m not in self._sups:
            self._sups[m] = self._fit(m).sup(1025)
        return self._sups[m]

    def _raw_lq(self, m, q):
        key = (m, float(q))
        if key not in self._lqs:
            if q == np.inf:
                self._lqs[key] = self._raw_sup(m)
            else:
                self._lqs[key] = self._fit(m).lp(float(q))
        return self._lqs[key]

    # -- evaluators -------------------------------------------------------

    def phi(self, *ys):
        return self.phi_deriv((0,) * (self.d - 1))(*ys)

    def phi_deriv(self, beta):
        """Evaluator of the beta spatial derivative of phi in profile variables."""
        beta = tuple(int(b) for b in beta)
        if len(beta) != self.d - 1:
            raise ValueError("multi-index length must be d-1")
        if self.d == 2:
            return lambda y: self.scale * gauss_derivative(y, 2 + beta[0])
        return lambda y1, y2: self.scale * gauss_derivative(y1, 2 + beta[0]) * gauss_derivative(y2, beta[1])

    def omega(self, *ys):
        """Components of Omega at the given profile coordinates."""
        if self.d == 2:
            return (self.scale * gauss_derivative(ys[0], 1),)
        return (
            self.scale * gauss_derivative(ys[0], 1) * gauss_derivative(ys[1], 0),
            np.zeros_like(np.asarray(ys[0], dtype=float) * np.asarray(ys[1], dtype=float)),
        )

    def div_omega(self, *ys):
        if self.d == 2:
            return self.scale * gauss_derivative(ys[0], 2)
        return self.scale * gauss_derivative(ys[0], 2) * gauss_derivative(ys[1], 0)

    # -- exact norms ------------------------------------------------------

    def phi_lq(self, q):
        if self.d == 2:
            return self.scale * self._raw_lq(2, q)
        return self.scale * self._raw_lq(2, q) * self._raw_lq(0, q)

    def omega_lq(self, q):
        # only one component of Omega is nonzero
        if self.d == 2:
            return self.scale * self._raw_lq(1, q)
        return self.scale * self._raw_lq(1, q) * self._raw_lq(0, q)

    def phi_deriv_sup(self, beta):
        if self.d == 2:
            return self.scale * self._raw_sup(2 + beta[0])
        return self.scale * self._raw_sup(2 + beta[0]) * self._raw_sup(beta[1])

    def phi_deriv_lq(self, beta, q):
        if self.d == 2:
            return self.scale * self._raw_lq(2 + beta[0], q)
        return self.scale * self._raw_lq(2 + beta[0], q) * self._raw_lq(beta[1], q)

    def phi_sq_antiderivative(self):
        """Antiderivative of phi^2 over the unit cell; saturates at 1 (d=2)."""
        if self.d != 2:
            raise ValueError("one-variable antiderivative is a d=2 quantity")
        fit = chebfit.fit_resolving(
            lambda y: self.phi(y) ** 2, 0.0, 1.0,
            must_resolve=_hermite_zeros(2), tol=1e-13 * self.phi_deriv_sup((0,)) ** 2,
        )
        return fit.antiderivative()

    def omega_deriv_sup(self, beta):
        """sup of the beta derivative of the potential factor, profile variables."""
        beta = tuple(int(b) for b in beta)
        if self.d == 2:
            return self.scale * self._raw_sup(1 + beta[0])
        return self.scale * self._raw_sup(1 + beta[0]) * self._raw_sup(beta[1])

    def _sq_fit(self, m):
        """Chebyshev fit of the squared 1D factor gauss_derivative(., m)^2."""
        key = ("sq", m)
        if key not in self._fits:
            dense = self._raw_sup(m) ** 2
            self._fits[key] = chebfit.fit_resolving(
                lambda y: gauss_derivative(y, m) ** 2, 0.0, 1.0,
                must_resolve=_hermite_zeros(m), tol=1e-12 * dense,
            )
        return self._fits[key]

    def sq_factor_deriv_sup(self, m, j):
        """sup over the cell of d^j/dy^j [gauss_derivative(y, m)^2]."""
        key = ("sqd", m, j)
        if key not in self._sups:
            self._sups[key] = self._sq_fit(m).derivative(j).sup(1025) if j else self._sq_fit(m).sup(1025)
        return self._sups[key]

    def sq_factor_lq(self, m, q):
        key = ("sql", m, float(q))
        if key not in self._lqs:
            fit = self._sq_fit(m)
            self._lqs[key] = fit.sup(1025) if q == np.inf else fit.lp(float(q))
        return self._lqs[key]

    def phi_sq_deriv_sup(self, j):
        """sup of d^j(phi^2) in the profile variable (d = 2 only)."""
        if self.d != 2:
            raise ValueError("single-variable phi^2 calculus is a d=2 quantity")
        return self.scale**2 * self.sq_factor_deriv_sup(2, j)

    def multi_indices(self, s):
        if self.d == 2:
            return [(m,) for m in range(s + 1)]
        return [(i, j) for i in range(s + 1) for j in range(s + 1 - i)]


def _frac_samples(profile_fn, grid, axis, sigma, mu):
    n = grid.shape[axis]
    v = np.arange(n, dtype=float) / n
    y = mu * np.mod(sigma * v, 1.0)
    return profile_fn(y)


def _axis_broadcast(grid, axis, row):
    shape = [1] * grid.d
    shape[axis] = len(row)
    return np.broadcast_to(row.reshape(shape), grid.shape)


class MikadoSet:
    """Periodized blocks Phi_k, Omega_k, W_k for all k on a shared grid."""

    def __init__(self, profile, sigma, mu, grid):
        if grid.d != profile.d:
            raise ValueError("grid dimension must match profile dimension")
        if mu < 1.0:
            raise ValueError("mu >= 1 required so a pipe fits one period cell")
        if int(sigma) != sigma or sigma < 1:
            raise ValueError("sigma must be a positive integer")
        if min(grid.shape) < 8 * sigma * mu:
            raise ValueError(
                f"grid too coarse: n = {min(grid.shape)} < 8 sigma mu = {8 * sigma * mu:g}"
            )
        self.profile = profile
        self.sigma = int(sigma)
        self.mu = float(mu)
        self.grid = grid
        d = grid.d
        sc = self.mu ** (d - 1)

        self.Phi = {}
        self.Omega = {}
        self.W = {}
        for k in range(1, d + 1):
            others = [ax for ax in range(d) if ax != k - 1]
            if d == 2:
                row = _frac_samples(lambda y: profile.phi(y), grid, others[0], sigma, mu)
                phi_vals = _axis_broadcast(grid, others[0], row)
                om_row = _frac_samples(lambda y: profile.omega(y)[0], grid, others[0], sigma, mu)
                om_vals = [_axis_broadcast(grid, others[0], om_row) / mu]
            else:
                r1 = _frac_samples(lambda y: profile.scale * gauss_derivative(y, 2), grid, others[0], sigma, mu)
                r2 = _frac_samples(lambda y: gauss_derivative(y, 0), grid, others[1], sigma, mu)
                phi_vals = _axis_broadcast(grid, others[0], r1) * _axis_broadcast(grid, others[1], r2)
                o1 = _frac_samples(lambda y: profile.scale * gauss_derivative(y, 1), grid, others[0], sigma, mu)
                om_vals = [
                    _axis_broadcast(grid, others[0], o1) * _axis_broadcast(grid, others[1], r2) / mu,
                    np.zeros(grid.shape),
                ]
            self.Phi[k] = PeriodicField(grid, np.ascontiguousarray(phi_vals))
            omega_comps = []
            w_comps = []
            slot = 0
            for ax in range(d):
                if ax == k - 1:
                    omega_comps.append(PeriodicField(grid, np.zeros(grid.shape)))
                    w_comps.append(PeriodicField(grid, np.ascontiguousarray(sc * phi_vals)))
                else:
                    omega_comps.append(PeriodicField(grid, np.ascontiguousarray(om_vals[slot])))
                    w_comps.append(PeriodicField(grid, np.zeros(grid.shape)))
                    slot += 1
            self.Omega[k] = VectorField(omega_comps)
            self.W[k] = VectorField(w_comps)

    @property
    def d(self):
        return self.grid.d

    def flux(self, k):
        """Grid mean of Phi_k W_k; equals e_k exactly in the continuum."""
        pv = self.Phi[k].values
        return np.array([float(np.mean(pv * c.values)) for c in self.W[k].components])

    # -- closed-form norms -------------------------------------------------

    def phi_lp(self, p):
        d1 = self.d - 1
        expo = 0.0 if p == np.inf else d1 / p
        return self.mu ** (-expo) * self.profile.phi_lq(p)

    def w_lp(self, p):
        d1 = self.d - 1
        expo = d1 if p == np.inf else d1 * (1.0 - 1.0 / p)
        return self.mu**expo * self.profile.phi_lq(p)

    def omega_lp(self, p):
        d1 = self.d - 1
        expo = 1.0 if p == np.inf else 1.0 + d1 / p
        return self.mu ** (-expo) * self.profile.omega_lq(p)

    def phi_sobolev(self, s, p):
        """max over |beta| <= s of ||d^beta Phi_k||_p, from the scaling law."""
        best = 0.0
        for beta in self.profile.multi_indices(s):
            fac = (self.sigma * self.mu) ** sum(beta)
            best = max(best, fac * self.mu ** (-(self.d - 1) / p) * self.profile.phi_deriv_lq(beta, p))
        return best

    def phi_ck(self, s):
        best = 0.0
        for beta in self.profile.multi_indices(s):
            fac = (self.sigma * self.mu) ** sum(beta)
            best = max(best, fac * self.profile.phi_deriv_sup(beta))
        return best

    def w_ck(self, s):
        return self.mu ** (self.d - 1) * self.phi_ck(s)

    def w_sobolev(self, s, p):
        return self.mu ** (self.d - 1) * self.phi_sobolev(s, p)
