"""Piecewise Chebyshev interpolation on an interval.

Panels are numpy Chebyshev polynomials over contiguous subintervals,
produced by adaptive bisection until the interpolant reproduces the
function at off-node probe points.  Smooth coefficients of the
construction live in this representation so that time derivatives and
antiderivatives stay cheap and spectrally accurate.
"""

import numpy as np
from numpy.polynomial.chebyshev import Chebyshev

DEFAULT_DEGREE = 32
MAX_DEPTH = 12


class PiecewiseCheb:
    """Chebyshev panels over [breaks[i], breaks[i+1]]."""

    def __init__(self, panels):
        if not panels:
            raise ValueError("need at least one panel")
        panels = sorted(panels, key=lambda p: p.domain[0])
        for left, right in zip(panels, panels[1:]):
            if abs(left.domain[1] - right.domain[0]) > 1e-14:
                raise ValueError("panel domains must be contiguous")
        self.panels = list(panels)
        self.breaks = np.array(
            [p.domain[0] for p in panels] + [panels[-1].domain[1]]
        )

    @property
    def domain(self):
        return self.breaks[0], self.breaks[-1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xf = np.atleast_1d(x).ravel()
        idx = np.clip(np.searchsorted(self.breaks, xf, side="right") - 1, 0, len(self.panels) - 1)
        out = np.empty_like(xf)
        for i in np.unique(idx):
            sel = idx == i
            out[sel] = self.panels[i](xf[sel])
        if scalar:
            return float(out[0])
        return out.reshape(x.shape)

    def derivative(self, m=1):
        return PiecewiseCheb([p.deriv(m) for p in self.panels])

    def antiderivative(self):
        """Antiderivative vanishing at the left endpoint, continuous across breaks."""
        acc = 0.0
        out = []
        for p in self.panels:
            q = p.integ(lbnd=p.domain[0], k=[acc])
            out.append(q)
            acc = q(p.domain[1])
        return PiecewiseCheb(out)

    def integral(self):
        return float(sum(p.integ(lbnd=p.domain[0])(p.domain[1]) for p in self.panels))

    def scaled(self, c):
        return PiecewiseCheb([p * c for p in self.panels])

    def sup(self, samples_per_panel=257):
        best = 0.0
        for p in self.panels:
            t = np.linspace(p.domain[0], p.domain[1], samples_per_panel)
            best = max(best, float(np.max(np.abs(p(t)))))
        return best

    def lp(self, q, samples_per_panel=129):
        """L^q norm over the domain via per-panel Gauss-Legendre quadrature."""
        total = 0.0
        for p in self.panels:
            a, b = p.domain
            xg, wg = np.polynomial.legendre.leggauss(samples_per_panel)
            t = 0.5 * (b - a) * xg + 0.5 * (a + b)
            total += 0.5 * (b - a) * float(np.sum(wg * np.abs(p(t)) ** q))
        return total ** (1.0 / q)


def fit(f, a, b, tol=1e-9, degree=DEFAULT_DEGREE, max_depth=MAX_DEPTH):
    """Adaptively fit f on [a, b]. tol is absolute, in the units of f."""
    panels = []

    def build(lo, hi, depth):
        p = Chebyshev.interpolate(f, degree, domain=[lo, hi])
        probe = np.linspace(lo, hi, 2 * degree + 3)[1:-1]
        err = float(np.max(np.abs(p(probe) - f(probe))))
        if err <= tol or depth >= max_depth:
            if err > tol:
                raise RuntimeError(
                    f"panel on [{lo}, {hi}] stuck at residual {err:.3e} > {tol:.3e}"
                )
            panels.append(p)
            return
        mid = 0.5 * (lo + hi)
        build(lo, mid, depth + 1)
        build(mid, hi, depth + 1)

    build(float(a), float(b), 0)
    return PiecewiseCheb(panels)


def fit_resolving(f, a, b, must_resolve=(), tol=1e-9, degree=DEFAULT_DEGREE):
    """Fit with panel breaks forced at the interior points in must_resolve.

    Needed when f has kinks at known locations (piecewise-defined
    profiles): adaptive probing alone can miss a kink sitting exactly at
    a probe-free spot.
    """
    pts = sorted({float(a), float(b), *(float(t) for t in must_resolve if a < t < b)})
    parts = []
    for lo, hi in zip(pts, pts[1:]):
        parts.extend(fit(f, lo, hi, tol=tol, degree=degree).panels)
    return PiecewiseCheb(parts)
