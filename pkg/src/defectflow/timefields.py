"""Time-dependent fields: slow Chebyshev coefficients and separated products.

A CoefficientField stores spatial snapshots at Chebyshev nodes over its
temporal support and interpolates barycentrically; time differentiation
is the spectral differentiation matrix applied to the node stack.  All
fast time scales live in TemporalProfile factors of SeparatedField
terms, never in node stacks.
"""

import numpy as np

from .fields import (
    PeriodicField,
    VectorField,
    derivative,
    project_mean_zero,
    spectral_resample,
)

MAX_DEGREE = 32


def cheb_nodes(m, a, b):
    """Chebyshev points of the second kind on [a, b], increasing."""
    j = np.arange(m + 1)
    return 0.5 * (a + b) - 0.5 * (b - a) * np.cos(np.pi * j / m)


def bary_weights(m):
    w = np.ones(m + 1)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[m] *= 0.5
    return w


def diff_matrix(m, a, b):
    """Spectral differentiation matrix on the second-kind nodes."""
    x = np.cos(np.pi * np.arange(m + 1) / m)   # standard order on [-1, 1]
    c = np.ones(m + 1)
    c[0] = c[m] = 2.0
    c *= (-1.0) ** np.arange(m + 1)
    X = np.tile(x, (m + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(m + 1))
    D -= np.diag(D.sum(axis=1))
    # nodes above are decreasing on [-1,1]; ours increase on [a,b]
    D = D[::-1, ::-1]
    return D * (2.0 / (b - a))


def _bary_coeffs(t, nodes, weights):
    diff = t - nodes
    hit = np.abs(diff) < 1e-14
    if hit.any():
        out = np.zeros(len(nodes))
        out[np.argmax(hit)] = 1.0
        return out
    tmp = weights / diff
    return tmp / tmp.sum()


class CoefficientField:
    """Smooth-in-time scalar field supported on [a, b] inside (0, 1)."""

    def __init__(self, grid, support, stack):
        a, b = float(support[0]), float(support[1])
        if not 0.0 < a < b < 1.0:
            raise ValueError("temporal support must lie strictly inside (0, 1)")
        stack = np.asarray(stack, dtype=float)
        if stack.shape[1:] != grid.shape:
            raise ValueError("node stack shape must be (m+1, *grid.shape)")
        self.grid = grid
        self.support = (a, b)
        self.stack = stack
        m = stack.shape[0] - 1
        self.nodes = cheb_nodes(m, a, b)
        self.weights = bary_weights(m)
        self._dstack = None

    @classmethod
    def from_function(cls, grid, support, fn, degree=16, validate=True, tol=1e-8):
        """fn(t) -> PeriodicField sampled at Chebyshev nodes.

        Doubles the degree (up to 32) until values at withheld midpoints
        are reproduced to tol relative.
        """
        a, b = support
        while True:
            nodes = cheb_nodes(degree, a, b)
            stack = np.stack([fn(t).values for t in nodes])
            cf = cls(grid, support, stack)
            if not validate:
                return cf
            mids = 0.5 * (nodes[:-1] + nodes[1:])
            scale = np.max(np.abs(stack))
            if scale == 0.0:
                return cf
            worst = max(
                np.max(np.abs(cf.eval(t).values - fn(t).values)) for t in mids
            )
            if worst <= tol * scale:
                return cf
            if degree >= MAX_DEGREE:
                raise ValueError(
                    f"coefficient not smooth enough: residual {worst / scale:.2e} "
                    f"at degree {degree}"
                )
            degree *= 2

    @property
    def degree(self):
        return self.stack.shape[0] - 1

    def _dstack_arr(self):
        if self._dstack is None:
            D = diff_matrix(self.degree, *self.support)
            self._dstack = np.tensordot(D, self.stack, axes=(1, 0))
        return self._dstack

    def eval(self, t):
        t = float(t)
        a, b = self.support
        if t < a or t > b:
            return PeriodicField(self.grid, np.zeros(self.grid.shape))
        c = _bary_coeffs(t, self.nodes, self.weights)
        return PeriodicField(self.grid, np.tensordot(c, self.stack, axes=(0, 0)))

    def eval_dt(self, t):
        t = float(t)
        a, b = self.support
        if t < a or t > b:
            return PeriodicField(self.grid, np.zeros(self.grid.shape))
        c = _bary_coeffs(t, self.nodes, self.weights)
        return PeriodicField(self.grid, np.tensordot(c, self._dstack_arr(), axes=(0, 0)))

    def map_nodes(self, op):
        """New CoefficientField with op applied to every node snapshot."""
        out = np.stack([op(PeriodicField(self.grid, v)).values for v in self.stack])
        return CoefficientField(self.grid, self.support, out)

    def derivative_space(self, axis):
        return self.map_nodes(lambda f: derivative(f, axis))

    def resample(self, new_grid):
        """Trigonometric resampling of every node onto new_grid."""
        if new_grid.shape == self.grid.shape:
            return self
        out = np.stack(
            [
                spectral_resample(PeriodicField(self.grid, v), new_grid.shape).values
                for v in self.stack
            ]
        )
        return CoefficientField(new_grid, self.support, out)

    def dt_field(self):
        """The time derivative as its own CoefficientField."""
        return CoefficientField(self.grid, self.support, self._dstack_arr().copy())

    def max_abs(self):
        return float(np.max(np.abs(self.stack)))

    def dt_max_abs(self):
        return float(np.max(np.abs(self._dstack_arr())))

    def is_zero(self):
        return self.max_abs() == 0.0


class VectorCoefficient:
    """d CoefficientFields sharing grid and support; the defect field R."""

    def __init__(self, components):
        components = tuple(components)
        g = components[0].grid
        s = components[0].support
        for c in components[1:]:
            if c.grid is not g and c.grid.shape != g.shape:
                raise ValueError("component grids differ")
            if c.support != s:
                raise ValueError("component supports differ")
        self.components = components
        self.grid = g
        self.support = s

    @classmethod
    def from_function(cls, grid, support, fn, **kw):
        d = grid.d
        comps = [
            CoefficientField.from_function(
                grid, support, lambda t, j=j: fn(t).components[j], **kw
            )
            for j in range(d)
        ]
        return cls(comps)

    def eval(self, t):
        return VectorField([c.eval(t) for c in self.components])

    def eval_dt(self, t):
        return VectorField([c.eval_dt(t) for c in self.components])

    def max_abs(self):
        return max(c.max_abs() for c in self.components)


def map_nodes_vector(cf, op):
    """VectorCoefficient from a vector-valued op applied to cf's nodes."""
    stacks = None
    for v in cf.stack:
        out = op(PeriodicField(cf.grid, v))
        if stacks is None:
            stacks = [[] for _ in out.components]
        for j, c in enumerate(out.components):
            stacks[j].append(c.values)
    return VectorCoefficient(
        [CoefficientField(cf.grid, cf.support, np.stack(s)) for s in stacks]
    )


def decompose_defect(R):
    """Defect components R_k, k = 1..d, reconstructing R = sum R_k e_k."""
    a, b = R.support
    if a <= 0.0 or b >= 1.0:
        raise ValueError("defect support must stay inside (0, 1)")
    return list(R.components)


class Term:
    """sign * profile(t) * coeff(x, t) * block(x).

    Any factor may be absent: profile None means 1, coeff may be a plain
    float, block None means 1 (scalar term).
    """

    __slots__ = ("profile", "coeff", "block", "sign")

    def __init__(self, profile=None, coeff=1.0, block=None, sign=1.0):
        self.profile = profile
        self.coeff = coeff
        self.block = block
        self.sign = float(sign)

    def _coeff_at(self, t, dt=False):
        if isinstance(self.coeff, (CoefficientField, VectorCoefficient)):
            return self.coeff.eval_dt(t) if dt else self.coeff.eval(t)
        return 0.0 if dt else float(self.coeff)

    def _with_block(self, c):
        if self.block is None:
            return c
        if isinstance(c, VectorField):
            raise ValueError("vector coefficient cannot carry a spatial block")
        return _mul(c, self.block)

    def value(self, t):
        amp = self.sign if self.profile is None else self.sign * float(self.profile(t))
        if amp == 0.0:
            return None
        c = self._coeff_at(t)
        if isinstance(c, (PeriodicField, VectorField)):
            return amp * self._with_block(c)
        if c == 0.0:
            return None
        if self.block is None:
            raise ValueError("constant term with no spatial factor")
        return (amp * c) * self.block

    def value_dt(self, t):
        """Product-rule time derivative; blocks are time-independent."""
        parts = []
        amp = self.sign if self.profile is None else self.sign * float(self.profile(t))
        damp = 0.0 if self.profile is None else self.sign * float(self.profile.derivative(t))
        c = self._coeff_at(t)
        cdt = self._coeff_at(t, dt=True)
        for a, cf in ((damp, c), (amp, cdt)):
            if a == 0.0 or (not isinstance(cf, (PeriodicField, VectorField)) and cf == 0.0):
                continue
            if isinstance(cf, (PeriodicField, VectorField)):
                parts.append(a * self._with_block(cf))
            else:
                parts.append((a * cf) * self.block)
        return parts


def _mul(scalar_field, block):
    if isinstance(block, VectorField):
        return VectorField([scalar_field * c for c in block.components])
    return scalar_field * block


class SeparatedField:
    """Sum of separated terms, optionally mean-projected at evaluation.

    Perturbation fields need at most 3d terms (d directions, up to three
    mechanisms each); exceeding that indicates a builder bug, so the
    constructor rejects it unless unchecked is set.
    """

    def __init__(self, grid, terms, vector=False, project=False, unchecked=False):
        terms = list(terms)
        if not unchecked and len(terms) > 3 * grid.d:
            raise ValueError(f"{len(terms)} terms exceeds the 3d budget")
        self.grid = grid
        self.terms = terms
        self.vector = vector
        self.project = project

    def _zero(self):
        z = PeriodicField(self.grid, np.zeros(self.grid.shape))
        if self.vector:
            return VectorField([z] + [
                PeriodicField(self.grid, np.zeros(self.grid.shape))
                for _ in range(self.grid.d - 1)
            ])
        return z

    def _finish(self, acc):
        if acc is None:
            return self._zero()
        if self.project:
            if self.vector:
                acc = VectorField([project_mean_zero(c) for c in acc.components])
            else:
                acc = project_mean_zero(acc)
        return acc

    def __call__(self, t):
        acc = None
        for term in self.terms:
            v = term.value(t)
            if v is None:
                continue
            acc = v if acc is None else acc + v
        return self._finish(acc)

    def dt(self, t):
        acc = None
        for term in self.terms:
            for v in term.value_dt(t):
                acc = v if acc is None else acc + v
        return self._finish(acc)
