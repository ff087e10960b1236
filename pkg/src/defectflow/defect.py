"""Assembly of the updated defect field.

R1 = R_osc,x + R_osc,t + R_acc + R_lin + R_cor (+ R_L when a diffusion
operator is present), each part solving its divergence equation so that
(rho + theta, u + w, R1) solves the continuity-defect equation again.
"""

import numpy as np

from .fields import (
    PeriodicField,
    VectorField,
    _antidiv_raw,
    apply_diff_operator,
    bilinear_antidiv,
    derivative,
    divergence,
    lp,
    project_mean_zero,
    zero_vector,
)
from .perturbation import build_theta, build_w, check_compatible, unit_vector_field
from .profiles import ProfileDerivative
from .timefields import SeparatedField, Term, decompose_defect, map_nodes_vector


def at(obj, t):
    """Evaluate a time-dependent field object at t."""
    if hasattr(obj, "eval"):
        return obj.eval(t)
    return obj(t)


def at_dt(obj, t):
    if hasattr(obj, "eval_dt"):
        return obj.eval_dt(t)
    return obj.dt(t)


def _truncate_row(row, n_out):
    """1D spectral truncation of periodic samples to n_out points."""
    spec = np.fft.rfft(row)
    keep = spec[: n_out // 2 + 1].copy()
    keep[-1] = 0.0
    return np.fft.irfft(keep * (n_out / len(row)), n=n_out)


def _squared_rows(blocks, k, refine=2):
    """Transverse sample rows of Phi_k^2 factors, dealiased by refine."""
    from .mikado import gauss_derivative

    prof = blocks.profile
    g = blocks.grid
    others = [ax for ax in range(g.d) if ax != k - 1]
    rows = {}
    for pos, ax in enumerate(others):
        n = g.shape[ax]
        v = np.arange(refine * n, dtype=float) / (refine * n)
        y = blocks.mu * np.mod(blocks.sigma * v, 1.0)
        if g.d == 2:
            fine = prof.phi(y) ** 2
        elif pos == 0:
            fine = (prof.scale * gauss_derivative(y, 2)) ** 2
        else:
            fine = gauss_derivative(y, 0) ** 2
        rows[ax] = _truncate_row(fine, n)
    return rows


def pipe_product(blocks, k):
    """Dealiased samples of mu^{d-1} Phi_k^2, the k-component of Phi_k W_k.

    The factors live on separate axes, so truncating each refined 1D row
    equals truncating the full refined product.
    """
    g = blocks.grid
    rows = _squared_rows(blocks, k)
    vals = np.ones(g.shape)
    for ax, row in rows.items():
        shape = [1] * g.d
        shape[ax] = len(row)
        vals = vals * row.reshape(shape)
    return PeriodicField(g, vals * blocks.mu ** (g.d - 1))


def osc_x(R_parts, blocks, profiles, params):
    """-sum_k gtilde_k g_k B(grad R_k, P_{neq 0}(Phi_k W_k))."""
    check_compatible(blocks, profiles, params)
    d = params.exponents.d
    terms = []
    for k in range(1, d + 1):
        q_k = project_mean_zero(pipe_product(blocks, k))
        rk = R_parts[k - 1].resample(blocks.grid)
        coeff = map_nodes_vector(
            rk, lambda f, q=q_k, ax=k - 1: bilinear_antidiv(derivative(f, ax), q)
        )
        terms.append(Term(profile=profiles.pair[k], coeff=coeff, sign=-1.0))
    return SeparatedField(blocks.grid, terms, vector=True)


def osc_t(R_parts, profiles, params):
    """sigma^{-1} sum_k h_k dt(R_k) e_k."""
    d = params.exponents.d
    grid = R_parts[0].grid
    inv_sigma = 1.0 / params.sigma
    terms = [
        Term(
            profile=profiles.h[k],
            coeff=R_parts[k - 1].dt_field(),
            block=unit_vector_field(grid, k),
            sign=inv_sigma,
        )
        for k in range(1, d + 1)
    ]
    return SeparatedField(grid, terms, vector=True)


def acc(R_parts, blocks, profiles, params):
    """-sum_k B(dt(gtilde_k R_k), Phi_k), split by the product rule."""
    check_compatible(blocks, profiles, params)
    d = params.exponents.d
    terms = []
    for k in range(1, d + 1):
        rk = R_parts[k - 1].resample(blocks.grid)
        phi = project_mean_zero(blocks.Phi[k])
        b_r = map_nodes_vector(rk, lambda f, p=phi: bilinear_antidiv(f, p))
        b_dr = map_nodes_vector(rk.dt_field(), lambda f, p=phi: bilinear_antidiv(f, p))
        terms.append(Term(profile=ProfileDerivative(profiles.g_tilde[k]), coeff=b_r, sign=-1.0))
        terms.append(Term(profile=profiles.g_tilde[k], coeff=b_dr, sign=-1.0))
    return SeparatedField(blocks.grid, terms, vector=True)


class SumScalar:
    """Sum of time-evaluable scalar parts."""

    def __init__(self, grid, parts):
        self.grid = grid
        self.parts = list(parts)

    def __call__(self, t):
        acc_f = PeriodicField(self.grid, np.zeros(self.grid.shape))
        for p in self.parts:
            acc_f = acc_f + at(p, t)
        return acc_f

    def dt(self, t):
        acc_f = PeriodicField(self.grid, np.zeros(self.grid.shape))
        for p in self.parts:
            acc_f = acc_f + at_dt(p, t)
        return acc_f


class SumVector:
    def __init__(self, grid, parts):
        self.grid = grid
        self.parts = list(parts)

    def __call__(self, t):
        acc_f = zero_vector(self.grid)
        for p in self.parts:
            acc_f = acc_f + at(p, t)
        return acc_f


class ProductPart:
    """Pointwise product scalar(t) * vector(t) on a shared grid."""

    def __init__(self, scalar, vector):
        self.scalar = scalar
        self.vector = vector

    def __call__(self, t):
        s = at(self.scalar, t)
        v = at(self.vector, t)
        return VectorField([s * c for c in v.components])


class SumParts:
    """Named vector parts summed at evaluation; the assembled defect."""

    def __init__(self, grid, parts, support):
        self.grid = grid
        self.parts = dict(parts)
        self.support = support

    def __call__(self, t):
        out = zero_vector(self.grid)
        for p in self.parts.values():
            out = out + at(p, t)
        return out


def lin(theta, u_parts, rho_parts, w, grid):
    """R_lin = theta u + rho w."""
    return SumParts(
        grid,
        {
            "theta_u": ProductPart(theta, SumVector(grid, u_parts)),
            "rho_w": ProductPart(SumScalar(grid, rho_parts), w),
        },
        support=None,
    )


def cor(theta_o, w):
    """R_cor = theta_o w."""
    return ProductPart(theta_o, w)


def diffusion_defect(R_parts, blocks, profiles, params, op, p):
    """R_L = antidiv(L sum_k gtilde_k R_k Phi_k) for constant-coefficient L.

    op is a list of (multi-index, coefficient) pairs; its order must not
    exceed the regularity target p.
    """
    check_compatible(blocks, profiles, params)
    order = max((sum(beta) for beta, _ in op), default=0)
    if order > p:
        raise ValueError(f"operator order {order} exceeds p = {p}")
    d = params.exponents.d
    terms = []
    for k in range(1, d + 1):
        rk = R_parts[k - 1].resample(blocks.grid)
        phi = blocks.Phi[k]

        def node_op(f, p_=phi):
            lf = apply_diff_operator(f * p_, op)
            return _antidiv_raw(project_mean_zero(lf))

        terms.append(Term(profile=profiles.g_tilde[k], coeff=map_nodes_vector(rk, node_op)))
    return SeparatedField(blocks.grid, terms, vector=True)


def assemble_R1(parts, grid, support):
    """Named parts -> one evaluable defect; grids must agree."""
    for name, part in parts.items():
        pg = getattr(part, "grid", None)
        if pg is not None and pg.shape != grid.shape:
            raise ValueError(f"part {name!r} lives on grid {pg.shape}, expected {grid.shape}")
    return SumParts(grid, parts, support)


class DefectTriple:
    """A solution (rho, u, R) of the continuity-defect equation.

    rho and u are sums of slow coefficient fields and fast separated
    perturbations; R is any time-evaluable vector field supported
    strictly inside (0, 1) in time.
    """

    def __init__(self, grid, rho_parts, u_parts, R, support):
        a, b = support
        if not 0.0 < a < b < 1.0:
            raise ValueError("defect support must lie strictly inside (0, 1)")
        self.grid = grid
        self.rho_parts = list(rho_parts)
        self.u_parts = list(u_parts)
        self.R = R
        self.support = (float(a), float(b))

    def rho(self, t):
        return SumScalar(self.grid, self.rho_parts)(t)

    def rho_dt(self, t):
        return SumScalar(self.grid, self.rho_parts).dt(t)

    def u(self, t):
        return SumVector(self.grid, self.u_parts)(t)

    def R_at(self, t):
        return at(self.R, t)


def perturb_triple(triple, blocks, profiles, params, diffusion=None):
    """One corrector pass: (rho, u, R) -> (rho + theta, u + w, R1).

    The defect must decompose into per-direction coefficient fields; R1
    carries the five error parts (plus the diffusion part when asked).
    """
    grid = blocks.grid
    R_parts = [c.resample(grid) for c in decompose_defect(triple.R)]
    theta, theta_p, theta_o = build_theta(R_parts, blocks, profiles, params)
    w = build_w(blocks, profiles, params)
    parts = {
        "osc_x": osc_x(R_parts, blocks, profiles, params),
        "osc_t": osc_t(R_parts, profiles, params),
        "acc": acc(R_parts, blocks, profiles, params),
        "lin": lin(theta, triple.u_parts, triple.rho_parts, w, grid),
        "cor": cor(theta_o, w),
    }
    if diffusion is not None:
        op, p = diffusion
        parts["diff"] = diffusion_defect(R_parts, blocks, profiles, params, op, p)
    R1 = assemble_R1(parts, grid, triple.support)
    rho_parts = [p_.resample(grid) if hasattr(p_, "resample") else p_ for p_ in triple.rho_parts]
    return DefectTriple(grid, rho_parts + [theta], triple.u_parts + [w], R1, triple.support)


def residual(triple, times):
    """max over times of ||dt rho + div(rho u) - div R||_L2 / (1 + ||dt rho||_L2)."""
    worst = 0.0
    for t in times:
        drho = triple.rho_dt(t)
        rho_t = triple.rho(t)
        u_t = triple.u(t)
        flux = VectorField([rho_t * c for c in u_t.components])
        mismatch = drho + divergence(flux) + (-1.0) * divergence(triple.R_at(t))
        err = lp(mismatch, 2) / (1.0 + lp(drho, 2))
        worst = max(worst, err)
    return worst


def telescoping_residual(theta, theta_p, w, R, osc_parts, t):
    """Relative size of div(sum osc) - (dt theta + div(theta_p w + R)) at t."""
    tp = at(theta_p, t)
    wt = at(w, t)
    flux = VectorField([tp * c for c in wt.components]) + at(R, t)
    target = at_dt(theta, t) + divergence(flux)
    got = divergence(sum_osc(osc_parts, t))
    scale = max(lp(target, 2), 1e-300)
    return lp(got + (-1.0) * target, 2) / scale


def sum_osc(osc_parts, t):
    out = None
    for p in osc_parts:
        v = at(p, t)
        out = v if out is None else out + v
    return out


def o3_residual(R_parts, profiles, params, osc_t_field, t):
    """dt theta_o - sum_k gtilde_k g_k div(R_k e_k) + div R = div R_osc,t at t."""
    grid = R_parts[0].grid
    d = params.exponents.d
    dt_theta_o = PeriodicField(grid, np.zeros(grid.shape))
    pair_sum = PeriodicField(grid, np.zeros(grid.shape))
    div_r = PeriodicField(grid, np.zeros(grid.shape))
    inv_sigma = 1.0 / params.sigma
    for k in range(1, d + 1):
        rk = R_parts[k - 1]
        div_rk = derivative(rk.eval(t), k - 1)
        div_drk = derivative(rk.eval_dt(t), k - 1)
        hk = float(profiles.h[k](t))
        dhk = float(profiles.h[k].derivative(t))
        dt_theta_o = dt_theta_o + inv_sigma * (dhk * div_rk + hk * div_drk)
        pair_sum = pair_sum + float(profiles.pair[k](t)) * div_rk
        div_r = div_r + div_rk
    target = dt_theta_o + (-1.0) * pair_sum + div_r
    got = divergence(at(osc_t_field, t))
    scale = max(lp(target, 2), lp(div_r, 2), 1e-300)
    return lp(got + (-1.0) * target, 2) / scale
