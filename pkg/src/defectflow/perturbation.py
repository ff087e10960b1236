"""Density and velocity perturbations built from a decomposed defect.

Given defect components R_k, temporal profiles and a Mikado set sharing
one parameter set, the builders return SeparatedFields:

    w       = sum_k g_k W_k
    theta_p = -sum_k gtilde_k R_k Phi_k
    theta_o = sigma^{-1} sum_k h_k d_k R_k
    theta   = P_{neq 0} theta_p + theta_o
"""

import numpy as np

from .fields import VectorField, constant_field
from .profiles import g_profiles, h_corrector, pair_profile
from .timefields import SeparatedField, Term


class ProfileSet:
    """All temporal profiles of one parameter set, indexed by direction."""

    def __init__(self, params):
        self.params = params
        d = params.exponents.d
        self.g_tilde = {}
        self.g_small = {}
        self.h = {}
        self.pair = {}
        for k in range(1, d + 1):
            self.g_tilde[k], self.g_small[k] = g_profiles(k, params)
            self.h[k] = h_corrector(k, params)
            self.pair[k] = pair_profile(k, params)

    @property
    def d(self):
        return self.params.exponents.d

    @property
    def sigma(self):
        return self.params.sigma


def check_compatible(blocks, profiles, params):
    """Blocks and profiles must realize the same (d, sigma, mu, kappa)."""
    d = params.exponents.d
    if blocks.profile.d != d:
        raise ValueError(f"parameter mismatch: blocks have d={blocks.profile.d}, params d={d}")
    if blocks.sigma != params.sigma:
        raise ValueError(f"parameter mismatch: sigma {blocks.sigma} vs {params.sigma}")
    if not np.isclose(blocks.mu, params.mu):
        raise ValueError(f"parameter mismatch: mu {blocks.mu} vs {params.mu}")
    if profiles.params is not params and not np.isclose(profiles.params.kappa, params.kappa):
        raise ValueError("parameter mismatch: profile kappa differs")


def unit_vector_field(grid, k):
    """e_k as a constant VectorField (1-indexed direction)."""
    comps = [constant_field(grid, 1.0 if j == k - 1 else 0.0) for j in range(grid.d)]
    return VectorField(comps)


def build_w(blocks, profiles, params):
    """Velocity perturbation sum_k g_k W_k; divergence-free at every t."""
    check_compatible(blocks, profiles, params)
    d = params.exponents.d
    terms = [
        Term(profile=profiles.g_small[k], coeff=1.0, block=blocks.W[k])
        for k in range(1, d + 1)
    ]
    return SeparatedField(blocks.grid, terms, vector=True)


def build_theta(R_parts, blocks, profiles, params):
    """(theta, theta_p, theta_o) from defect components R_parts.

    theta is the mean-projected sum; theta_p is returned unprojected so
    the telescoping identity can be checked on it directly.  Defect
    snapshots are resampled to the block grid when resolutions differ.
    """
    check_compatible(blocks, profiles, params)
    d = params.exponents.d
    if len(R_parts) != d:
        raise ValueError(f"expected {d} defect components, got {len(R_parts)}")
    R_parts = [cf.resample(blocks.grid) for cf in R_parts]
    inv_sigma = 1.0 / params.sigma

    p_terms = [
        Term(profile=profiles.g_tilde[k], coeff=R_parts[k - 1], block=blocks.Phi[k], sign=-1.0)
        for k in range(1, d + 1)
    ]
    o_terms = [
        Term(profile=profiles.h[k], coeff=R_parts[k - 1].derivative_space(k - 1), sign=inv_sigma)
        for k in range(1, d + 1)
    ]
    theta = SeparatedField(blocks.grid, p_terms + o_terms, project=True)
    theta_p = SeparatedField(blocks.grid, p_terms)
    theta_o = SeparatedField(blocks.grid, o_terms)
    return theta, theta_p, theta_o
