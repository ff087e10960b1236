"""Corrector steps and the geometric schedule that stacks them.

One step consumes a solved triple (rho, u, R) of the continuity-defect
equation and returns one whose defect is smaller; a run stacks steps at
regularity p_n = N 2^n against targets delta_n = eps 2^{-n}.  Two lanes
share the interface:

* identity-check: fields realized on grids at pinned (sigma, mu,
  kappa); divergence identities measured spectrally, norm bounds
  reported but not enforced.
* scaling: nothing fast is ever sampled; a step is accepted when the
  log-space calculus certifies every target, climbing the lambda
  ladder until it does.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .defect import DefectTriple, decompose_defect, perturb_triple, residual
from .fields import _antidiv_raw, field_from_function, grid as make_grid, project_mean_zero
from .mikado import MikadoSet, SpatialProfile
from .params import KAPPA_WARN, choose_exponents, override, realize
from .perturbation import ProfileSet
from .scalenorms import SlowStats, StepCalculus
from .timefields import CoefficientField, map_nodes_vector

__all__ = [
    "StepConfig", "RunConfig", "StepResult", "RunResult",
    "default_target", "init_triple", "probe_times",
    "identity_step", "scaling_step", "schedule", "ledger_depths", "run",
]

ENFORCED = ("theta_lp_cp", "w_l1_w1p", "r1_l1")


def default_target(g=None, support=(0.1, 0.9), degree=16):
    """eta(t) sin(2 pi x1): the smallest mean-zero target with a bump window.

    eta is sin^4 of the rescaled time, so the density vanishes to third
    order at the ends of its support and the depth-3 time records of the
    root stats stay bounded.
    """
    if g is None:
        g = make_grid(2, 64)
    a, b = support

    def env(t):
        return math.sin(math.pi * (t - a) / (b - a)) ** 4

    return CoefficientField.from_function(
        g, support,
        lambda t: field_from_function(g, lambda *x: env(t) * np.sin(2 * np.pi * x[0])),
        degree=degree,
    )


def init_triple(rho_tilde, check_residual=True):
    """(rho, 0, R) with div R = dt rho: the trivial start of the iteration.

    The defect is the antidivergence of the time derivative, available
    because the target keeps zero spatial mean at every time; the check
    is against the node stack, so a drifting mean fails loudly here
    rather than as a silent projection later.
    """
    stack = rho_tilde.stack
    scale = float(np.max(np.abs(stack)))
    if scale > 0.0:
        axes = tuple(range(1, stack.ndim))
        worst = float(np.max(np.abs(stack.mean(axis=axes))))
        if worst > 1e-10 * scale:
            raise ValueError(
                f"target density must be mean-zero in x at every node (off by {worst:.2e})"
            )
    R = map_nodes_vector(rho_tilde.dt_field(), lambda f: _antidiv_raw(project_mean_zero(f)))
    triple = DefectTriple(rho_tilde.grid, [rho_tilde], [], R, rho_tilde.support)
    if check_residual and scale > 0.0:
        a, b = rho_tilde.support
        worst = residual(triple, a + (b - a) * np.array([0.21, 0.52, 0.83]))
        if worst > 1e-9:
            raise ValueError(f"initial triple residual {worst:.2e} exceeds 1e-9")
    return triple


@dataclass(frozen=True)
class StepConfig:
    """One corrector pass: regularity p, size target delta, and the lane.

    The ladder fields only matter in scaling mode; the pinned (sigma,
    mu, kappa) and grid only in identity-check mode.  grid_n = 0 picks
    64 sigma mu rounded up to a power of two, the resolution at which
    the divergence identities bottom out near round-off.
    """

    p: int
    delta: float
    mode: str = "scaling"
    lam0: float = 16.0
    growth: float = 2.0
    max_tries: int = 512
    exact_sigma: bool = False
    sigma: int = 2
    mu: float = 8.0
    kappa: float = 8.0
    grid_n: int = 0
    identity_tol: float = 1e-5
    diffusion: tuple = None

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError("p must be a positive integer")
        if not 0.0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")
        if self.mode not in ("identity-check", "scaling"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.growth <= 1.0:
            raise ValueError("ladder growth factor must exceed 1")
        if self.max_tries < 1:
            raise ValueError("ladder needs at least one try")
        if self.mode == "identity-check" and self.kappa > KAPPA_WARN:
            raise ValueError("kappa beyond 1e12 cannot be sampled on a grid; use scaling mode")


@dataclass
class StepResult:
    mode: str
    p: int
    delta: float
    params: object
    passed: bool
    tries: int
    bounds: dict                # log-space norm bounds at the frozen lambda
    targets: dict               # log-space targets for the enforced subset
    ledger: object = None       # scaling mode: stats pack for the next level
    triple: object = None       # identity mode: the realized new triple
    diagnostics: dict = field(default_factory=dict)

    @property
    def log_lambda(self):
        return self.params.log_lambda

    def norm_flags(self):
        return {k: self.bounds[k] <= self.targets[k] for k in self.targets}


def _collect_bounds(calc):
    out = {
        "theta_lp_cp": calc.theta_lp_cp(),
        "w_l1_w1p": calc.w_l1_w1p(),
        "r1_l1": calc.r1_l1(),
        "product_l1": calc.product_l1(),
        "theta_sup": calc.theta_dsup(calc.zero_beta, 0),
        "theta_o_sup": calc.theta_o_sup(),
        "m_ratio": calc.m_ratio_log(),
    }
    for name, v in calc.r1_parts().items():
        out["r1_" + name] = v
    return out


def _realize_quiet(exps, log_lam, exact_sigma):
    with warnings.catch_warnings():
        # the size warning guards full-field sampling, which this lane never does
        warnings.filterwarnings("ignore", message="kappa exceeds", category=RuntimeWarning)
        return realize(exps, log_lam=log_lam, exact_sigma=exact_sigma)


def scaling_step(stats, d, cfg, ledger_depth=None, r1_cap=None):
    """Climb the lambda ladder until the three step targets certify.

    Accepts at the first rung where theta, w, and the new defect all sit
    under their targets, freezing lambda there.  r1_cap tightens the
    defect target below delta (a run's last step keeps the weak-form
    budget).  ledger_depth = (lmax, jmax) requests the output stats
    pack; it is refused under a diffusion operator, whose contribution
    the ledger records do not carry.
    """
    if cfg.mode != "scaling":
        raise ValueError("scaling_step needs a scaling-mode config")
    if cfg.diffusion is not None and ledger_depth is not None:
        raise ValueError("ledger records do not carry diffusion parts; single steps only")
    exps = choose_exponents(d, cfg.p)
    prof = SpatialProfile(d)
    t_r1 = cfg.delta if r1_cap is None else min(cfg.delta, r1_cap)
    targets = {
        "theta_lp_cp": math.log(cfg.delta),
        "w_l1_w1p": math.log(cfg.delta),
        "r1_l1": math.log(t_r1),
    }
    diffusion = list(cfg.diffusion) if cfg.diffusion is not None else None

    def evaluate(ll):
        params = _realize_quiet(exps, ll, cfg.exact_sigma)
        calc = StepCalculus(stats, prof, params, cfg.p, diffusion=diffusion)
        worst = max(getattr(calc, k)() - targets[k] for k in ENFORCED)
        return worst, params, calc

    # The rungs climb by the growth factor, but a secant extrapolation of
    # the worst margin may jump ahead: chained inputs carry previous-level
    # frequencies in their constants, which puts the passing zone tens of
    # thousands of doublings up while the margin stays affine in log lambda.
    log_growth = math.log(cfg.growth)
    ll = math.log(cfg.lam0)
    prev = None
    best = None
    tries = 0
    while tries < cfg.max_tries:
        margin, params, calc = evaluate(ll)
        tries += 1
        if best is None or margin < best[0]:
            best = (margin, ll)
        if margin <= 0.0:
            ledger = calc.ledger(*ledger_depth) if ledger_depth is not None else None
            return StepResult(
                cfg.mode, cfg.p, cfg.delta, params, True, tries,
                _collect_bounds(calc), targets, ledger=ledger,
                diagnostics={"worst_margin": margin, "conditions": params.conditions()},
            )
        nxt = ll + log_growth
        if prev is not None and ll > prev[0]:
            slope = (margin - prev[1]) / (ll - prev[0])
            if slope < -1e-9:
                nxt = max(nxt, ll + 1.02 * (-margin / slope))
        prev = (ll, margin)
        ll = nxt

    margin, ll = best
    _, params, calc = evaluate(ll)
    return StepResult(
        cfg.mode, cfg.p, cfg.delta, params, False, tries,
        _collect_bounds(calc), targets,
        diagnostics={"worst_margin": margin, "exhausted": True,
                     "conditions": params.conditions()},
    )


def probe_times(params, support, limit=20):
    """Mid-bump and gap probes for the temporal profiles inside support."""
    d, sig = params.d, params.sigma
    kap = params.kappa
    if not math.isfinite(kap) or kap <= d:
        raise ValueError("probe layout needs finite kappa > d")
    a, b = support
    probes = []
    for m in range(sig):
        for k in range(d):
            lo = (m + k / d) / sig
            probes.append(lo + 1.0 / (2.0 * kap * sig))
            hi = (m + (k + 1) / d) / sig
            probes.append(0.5 * (lo + 1.0 / (kap * sig) + hi))
    keep = sorted(t for t in probes if a < t < b)
    if len(keep) > limit:
        idx = np.linspace(0, len(keep) - 1, limit).round().astype(int)
        keep = [keep[i] for i in sorted(set(idx))]
    return keep


def _pow2_at_least(x):
    n = 1
    while n < x:
        n *= 2
    return n


def identity_step(triple, cfg):
    """Realize one corrector pass on a grid and measure its identities.

    passed reflects the residual gate alone; the norm bounds ride along
    for the report, checked against targets but not enforced, since the
    pinned small parameters cannot reach them.
    """
    if cfg.mode != "identity-check":
        raise ValueError("identity_step needs an identity-check config")
    if not hasattr(triple.R, "components"):
        raise ValueError(
            "identity steps need a per-direction slow defect; "
            "chained output defects are scaling-mode territory"
        )
    d = triple.grid.d
    exps = choose_exponents(d, cfg.p)
    params = override(exps, cfg.sigma, cfg.mu, cfg.kappa)
    n = cfg.grid_n or _pow2_at_least(int(math.ceil(64 * cfg.sigma * cfg.mu)))
    g = make_grid(d, n)
    blocks = MikadoSet(SpatialProfile(d), params.sigma, params.mu, g)
    profiles = ProfileSet(params)
    diffusion = (list(cfg.diffusion), cfg.p) if cfg.diffusion is not None else None
    triple2 = perturb_triple(triple, blocks, profiles, params, diffusion=diffusion)

    probes = probe_times(params, triple.support)
    res_out = residual(triple2, probes)
    res_in = residual(triple, probes)

    stats = SlowStats(decompose_defect(triple.R), triple.rho_parts, triple.support,
                      lmax=cfg.p + 1, jmax=2, nt=32)
    calc = StepCalculus(stats, SpatialProfile(d), params, cfg.p,
                        diffusion=list(cfg.diffusion) if cfg.diffusion is not None else None)
    targets = {k: math.log(cfg.delta) for k in ENFORCED}
    return StepResult(
        cfg.mode, cfg.p, cfg.delta, params, res_out <= cfg.identity_tol, 1,
        _collect_bounds(calc), targets, triple=triple2,
        diagnostics={"residual": res_out, "residual_in": res_in,
                     "probes": len(probes), "grid_n": n},
    )


def schedule(N, eps, n_max):
    """(p_n, delta_n) pairs: p_n = N 2^n, delta_n = eps 2^{-n}, n = 1..n_max."""
    return [(N * 2 ** n, eps * 2.0 ** (-n)) for n in range(1, n_max + 1)]


def ledger_depths(ps):
    """Stats depth each chained ledger must expose, worked backwards.

    The ledger after the last step only feeds the weak-form scalars, so
    (0, 0) suffices there; each earlier one must cover the next step's
    regularity plus the two space / one time levels its own successor
    ledger consumes, never dropping below time depth 2, which the
    successor's slow-part records need.
    """
    n = len(ps)
    out = [(0, 0)] * n
    for i in range(n - 2, -1, -1):
        nl, nj = out[i + 1]
        out[i] = (max(ps[i + 1] + 1, nl + 2), max(2, nj + 1))
    return out


@dataclass(frozen=True)
class RunConfig:
    """The schedule loop's knobs; see StepConfig for the per-step ones."""

    rho_tilde: object
    eps: float = 0.5
    N: int = 1
    n_max: int = 2
    mode: str = "scaling"
    lam0: float = 16.0
    growth: float = 2.0
    max_tries: int = 512
    exact_sigma: bool = False
    witness_budget: float = None
    diffusion: tuple = None
    nt: int = 48
    sigma: int = 2
    mu: float = 8.0
    kappa: float = 8.0
    grid_n: int = 0

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1) so every delta_n stays below 1/2")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not 0 <= self.n_max <= 3:
            raise ValueError("n_max is capped at 3: frequencies compound per step")
        if self.mode not in ("identity-check", "scaling"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class RunResult:
    config: RunConfig
    triple0: DefectTriple
    history: list
    passed: bool
    plan: list                   # (p_n, delta_n) pairs
    rho_dev: float               # bound on ||rho - rho_tilde||_{L^N_t C^N}
    final_ledger: object = None
    final_triple: object = None

    def m_logs(self):
        return [r.bounds["m_ratio"] for r in self.history if r.passed]

    def m_drift(self):
        """Spread of the fitted per-step product constants, in log space."""
        vals = self.m_logs()
        return max(vals) - min(vals) if len(vals) > 1 else 0.0


def run(cfg):
    """Stack corrector steps along the schedule; failures keep their history.

    The deviation bound rho_dev telescopes the per-step theta bounds:
    each L^{p_n}_t C^{p_n} norm dominates the L^N_t C^N one because the
    time interval has unit length and p_n >= N.
    """
    triple = init_triple(cfg.rho_tilde)
    plan = schedule(cfg.N, cfg.eps, cfg.n_max)
    if cfg.n_max == 0:
        return RunResult(cfg, triple, [], True, plan, 0.0, final_triple=triple)

    if cfg.mode == "identity-check":
        if cfg.n_max > 1:
            raise NotImplementedError(
                "chained identity-mode steps are not supported; "
                "scaling mode carries the ledger between levels"
            )
        p1, d1 = plan[0]
        scfg = StepConfig(p=p1, delta=d1, mode="identity-check", sigma=cfg.sigma,
                          mu=cfg.mu, kappa=cfg.kappa, grid_n=cfg.grid_n,
                          diffusion=cfg.diffusion)
        out = identity_step(triple, scfg)
        dev = math.exp(out.bounds["theta_lp_cp"])
        return RunResult(cfg, triple, [out], out.passed, plan, dev,
                         final_triple=out.triple)

    d = triple.grid.d
    if d == 3 and cfg.n_max >= 2:
        raise NotImplementedError(
            "d = 3 chaining is not supported: the antidivergence ledger "
            "records certify the potential-route assembly only"
        )
    if cfg.diffusion is not None and cfg.n_max >= 2:
        raise ValueError("ledger records do not carry diffusion parts; cap n_max at 1")

    ps = [p for p, _ in plan]
    depths = ledger_depths(ps)
    l1, j1 = depths[0]
    stats = SlowStats(decompose_defect(triple.R), triple.rho_parts, triple.support,
                      lmax=max(ps[0] + 1, l1 + 2), jmax=max(2, j1 + 1), nt=cfg.nt)

    history = []
    passed = True
    for i, (p_n, delta_n) in enumerate(plan):
        scfg = StepConfig(p=p_n, delta=delta_n, mode="scaling", lam0=cfg.lam0,
                          growth=cfg.growth, max_tries=cfg.max_tries,
                          exact_sigma=cfg.exact_sigma, diffusion=cfg.diffusion)
        cap = cfg.witness_budget if i == len(plan) - 1 else None
        depth = None if cfg.diffusion is not None else depths[i]
        out = scaling_step(stats, d, scfg, ledger_depth=depth, r1_cap=cap)
        history.append(out)
        if not out.passed:
            passed = False
            break
        stats = out.ledger if out.ledger is not None else stats

    dev = sum(math.exp(r.bounds["theta_lp_cp"]) for r in history if r.passed)
    return RunResult(cfg, triple, history, passed, plan, dev,
                     final_ledger=history[-1].ledger if passed else None)
