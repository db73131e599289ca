"""Feasible sets for the mixture weights and the concentration constant.

The training feasible set is

    M = { mu : kyfan_r(mu) <= lambda_r,  ||mu||_1 <= 1,
               sum_k 1/mu_k <= nu,  mu > 0 }

and its slack-expanded companion N replaces the Ky-Fan budget by
lambda_r + kappa(p, delta).  Since exact Euclidean projection onto M has no
closed form, :func:`project_to_M` runs Dykstra-style alternating projections
over the individual constraint sets; the contract is feasibility within 1e-8
slack, a fixed point on feasible input, and idempotence.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InfeasibleError
from .spectral import kyfan_r, union_spectrum

# Strict positivity floor; the nu-constraint forces mu_k >= 1/nu anyway.
MU_FLOOR = 1e-12
SLACK_TOL = 1e-8


@dataclass(frozen=True)
class ConstraintParams:
    """(r, lambda_r, nu, delta) defining the sets M and N."""

    r: int
    lambda_r: float
    nu: float
    delta: float

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise ConfigError("r must be an integer >= 1")
        if not self.lambda_r > 0:
            raise ConfigError("lambda_r must be positive")
        if not self.nu > 0:
            raise ConfigError("nu must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("delta must lie in (0, 1)")
        object.__setattr__(self, "r", int(self.r))


@dataclass(frozen=True)
class FeasibilityReport:
    """Per-constraint slacks; feasible iff all four constraints hold."""

    kyfan_ok: bool
    kyfan_slack: float
    l1_ok: bool
    l1_slack: float
    inv_ok: bool
    inv_slack: float
    pos_ok: bool
    min_mu: float
    feasible: bool


def kappa(p, delta):
    """Concentration constant kappa = 4 (1 + sqrt(log(2p/delta) / 2))."""
    if int(p) != p or p < 1:
        raise ConfigError("p must be an integer >= 1")
    if not 0.0 < delta < 1.0:
        raise ConfigError("delta must lie in (0, 1)")
    if 2 * p / delta <= 1.0:
        raise ConfigError("2p/delta must exceed 1")
    return 4.0 * (1.0 + math.sqrt(math.log(2.0 * p / delta) / 2.0))


def _check(mu, budget, params, bundle, tol):
    mu = np.asarray(mu, dtype=float)
    pos_ok = bool(np.all(mu > 0))
    min_mu = float(np.min(mu))
    kf = kyfan_r(bundle, np.maximum(mu, 0.0), params.r)
    kyfan_slack = budget - kf
    l1_slack = 1.0 - float(np.sum(np.abs(mu)))
    if pos_ok:
        inv_slack = params.nu - float(np.sum(1.0 / mu))
    else:
        inv_slack = -np.inf
    kyfan_ok = kyfan_slack >= -tol
    l1_ok = l1_slack >= -tol
    inv_ok = inv_slack >= -tol
    return FeasibilityReport(
        kyfan_ok=kyfan_ok,
        kyfan_slack=float(kyfan_slack),
        l1_ok=l1_ok,
        l1_slack=float(l1_slack),
        inv_ok=inv_ok,
        inv_slack=float(inv_slack),
        pos_ok=pos_ok,
        min_mu=min_mu,
        feasible=bool(kyfan_ok and l1_ok and inv_ok and pos_ok),
    )


def check_M(mu, params, bundle, tol=SLACK_TOL):
    """Feasibility of mu for M against the given bundle's spectra."""
    return _check(mu, params.lambda_r, params, bundle, tol)


def check_N(mu, params, bundle_s, tol=SLACK_TOL):
    """Feasibility for the expanded set N: Ky-Fan budget lambda_r + kappa."""
    budget = params.lambda_r + kappa(bundle_s.p, params.delta)
    return _check(mu, budget, params, bundle_s, tol)


# ---------------------------------------------------------------------------
# per-constraint projections


def _proj_l1(y):
    """Euclidean projection onto { x >= 0, sum x <= 1 } (Duchi et al. 2008)."""
    x = np.maximum(y, 0.0)
    s = x.sum()
    if s <= 1.0:
        return x
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, x.size + 1)
    rho = np.nonzero(u * idx > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(x - theta, 0.0)


def _cubic_root(y, theta):
    """Unique positive root of x^3 - y x^2 - theta = 0 for y > 0, theta > 0.

    Cardano after x = t + y/3: t^3 + p t + q with p = -y^2/3 and
    q = -2 y^3/27 - theta; the discriminant theta^2/4 + theta y^3/27 is
    positive, and the cancellation-prone cube-root argument is rewritten as
    (y^6/729) / A for stability.
    """
    half = y**3 / 27.0 + theta / 2.0
    disc = np.sqrt(theta * theta / 4.0 + theta * y**3 / 27.0)
    A = half + disc
    B = (y**6 / 729.0) / A
    return np.cbrt(A) + np.cbrt(B) + y / 3.0


def _proj_inv_sum(y, nu):
    """Euclidean projection onto { x > 0, sum 1/x <= nu }.

    KKT gives x_k^3 - y_k x_k^2 - theta = 0 per coordinate with a
    closed-form positive root; theta solves sum 1/x(theta) = nu by
    safeguarded Newton (the map is smooth and strictly decreasing).
    """
    y = np.maximum(y, MU_FLOOR)
    if np.sum(1.0 / y) <= nu:
        return y
    lo, hi = 0.0, 1.0
    while np.sum(1.0 / _cubic_root(y, hi)) > nu and hi < 1e12:
        hi *= 2.0
    theta = 0.5 * hi
    for _ in range(60):
        x = _cubic_root(y, theta)
        g = float(np.sum(1.0 / x)) - nu
        if abs(g) <= 1e-12 * nu:
            break
        if g > 0:
            lo = theta
        else:
            hi = theta
        # dx/dtheta = 1 / (x (3x - 2y)), positive since x > y > 0
        gp = -float(np.sum(1.0 / (x**3 * (3.0 * x - 2.0 * y))))
        step = theta - g / gp
        theta = step if lo < step < hi else 0.5 * (lo + hi)
    return _cubic_root(y, theta)


def _proj_kyfan(mu, bundle, r, budget):
    """Move to the Ky-Fan ball by cutting the active top-r halfspace."""
    mu = mu.copy()
    lam, ks = bundle._pooled_lam, bundle._pooled_k
    for _ in range(80):
        mu_pos = np.maximum(mu, 0.0)
        vals = mu_pos[ks] * lam
        if vals.size == r:
            top = np.arange(r)
        else:
            top = np.argpartition(vals, vals.size - r)[vals.size - r :]
        if float(vals[top].sum()) <= budget * (1.0 + 1e-14):
            return mu
        a = np.zeros(bundle.p)
        np.add.at(a, ks[top], lam[top])
        denom = float(a @ a)
        if denom <= 0.0:
            return mu
        mu = mu - ((float(a @ mu_pos) - budget) / denom) * a
    return mu


def _interior_candidate(params, p, bundle):
    """Scaled uniform point: the canonical witness that M is non-empty."""
    uniform = np.full(p, 1.0 / p)
    kf = kyfan_r(bundle, uniform, params.r)
    c = 1.0 if kf <= 0 else min(1.0, params.lambda_r / kf)
    return c * uniform


def project_to_M(mu, params, bundle, max_sweeps=150):
    """Approximately Euclidean-project mu onto M (Dykstra alternating scheme).

    Raises InfeasibleError when M is empty (nu < p^2 by AM-HM, or the scaled
    uniform candidate fails).  Already-feasible inputs are returned unchanged.
    """
    mu = np.asarray(mu, dtype=float).copy()
    p = bundle.p
    if mu.shape != (p,):
        raise ConfigError(f"weight vector must have length {p}")
    if params.nu < p * p * (1.0 - 1e-12):
        raise InfeasibleError(f"M is empty: nu={params.nu} < p^2={p * p}")
    cand = _interior_candidate(params, p, bundle)
    if not check_M(cand, params, bundle).feasible:
        raise InfeasibleError("M is empty: the scaled uniform candidate is infeasible")
    if check_M(mu, params, bundle, tol=0.0).feasible:
        return mu

    x = mu.copy()
    incs = [np.zeros(p) for _ in range(3)]
    for _ in range(max_sweeps):
        x_prev = x.copy()
        for i, proj in enumerate(
            (
                lambda v: np.maximum(_proj_l1(v), MU_FLOOR),
                lambda v: _proj_inv_sum(v, params.nu),
                lambda v: _proj_kyfan(v, bundle, params.r, params.lambda_r),
            )
        ):
            y = x + incs[i]
            x_new = proj(y)
            incs[i] = y - x_new
            x = x_new
        x = np.maximum(x, MU_FLOOR)
        if check_M(x, params, bundle, tol=1e-10).feasible:
            break
        if np.max(np.abs(x - x_prev)) < 1e-12:
            break
    if check_M(x, params, bundle, tol=1e-9).feasible:
        return x
    # convexity rescue: blend toward the feasible interior candidate
    lo, hi = 0.0, 1.0
    for _ in range(80):
        t = 0.5 * (lo + hi)
        z = (1.0 - t) * x + t * cand
        if check_M(z, params, bundle, tol=1e-9).feasible:
            hi = t
        else:
            lo = t
    z = (1.0 - hi) * x + hi * cand
    if not check_M(z, params, bundle).feasible:
        raise InfeasibleError("projection onto M did not reach feasibility")
    return z
