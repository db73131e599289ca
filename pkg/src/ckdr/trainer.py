"""Alternating minimization of the constrained training problem.

The objective is the average convex loss of h(x) = sum ξ_{k,j} w_{k,j}
c_{k,j}(x) subject to the transformed norm constraint sum w^2/mu <= 1 and
mu in M.  Each round updates the selection ξ (by mode), then the
coefficients w by projected gradient with backtracking, then the weights mu
by the closed-form inverse-sum minimizer projected back onto M.  Gradients
are always taken with ξ frozen; in coupled mode ξ follows the top-r index
set of mu and can flip only at round boundaries, which is logged.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import MU_FLOOR, check_M, project_to_M
from .errors import ConfigError, NumericError
from .model import Model, c_features
from .spectral import build_bundle, kyfan_r, top_r_index_set

LOSSES = ("hinge", "logistic")
MODES = ("coupled", "discrete-relaxed", "continuous-relaxed")


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "hinge"
    mode: str = "coupled"
    max_rounds: int = 50
    inner_iters: int = 100
    step: float = 1.0
    xi_step: float = 0.25
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not (self.step > 0 and self.xi_step > 0 and self.inner_iters >= 1):
            raise ConfigError("step sizes must be positive and inner_iters >= 1")


@dataclass(frozen=True)
class TrainRound:
    round: int
    objective: float
    kyfan: float
    l1: float
    inv_sum: float
    index_set: str
    xi_changed: bool
    w_accepted: bool
    mu_accepted: bool


@dataclass
class TrainTrace:
    initial_objective: float
    rounds: list = field(default_factory=list)
    stop_reason: str = ""

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("round,objective,kyfan,l1,inv_sum,index_set,xi_changed,w_accepted,mu_accepted\n")
            for r in self.rounds:
                fh.write(
                    f"{r.round},{r.objective!r},{r.kyfan!r},{r.l1!r},{r.inv_sum!r},"
                    f"{r.index_set},{int(r.xi_changed)},{int(r.w_accepted)},{int(r.mu_accepted)}\n"
                )


def loss_value(margins, loss):
    if loss == "hinge":
        return float(np.mean(np.maximum(0.0, 1.0 - margins)))
    return float(np.mean(np.logaddexp(0.0, -margins)))


def loss_grad_h(margins, y, loss):
    """d(mean loss)/dh as a vector over the sample."""
    m = margins.size
    if loss == "hinge":
        return np.where(margins < 1.0, -y, 0.0) / m
    return -y / (1.0 + np.exp(margins)) / m


def ellipsoid_project(w, mu_of_pair):
    """Exact projection onto sum w^2/mu <= 1: a rescale in z = w/sqrt(mu)."""
    s = math.sqrt(float(np.sum(w**2 / mu_of_pair)))
    return w / s if s > 1.0 else w.copy()


def w_step(feats, y, w0, mu_of_pair, loss, iters=100, step=1.0):
    """Projected gradient with backtracking on the convex w-subproblem.

    Minimizes the mean loss of feats @ w over the ellipsoid
    sum w^2 / mu <= 1; the objective is non-increasing across accepted
    iterates.  Returns (w, improved).
    """
    w = ellipsoid_project(np.asarray(w0, dtype=float), mu_of_pair)
    best = loss_value(y * (feats @ w), loss)
    improved = False
    for _ in range(iters):
        g = feats.T @ loss_grad_h(y * (feats @ w), y, loss)
        if np.linalg.norm(g) < 1e-15:
            break
        accepted = False
        while step > 1e-12:
            cand = ellipsoid_project(w - step * g, mu_of_pair)
            val = loss_value(y * (feats @ cand), loss)
            if np.isfinite(val) and val < best - 1e-15:
                w, best = cand, val
                accepted = improved = True
                step = min(step * 2.0, 1e6)
                break
            step *= 0.5
        if not accepted:
            if step <= 1e-12 and not np.isfinite(best):
                raise NumericError("loss stayed non-finite at the smallest step size")
            break
    return w, improved


def mu_raw_update(a):
    """Unconstrained minimizer of sum a_k/mu_k over the unit l1 ball: mu ~ sqrt(a)."""
    raw = np.sqrt(np.asarray(a, dtype=float))
    return np.maximum(raw / raw.sum(), MU_FLOOR)


def mu_step(a, mu_prev, params, bundle):
    """Loosen the w-ellipsoid for fixed w: project mu ~ sqrt(a) onto M.

    The candidate is accepted only when it does not tighten the constraint
    value sum_k a_k/mu_k, so an accepted step keeps the current w feasible
    and leaves the objective unchanged.  Returns (mu, accepted).
    """
    a = np.asarray(a, dtype=float)
    if not np.any(a > 0):
        return mu_prev, False
    cand = project_to_M(mu_raw_update(a), params, bundle)
    old = float(np.sum(a / np.maximum(mu_prev, MU_FLOOR)))
    new = float(np.sum(a / np.maximum(cand, MU_FLOOR)))
    if new <= old + 1e-12 and check_M(cand, params, bundle).feasible:
        return cand, True
    return mu_prev, False


def greedy_selection(scores, pairs, r):
    """Boolean mask of the r pairs with the largest scores, ties by (k, j)."""
    order = np.lexsort((pairs[:, 1], pairs[:, 0], -np.asarray(scores)))
    mask = np.zeros(pairs.shape[0], dtype=bool)
    mask[order[:r]] = True
    return mask


def capped_simplex_project(y, r):
    """Projection onto { 0 <= x <= 1, sum x = r } by bisection on the shift."""
    lo, hi = float(np.min(y)) - 1.0, float(np.max(y))
    for _ in range(80):
        tau = 0.5 * (lo + hi)
        if np.clip(y - tau, 0.0, 1.0).sum() > r:
            lo = tau
        else:
            hi = tau
    return np.clip(y - 0.5 * (lo + hi), 0.0, 1.0)


def _pair_key(pairs):
    return ";".join(f"{k}:{j}" for k, j in pairs)


def train(X, y, U, kernels, params, cfg, bundle=None):
    """Fit a model on the labeled sample with features anchored on U.

    Returns (Model, TrainTrace).  The trace records one row per round; the
    returned model is the best-objective iterate seen, which always passes
    the feasibility and norm checks.  A prebuilt bundle for (kernels, U) may
    be passed to skip the eigendecomposition.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if bundle is None:
        bundle = build_bundle(kernels, U)
    p = bundle.p
    r = params.r
    if r > bundle.total_rank:
        raise ConfigError(f"r={r} exceeds the total effective rank {bundle.total_rank}")
    if max(bundle.effective_ranks) < r:
        raise ConfigError("no kernel has rank at least r on the anchor sample")

    pairs = np.asarray(
        [(k, j) for k in range(p) for j in range(bundle.effective_ranks[k])], dtype=int
    )
    pos = {(k, j): q for q, (k, j) in enumerate(pairs)}
    n_active = pairs.shape[0]
    C = c_features(bundle, pairs, X)

    mu = project_to_M(np.full(p, 1.0 / p), params, bundle)
    w = np.zeros(n_active)
    continuous = cfg.mode == "continuous-relaxed"
    if continuous:
        xi = np.full(n_active, r / n_active)
        mask = None
    else:
        xi = None
        mask = np.zeros(n_active, dtype=bool)
        for k, j in top_r_index_set(bundle, mu, r):
            mask[pos[(k, j)]] = True

    def scores_of(w_vec, xi_vec, mask_vec):
        if continuous:
            return C @ (xi_vec * w_vec)
        return C[:, mask_vec] @ w_vec[mask_vec]

    def objective(w_vec, xi_vec, mask_vec):
        return loss_value(y * scores_of(w_vec, xi_vec, mask_vec), cfg.loss)

    mus_all = np.maximum(mu[pairs[:, 0]], MU_FLOOR)

    init_obj = objective(w, xi, mask)
    trace = TrainTrace(initial_objective=init_obj)
    best_state = (init_obj, w.copy(), mu.copy(), None if xi is None else xi.copy(),
                  None if mask is None else mask.copy())
    seen_sets = {}
    stall = 0
    prev_obj = init_obj

    for rnd in range(1, cfg.max_rounds + 1):
        # selection update
        xi_changed = False
        if cfg.mode == "coupled":
            new_mask = np.zeros(n_active, dtype=bool)
            for k, j in top_r_index_set(bundle, mu, r):
                new_mask[pos[(k, j)]] = True
            xi_changed = bool(np.any(new_mask != mask))
            mask = new_mask
        elif cfg.mode == "discrete-relaxed":
            g = C.T @ loss_grad_h(y * scores_of(w, xi, mask), y, cfg.loss)
            new_mask = greedy_selection(np.abs(g), pairs, r)
            xi_changed = bool(np.any(new_mask != mask))
            mask = new_mask
        else:
            h = scores_of(w, xi, mask)
            g_xi = (C.T @ loss_grad_h(y * h, y, cfg.loss)) * w
            eta = cfg.xi_step
            cur = loss_value(y * h, cfg.loss)
            old_top = _pair_key(pairs[np.argsort(-xi, kind="stable")[:r]])
            while eta > 1e-12:
                cand = capped_simplex_project(xi - eta * g_xi, r)
                if loss_value(y * (C @ (cand * w)), cfg.loss) <= cur:
                    xi = cand
                    break
                eta *= 0.5
            xi_changed = _pair_key(pairs[np.argsort(-xi, kind="stable")[:r]]) != old_top

        # coefficient update on the frozen selection
        if continuous:
            w, w_accepted = w_step(C * xi[None, :], y, w, mus_all, cfg.loss,
                                   iters=cfg.inner_iters, step=cfg.step)
        else:
            wa, w_accepted = w_step(C[:, mask], y, w[mask], mus_all[mask], cfg.loss,
                                    iters=cfg.inner_iters, step=cfg.step)
            w = w.copy()
            w[mask] = wa

        # weight update for the frozen w
        sel = np.ones(n_active, dtype=bool) if continuous else mask
        a = np.zeros(p)
        np.add.at(a, pairs[sel, 0], w[sel] ** 2)
        mu, mu_accepted = mu_step(a, mu, params, bundle)
        mus_all = np.maximum(mu[pairs[:, 0]], MU_FLOOR)

        obj = objective(w, xi, mask)
        idx = pairs[np.argsort(-xi, kind="stable")[:r]] if continuous else pairs[mask]
        key = _pair_key(idx)
        trace.rounds.append(
            TrainRound(
                round=rnd,
                objective=obj,
                kyfan=kyfan_r(bundle, mu, r),
                l1=float(np.sum(mu)),
                inv_sum=float(np.sum(1.0 / np.maximum(mu, MU_FLOOR))),
                index_set=key,
                xi_changed=xi_changed,
                w_accepted=w_accepted,
                mu_accepted=mu_accepted,
            )
        )
        if obj < best_state[0] - 1e-15:
            best_state = (obj, w.copy(), mu.copy(), None if xi is None else xi.copy(),
                          None if mask is None else mask.copy())
        if key in seen_sets and seen_sets[key] - obj <= cfg.tol and xi_changed:
            trace.stop_reason = "index-set cycle"
            break
        seen_sets[key] = min(seen_sets.get(key, math.inf), obj)
        stall = stall + 1 if prev_obj - obj < cfg.tol else 0
        prev_obj = obj
        if stall >= 3:
            trace.stop_reason = "converged"
            break
    if not trace.stop_reason:
        trace.stop_reason = "max rounds"

    _, w, mu, xi, mask = best_state
    if continuous:
        sel_pairs, sel_w, sel_xi = pairs, w, xi
    else:
        sel_pairs, sel_w, sel_xi = pairs[mask], w[mask], None
    lam = np.array([bundle.eigenvalues[k][j] for k, j in sel_pairs])
    V = (np.column_stack([bundle.eigenvectors[k][:, j] for k, j in sel_pairs])
         if len(sel_pairs) else np.zeros((bundle.m, 0)))
    mdl = Model(
        kernels=bundle.kernels,
        mu=mu,
        pairs=sel_pairs,
        weights=sel_w,
        lambda_bars=lam,
        eigvecs=V,
        anchor=bundle.anchor,
        xi=sel_xi,
        bundle_hash=bundle.anchor_hash,
    )
    if mdl.norm_value > 1.0 + 1e-8:
        raise NumericError("trained model violates the transformed norm constraint")
    if not check_M(mu, params, bundle).feasible:
        raise NumericError("trained model weights left the feasible set")
    return mdl, trace
