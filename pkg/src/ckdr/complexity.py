"""The bounds lab: Monte-Carlo Rademacher estimation and bound calculators.

Implements the empirical side of the generalization analysis: a Monte-Carlo
estimator of the sample Rademacher complexity of the coupled hypothesis
class, calculators for the high-probability upper bound and the margin-based
generalization bound built on it, the rank-r lower-bound construction, the
Khintchine and Massart inequality checks, the eigengap tightness example,
the projection-concentration experiment, and the coupled-vs-standard
complexity-term comparison.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .constraints import ConstraintParams, kappa, project_to_M
from .data import Dataset
from .errors import ConfigError
from .kernels import KernelSpec, cross_gram
from .model import margin_loss
from .oracle import all_sign_vectors
from .spectral import eigengap_plugin, top_r_index_set

# Constant from the learning-kernels complexity bound used for the second term.
ETA0 = 23.0 / 22.0
KHINTCHINE_CONSTANT = 2.0 ** (-0.5)


# ---------------------------------------------------------------------------
# Monte-Carlo Rademacher estimation


@dataclass(frozen=True)
class RademacherEstimate:
    """Point estimate with standard error and supremum-method metadata.

    ``lower_estimate`` is True when the inner supremum over the weight set
    is only searched approximately (multistart candidates), so the reported
    value under-estimates the true complexity.  ``per_draw`` holds the raw
    per-draw values when requested (plotting only, never serialized).
    """

    estimate: float
    stderr: float
    n_draws: int
    method: str
    seed: int
    lower_estimate: bool
    per_draw: np.ndarray | None = None


def _sigma_matrix(m, n_draws, rng):
    return rng.integers(0, 2, size=(m, n_draws)) * 2.0 - 1.0


def _pair_arrays(bundle):
    lam, ks, cols = [], [], []
    for k in range(bundle.p):
        rk = bundle.effective_ranks[k]
        lam.append(bundle.eigenvalues[k][:rk])
        ks.append(np.full(rk, k, dtype=int))
        cols.append(bundle.eigenvectors[k][:, :rk])
    return np.concatenate(lam), np.concatenate(ks), np.concatenate(cols, axis=1)


def _candidate_starts(params, bundle, n_starts, rng):
    p = bundle.p
    starts = [project_to_M(np.full(p, 1.0 / p), params, bundle)]
    for k in range(p):
        v = np.full(p, 0.1 / max(p - 1, 1))
        v[k] = 0.9
        starts.append(project_to_M(v, params, bundle))
    while len(starts) < n_starts:
        v = rng.uniform(0.05, 1.0, size=p)
        v *= 0.9 / v.sum()
        starts.append(project_to_M(v, params, bundle))
    return starts


def _sup_value(bundle, params, mu, proj2, lam, ks):
    vals = mu[ks] * lam
    top = np.argsort(-vals, kind="stable")[: params.r]
    return float(np.sum(vals[top] * proj2[top]))


def _ascend(mu0, params, bundle, proj2, lam, ks, iters=8):
    """Projected gradient ascent on the piecewise-linear per-draw objective."""
    mu = mu0.copy()
    best = _sup_value(bundle, params, mu, proj2, lam, ks)
    step = 0.5
    for _ in range(iters):
        vals = mu[ks] * lam
        top = np.argsort(-vals, kind="stable")[: params.r]
        grad = np.zeros(bundle.p)
        np.add.at(grad, ks[top], lam[top] * proj2[top])
        gn = np.linalg.norm(grad)
        if gn <= 0:
            break
        accepted = False
        while step > 1e-3:
            cand = project_to_M(mu + step * grad / gn, params, bundle)
            val = _sup_value(bundle, params, cand, proj2, lam, ks)
            if val > best * (1 + 1e-12):
                mu, best = cand, val
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    return mu


def estimate_rademacher(bundle, params, n_draws, seed, starts=16, probe_draws=32,
                        exhaustive=False, keep_draws=False):
    """Monte-Carlo estimate of the sample Rademacher complexity.

    Each draw contributes (1/m) sup_{mu in M} ||P_r sum_n sigma_n Phi(x_n)||.
    For a single kernel with lambda_r below the top normalized eigenvalue the
    inner supremum is evaluated analytically through the dual-norm reduction,
    sqrt(lambda_r / m) * max_j |v_j' sigma|.  Otherwise multistart projected
    ascent is run on a set of probe draws to collect candidate weight vectors
    (and through them candidate index sets), every draw is scored against the
    whole candidate pool, and the result is flagged as a lower estimate.

    ``exhaustive=True`` replaces random draws by all 2^m sign vectors.
    """
    if params.r > bundle.total_rank:
        raise ConfigError("r exceeds the total effective rank")
    # feasibility gate; raises InfeasibleError when M is empty
    project_to_M(np.full(bundle.p, 1.0 / bundle.p), params, bundle)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    m = bundle.m
    if exhaustive:
        S = all_sign_vectors(m)
    else:
        S = _sigma_matrix(m, int(n_draws), rng)
    n = S.shape[1]

    analytic = bundle.p == 1 and params.lambda_r <= bundle.eigenvalues[0][0] * (1 + 1e-12)
    if analytic:
        if params.r > bundle.effective_ranks[0]:
            raise ConfigError("r exceeds the effective rank of the single kernel")
        V = bundle.eigenvectors[0][:, : params.r]
        per_draw = np.sqrt(params.lambda_r / m) * np.max(np.abs(V.T @ S), axis=0)
        method = "analytic-dual-norm"
        lower = False
    else:
        lam, ks, Vpool = _pair_arrays(bundle)
        pool = _candidate_starts(params, bundle, starts, rng)
        n_probe = min(probe_draws, n)
        proj2_all = (Vpool.T @ S[:, :n_probe]) ** 2
        for i in range(n_probe):
            pool.append(_ascend(pool[0], params, bundle, proj2_all[:, i], lam, ks))
        uniq = {}
        for mu in pool:
            uniq[tuple(np.round(mu, 9))] = mu
        per_draw = np.zeros(n)
        for mu in uniq.values():
            pairs = top_r_index_set(bundle, mu, params.r)
            w = np.array([mu[k] * bundle.eigenvalues[k][j] for k, j in pairs])
            V = np.column_stack([bundle.eigenvectors[k][:, j] for k, j in pairs])
            vals = np.sqrt(m * (w[:, None] * (V.T @ S) ** 2).sum(axis=0)) / m
            np.maximum(per_draw, vals, out=per_draw)
        method = "multistart-pool"
        lower = True

    est = float(per_draw.mean())
    stderr = float(per_draw.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    if exhaustive:
        stderr = 0.0
    return RademacherEstimate(
        estimate=est, stderr=stderr, n_draws=n, method=method, seed=seed,
        lower_estimate=lower, per_draw=per_draw if keep_draws else None,
    )


# ---------------------------------------------------------------------------
# bound calculators


@dataclass(frozen=True)
class BoundReport:
    """All terms of the complexity and generalization bounds for one setting."""

    p: int
    m: int
    r: int
    lambda_r: float
    nu: float
    delta: float
    kappa: float
    gap: float
    gap_is_plugin: bool
    gap_flagged: bool
    term1: float
    term2: float
    total: float
    precondition_ok: bool
    rho: float | None = None
    margin_loss: float | None = None
    confidence_term: float | None = None
    generalization_total: float | None = None
    lower_bound_value: float | None = None
    notes: tuple = ()


def complexity_bound(params, p, m, bundle=None, exact_gap=None):
    """High-probability upper bound on the sample Rademacher complexity.

    term1 = sqrt(2 (lambda_r + kappa) log(2 p m) / m) and
    term2 = 8 kappa nu sqrt(eta0 e ceil(log p)) / (gap sqrt(m)); the gap is
    the exact one when supplied and the empirical plug-in otherwise.  With a
    single kernel ceil(log p) = 0 zeroes term2 (flagged as degenerate rather
    than substituted away); a flagged zero gap reports term2 as +inf.
    """
    kap = kappa(p, params.delta)
    notes = []
    if exact_gap is not None:
        gap, plugin, flagged = float(exact_gap), False, not exact_gap > 0
    else:
        if bundle is None:
            raise ConfigError("complexity_bound needs a bundle or an exact gap")
        eg = eigengap_plugin(bundle, params.r)
        gap, plugin, flagged = eg.value, True, eg.flagged
    term1 = math.sqrt(2.0 * (params.lambda_r + kap) * math.log(2.0 * p * m) / m)
    ceil_log_p = math.ceil(math.log(p)) if p > 1 else 0
    if ceil_log_p == 0:
        term2 = 0.0
        notes.append("second term vanishes at p=1 (ceil(log p) = 0)")
    elif flagged:
        term2 = math.inf
        notes.append("eigengap flagged zero; second term reported as +inf")
    else:
        term2 = 8.0 * kap * params.nu * math.sqrt(ETA0 * math.e * ceil_log_p) / (gap * math.sqrt(m))
    precondition_ok = bool(gap > 0 and math.sqrt(m) > 2.0 * kap / gap)
    if not precondition_ok:
        notes.append("precondition sqrt(m) > 2 kappa / gap fails")
    return BoundReport(
        p=p,
        m=m,
        r=params.r,
        lambda_r=params.lambda_r,
        nu=params.nu,
        delta=params.delta,
        kappa=kap,
        gap=gap,
        gap_is_plugin=plugin,
        gap_flagged=flagged,
        term1=term1,
        term2=term2,
        total=term1 + term2,
        precondition_ok=precondition_ok,
        notes=tuple(notes),
    )


def generalization_bound(mdl, X, y, rho, params, p, m, bundle=None, exact_gap=None):
    """Margin-based generalization bound.

    Adds the empirical margin loss at rho, 2/rho times the complexity bound,
    and the confidence term 3 sqrt(log(4p/delta) / (2m)); the confidence
    argument is 4p/delta because the complexity bound itself only holds with
    high probability.
    """
    if not rho > 0:
        raise ConfigError("rho must be positive")
    base = complexity_bound(params, p, m, bundle=bundle, exact_gap=exact_gap)
    mloss = margin_loss(mdl, X, y, rho)
    conf = 3.0 * math.sqrt(math.log(4.0 * p / params.delta) / (2.0 * m))
    return replace(
        base,
        rho=float(rho),
        margin_loss=mloss,
        confidence_term=conf,
        generalization_total=mloss + (2.0 / rho) * base.total + conf,
    )


def lower_bound_value(lambda_r, m):
    """The lower-bound value sqrt(lambda_r / (2m))."""
    return math.sqrt(lambda_r / (2.0 * m))


def _hadamard(n):
    H = np.ones((1, 1))
    while H.shape[0] < n:
        H = np.block([[H, H], [H, -H]])
    return H


def lower_bound_construct(m, r, lambda_target):
    """Instance on which the complexity is provably at least sqrt(lambda/(2m)).

    Returns (dataset with U = S, linear kernel spec, params) where the data
    are rows of a rank-r matrix with distinct singular values, so the
    normalized Gram has exactly r distinct non-zero simple eigenvalues.  A
    power-of-two m uses orthonormal sign columns (equal row norms, maximal
    achievable top eigenvalue); otherwise a fixed orthonormal basis from a
    seeded QR factorization is used.
    """
    m, r = int(m), int(r)
    if not 1 <= r < m:
        raise ConfigError("need 1 <= r < m")
    if not lambda_target > 0:
        raise ConfigError("lambda_target must be positive")
    if m & (m - 1) == 0:
        Q = _hadamard(m)[:, :r] / math.sqrt(m)
    else:
        rng = np.random.default_rng(180451)
        Q, _ = np.linalg.qr(rng.standard_normal((m, r)))
    t = 0.5 ** np.arange(r)  # distinct singular values
    X = Q * t[None, :]
    spec = KernelSpec(kind="linear", normalize=True)
    row_max = float(np.max(np.sum(X**2, axis=1)))
    lam1 = t[0] ** 2 / (m * row_max)
    if lambda_target > lam1 * (1 + 1e-12):
        raise ConfigError(
            f"lambda_target={lambda_target} unreachable: top normalized eigenvalue is {lam1:.6g}"
        )
    y = np.where(np.arange(m) % 2 == 0, 1, -1)
    sum_lam = float(np.sum(t**2) / (m * row_max))
    nu = max(2.0, 2.0 * sum_lam / lambda_target)
    params = ConstraintParams(r=r, lambda_r=float(lambda_target), nu=nu, delta=0.05)
    return Dataset(X=X, y=y, U=X.copy()), spec, params


# ---------------------------------------------------------------------------
# inequality checks


def khintchine_check(v, n_draws, seed, exhaustive=False):
    """Estimate E|v' sigma| for a unit vector; compare against 2^(-1/2)."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise ConfigError("khintchine_check expects a unit vector")
    if exhaustive:
        S = all_sign_vectors(v.size)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        S = _sigma_matrix(v.size, int(n_draws), rng)
    vals = np.abs(v @ S)
    stderr = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 and not exhaustive else 0.0
    return float(vals.mean()), stderr


def massart_check(bundle, n_draws, seed, exhaustive=False):
    """Estimate E[max over eigenvectors and signs of s v' sigma] and its bound.

    The maximum runs over both signs of every within-rank eigenvector of the
    bundle, at most 2 p m unit vectors, so the Massart bound is
    sqrt(2 log(2 p m)).  Returns (estimate, stderr, bound).
    """
    _, _, Vpool = _pair_arrays(bundle)
    if exhaustive:
        S = all_sign_vectors(bundle.m)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        S = _sigma_matrix(bundle.m, int(n_draws), rng)
    vals = np.max(np.abs(Vpool.T @ S), axis=0)
    stderr = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 and not exhaustive else 0.0
    bound = math.sqrt(2.0 * math.log(2.0 * bundle.p * bundle.m))
    return float(vals.mean()), stderr, bound


def eigengap_tightness(eps):
    """The two sides of the projection-perturbation tightness example.

    For A = diag(1 + eps, 1) and B = diag(1, 1 + eps) the rank-1 projections
    land on orthogonal axes, so the projection difference has total size
    ||P(A)|| + ||P(B)|| = 2 (the sum of its singular values), while
    2 ||A - B|| / gap = 2 exactly for every eps.
    """
    if not eps > 0:
        raise ConfigError("eps must be positive")
    A = np.diag([1.0 + eps, 1.0])
    B = np.diag([1.0, 1.0 + eps])
    wa, Va = np.linalg.eigh(A)
    wb, Vb = np.linalg.eigh(B)
    Pa = np.outer(Va[:, -1], Va[:, -1])
    Pb = np.outer(Vb[:, -1], Vb[:, -1])
    lhs = float(np.linalg.norm(Pa - Pb, "nuc"))
    gap = float(wa[-1] - wa[-2])
    rhs = float(2.0 * np.linalg.norm(A - B, 2) / gap)
    return lhs, rhs


# ---------------------------------------------------------------------------
# concentration experiment


@dataclass(frozen=True)
class GaussianGenerator:
    """Centered Gaussian with a known diagonal second-moment matrix."""

    variances: tuple[float, ...]

    def __post_init__(self):
        v = tuple(float(x) for x in self.variances)
        if not v or any(x <= 0 for x in v):
            raise ConfigError("variances must be positive")
        object.__setattr__(self, "variances", v)

    @property
    def dim(self):
        return len(self.variances)

    def draw(self, rng, n):
        return rng.standard_normal((n, self.dim)) * np.sqrt(self.variances)


def _kernel_coords(spec, dim):
    if spec.kind == "linear":
        return list(range(dim))
    if spec.kind == "coordinate-linear":
        return list(spec.coords)
    raise ConfigError("the concentration experiment needs linear or coordinate-linear kernels")


def exact_gap(generator, kernels, r):
    """min_k (lam_r - lam_{r+1}) of the true per-kernel covariance operators."""
    gaps = []
    for spec in kernels:
        lam = spec.scale * np.sort(np.asarray(generator.variances)[_kernel_coords(spec, generator.dim)])[::-1]
        lam_r = lam[r - 1] if r - 1 < lam.size else 0.0
        lam_r1 = lam[r] if r < lam.size else 0.0
        gaps.append(float(lam_r - lam_r1))
    return min(gaps)


@dataclass(frozen=True)
class ConcentrationReport:
    m: int
    u: int
    trials: int
    r: int
    delta: float
    kappa: float
    gap: float
    bound: float
    mean_diff: float
    max_diff: float
    satisfaction_rate: float
    max_kyfan_drift: float
    drift_bound: float
    seed: int


def concentration_experiment(generator, kernels, r, m, u, trials, delta, seed, nu=None):
    """Empirical check of the projection-concentration inequality.

    Per trial, draws S of size m and U of size u from the generator, forms
    the weighted block-diagonal sample covariances at uniform weights, and
    compares the operator norm of the projection difference against
    8 kappa nu / (gap sqrt(m)) with the exact generator gap.  Also records
    the Ky-Fan drift |  ||C_U||_(r) - ||C_S||_(r) | against its bound kappa.
    """
    p = len(kernels)
    gap = exact_gap(generator, kernels, r)
    if gap < 1e-12:
        raise ConfigError("degenerate generator: zero eigengap at the requested rank")
    nu = float(nu) if nu is not None else float(p * p)
    kap = kappa(p, delta)
    bound = 8.0 * kap * nu / (gap * math.sqrt(m))
    mu = np.full(p, 1.0 / p)
    coords = [_kernel_coords(s, generator.dim) for s in kernels]
    dims = [len(c) for c in coords]
    D = sum(dims)
    offs = np.cumsum([0] + dims)

    def block_cov(X):
        C = np.zeros((D, D))
        for k, spec in enumerate(kernels):
            Xa = X[:, coords[k]]
            C[offs[k] : offs[k + 1], offs[k] : offs[k + 1]] = mu[k] * spec.scale * (Xa.T @ Xa) / X.shape[0]
        return C

    def top_proj(C):
        w, V = np.linalg.eigh(C)
        order = np.argsort(w)[::-1][:r]
        Vr = V[:, order]
        return Vr @ Vr.T, np.sort(w)[::-1]

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    diffs, drifts = np.zeros(trials), np.zeros(trials)
    for t in range(trials):
        XS = generator.draw(rng, m)
        XU = generator.draw(rng, u)
        PS, wS = top_proj(block_cov(XS))
        PU, wU = top_proj(block_cov(XU))
        diffs[t] = np.linalg.norm(PS - PU, 2)
        drifts[t] = abs(wU[:r].sum() - wS[:r].sum())
    return ConcentrationReport(
        m=m,
        u=u,
        trials=trials,
        r=r,
        delta=delta,
        kappa=kap,
        gap=gap,
        bound=bound,
        mean_diff=float(diffs.mean()),
        max_diff=float(diffs.max()),
        satisfaction_rate=float(np.mean(diffs <= bound)),
        max_kyfan_drift=float(drifts.max()),
        drift_bound=kap,
        seed=seed,
    )


def concentration_suite(generator, kernels, r, m_list, trials, delta, seed, u_factor=1):
    """Run the experiment across sample sizes and fit the log-log decay slope."""
    reports = [
        concentration_experiment(generator, kernels, r, m, u_factor * m, trials, delta, seed + i)
        for i, m in enumerate(m_list)
    ]
    xs = np.log([rep.m for rep in reports])
    ys = np.log([rep.mean_diff for rep in reports])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return reports, slope


# ---------------------------------------------------------------------------
# diagnostics


def compare_complexity_terms(bundle, r):
    """Coupled vs standard complexity terms over the unscaled spectra.

    coupled  = largest r-long sum of eigenvalues picked across every kernel,
    standard = largest full-trace sum from a single kernel.
    """
    r = int(r)
    pooled = np.concatenate([bundle.m * w for w in bundle.eigenvalues])
    if not 1 <= r <= pooled.size:
        raise ConfigError(f"r must lie in [1, {pooled.size}]")
    coupled = float(np.sort(pooled)[::-1][:r].sum())
    standard = float(max(bundle.m * w.sum() for w in bundle.eigenvalues))
    return coupled, standard


def independence_diagnostic(kernels, sample, eval_grid):
    """Surrogate score for sample linear independence of the base kernels.

    For each kernel, every spanning function K_k(x_i, .) is evaluated on the
    grid (extended to contain the sample) and regressed onto the span of the
    other kernels' functions; the score is the smallest relative residual.
    A score near 0 flags likely dependence.  This is a numerical surrogate,
    not a decision procedure.
    """
    sample = np.asarray(sample, dtype=float)
    grid = np.vstack([sample, np.asarray(eval_grid, dtype=float)])
    mats = [cross_gram(spec, grid, sample) for spec in kernels]
    scores = np.ones(len(kernels))
    for k in range(len(kernels)):
        others = [mats[l] for l in range(len(kernels)) if l != k]
        if not others:
            continue
        G = np.concatenate(others, axis=1)
        best = 1.0
        for col in mats[k].T:
            norm = np.linalg.norm(col)
            if norm < 1e-12:
                continue
            coef, *_ = np.linalg.lstsq(G, col, rcond=None)
            best = min(best, float(np.linalg.norm(col - G @ coef) / norm))
        scores[k] = best
    return scores
