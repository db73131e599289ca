"""Slow explicit-feature reference implementations used only in tests.

For finite-dimensional kernels (linear, coordinate-linear, low-degree
homogeneous polynomial) the feature map is written out explicitly, so
covariance operators, rank-r eigenprojections, and sign-vector projection
norms can be computed directly and compared with the fast spectral paths.
The Rademacher expectation is computed exactly by enumerating all 2^m sign
vectors.  Gaussian kernels have no finite map and are excluded.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .constraints import check_M

MAX_FEATURE_DIM = 10_000


def _monomial_exponents(d, dim):
    return [e for e in itertools.product(range(d + 1), repeat=dim) if sum(e) == d]


@dataclass(frozen=True)
class ExplicitFeatureMap:
    """An explicit map x -> phi(x) with <phi(x), phi(y)> = K(x, y)."""

    spec: object
    dim: int

    def __post_init__(self):
        kind = self.spec.kind
        if kind not in ("linear", "coordinate-linear", "polynomial"):
            raise ConfigError(f"no finite explicit feature map for kernel kind {kind!r}")
        if kind == "polynomial":
            D = len(_monomial_exponents(int(self.spec.degree), self.dim))
        elif kind == "coordinate-linear":
            D = len(self.spec.coords)
        else:
            D = self.dim
        if D > MAX_FEATURE_DIM:
            raise ConfigError(f"explicit feature dimension {D} exceeds the guard {MAX_FEATURE_DIM}")
        object.__setattr__(self, "feature_dim", D)

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.dim:
            raise DataError(f"points of dimension {X.shape[1]} fed to a map over dimension {self.dim}")
        root_scale = math.sqrt(self.spec.scale)
        if self.spec.kind == "linear":
            return root_scale * X
        if self.spec.kind == "coordinate-linear":
            return root_scale * X[:, list(self.spec.coords)]
        deg = int(self.spec.degree)
        cols = []
        for expo in _monomial_exponents(deg, self.dim):
            coeff = math.sqrt(math.factorial(deg) / np.prod([math.factorial(e) for e in expo]))
            cols.append(coeff * np.prod(X ** np.asarray(expo)[None, :], axis=1))
        return root_scale * np.stack(cols, axis=1)


def explicit_covariance(fmap, X):
    """Empirical covariance (1/n) sum phi(x) phi(x)^T in explicit coordinates."""
    Phi = fmap(X)
    return Phi.T @ Phi / Phi.shape[0]


def _disjoint_supports(maps):
    seen = set()
    for fm in maps:
        coords = set(fm.spec.coords) if fm.spec.kind == "coordinate-linear" else set(range(fm.dim))
        if seen & coords:
            return False
        seen |= coords
    return True


def explicit_projection_norm(maps, mu, r, sigma, X):
    """Reference for the projected sign-vector norm via stacked features.

    The mixture operator is the direct sum of the per-kernel weighted
    covariances (block diagonal by construction, matching the orthogonal
    decomposition guaranteed by disjoint coordinate supports); its top-r
    eigenspace projects the stacked vector sum_n sigma_n phi(x_n).
    """
    if not _disjoint_supports(maps):
        raise ConfigError("explicit projection requires maps with disjoint feature supports")
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    X = np.asarray(X, dtype=float)
    blocks, stacked = [], []
    for k, fm in enumerate(maps):
        Phi = fm(X)
        blocks.append(mu[k] * (Phi.T @ Phi) / Phi.shape[0])
        stacked.append(math.sqrt(mu[k]) * Phi)
    dims = [b.shape[0] for b in blocks]
    D = sum(dims)
    C = np.zeros((D, D))
    off = 0
    for b, dd in zip(blocks, dims):
        C[off : off + dd, off : off + dd] = b
        off += dd
    w, V = np.linalg.eigh(C)
    order = np.argsort(w)[::-1][: int(r)]
    u = np.concatenate([Phi.T @ sigma for Phi in stacked])
    proj = V[:, order].T @ u
    return float(np.linalg.norm(proj))


def all_sign_vectors(m):
    """All 2^m sign vectors as an (m, 2^m) matrix of +-1 columns."""
    if m > 20:
        raise ConfigError("sign-vector enumeration capped at m = 20")
    bits = np.arange(2**m)[None, :] >> np.arange(m)[:, None]
    return np.where(bits & 1, 1.0, -1.0)


def _grid_over_M(params, bundle, steps):
    """Feasible grid candidates for the inner supremum when p <= 2."""
    p = bundle.p
    if p == 1:
        axis = np.linspace(1e-6, 1.0, steps)
        cands = axis[:, None]
    else:
        axis = np.linspace(1e-6, 1.0, steps)
        cands = np.stack(np.meshgrid(axis, axis), axis=-1).reshape(-1, 2)
    keep = [mu for mu in cands if check_M(mu, params, bundle, tol=1e-12).feasible]
    return np.asarray(keep)


def exhaustive_rademacher(bundle, params, grid_steps=60):
    """Exact empirical Rademacher complexity by enumerating all sign vectors.

    The per-sigma supremum is analytic for p = 1 (the dual-norm reduction
    over the top-r eigenvectors, valid when lambda_r is at most the top
    normalized eigenvalue) and a fine feasible grid over M for p = 2.
    """
    m = bundle.m
    if m > 12:
        raise ConfigError("exhaustive enumeration is limited to m <= 12")
    r = params.r
    if r > bundle.total_rank:
        raise ConfigError("r exceeds the total effective rank")
    S = all_sign_vectors(m)
    if bundle.p == 1 and params.lambda_r <= bundle.eigenvalues[0][0] * (1 + 1e-12):
        V = bundle.eigenvectors[0][:, : min(r, bundle.effective_ranks[0])]
        per = np.sqrt(params.lambda_r / m) * np.max(np.abs(V.T @ S), axis=0)
        return float(per.mean())
    if bundle.p > 2:
        raise ConfigError("grid enumeration supports p <= 2 only")
    cands = _grid_over_M(params, bundle, grid_steps)
    if cands.size == 0:
        raise ConfigError("no feasible grid point found; M may be empty")
    best = np.zeros(S.shape[1])
    for mu in cands:
        vals, pairs = _pair_arrays(bundle, mu)
        top = np.argsort(-vals, kind="stable")[:r]
        V = np.concatenate([[bundle.eigenvectors[k][:, j]] for k, j in pairs[top]], axis=0)
        per = np.sqrt(m * (vals[top][:, None] * (V @ S) ** 2).sum(axis=0)) / m
        best = np.maximum(best, per)
    return float(best.mean())


def _pair_arrays(bundle, mu):
    vals, pairs = [], []
    for k in range(bundle.p):
        rk = bundle.effective_ranks[k]
        for j in range(rk):
            vals.append(mu[k] * bundle.eigenvalues[k][j])
            pairs.append((k, j))
    return np.asarray(vals), np.asarray(pairs, dtype=int)
