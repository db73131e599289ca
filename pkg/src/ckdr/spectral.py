"""Per-kernel eigenstructure and the union-spectrum machinery.

The normalized Gram matrix of each base kernel on a fixed anchor sample is
eigendecomposed once.  Because normalized-Gram eigenvalues coincide with
sample covariance eigenvalues, the spectrum of the weighted mixture operator
is the union multiset {mu_k * lam_{k,j}} over kernels k and eigenvalue ranks
j, and the rank-r projection selects its top r members.  This module exposes
that union spectrum, the Ky-Fan r-norm, eigengap plug-ins, and the
projected-sign-vector norm identity used throughout the bounds lab.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericError
from .kernels import KernelSpec, anchor_points, effective_specs, normalized_gram

# Values closer than TIE_RTOL (relative to the largest pooled value) are
# ordered purely by the (kernel, rank) tie-break so exact-arithmetic ties
# do not depend on last-ulp eigensolver noise.
TIE_RTOL = 1e-12

DEFAULT_RANK_TOL = 1e-10
GAP_FLOOR = 1e-12


def eigendecompose(matrix, rank_tol=DEFAULT_RANK_TOL):
    """Dense symmetric eigendecomposition with descending eigenvalues.

    Eigenvectors have the sign of their largest-magnitude coordinate made
    positive so repeated runs produce identical output.  The reconstruction
    V diag(w) V' reproduces the input to eigensolver accuracy; clamping of
    tiny negative Gram eigenvalues happens in :func:`build_bundle`.
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DataError("eigendecompose expects a square matrix")
    scale = max(float(np.max(np.abs(M))), 1e-300)
    if np.max(np.abs(M - M.T)) > 1e-10 * scale:
        raise NumericError("matrix is not symmetric within tolerance")
    try:
        w, V = np.linalg.eigh(0.5 * (M + M.T))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed to converge: {exc}") from None
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    # deterministic sign: largest-|coordinate| entry positive
    flips = V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])] < 0
    V[:, flips] *= -1.0
    return w, V


@dataclass(frozen=True, eq=False)
class SpectralBundle:
    """Eigenpairs of every kernel's normalized Gram on a shared anchor sample.

    Immutable after construction; all arrays are read-only.  ``kernels``
    holds the effective (possibly rescaled) specs actually decomposed.
    """

    kernels: tuple[KernelSpec, ...]
    anchor: np.ndarray
    eigenvalues: tuple[np.ndarray, ...]
    eigenvectors: tuple[np.ndarray, ...]
    effective_ranks: tuple[int, ...]
    rank_tol: float
    anchor_hash: str

    def __post_init__(self):
        # pooled within-rank spectrum, cached for the hot feasibility paths
        lam = [self.eigenvalues[k][: self.effective_ranks[k]] for k in range(len(self.kernels))]
        ks = [np.full(self.effective_ranks[k], k, dtype=int) for k in range(len(self.kernels))]
        js = [np.arange(self.effective_ranks[k]) for k in range(len(self.kernels))]
        object.__setattr__(self, "_pooled_lam", np.concatenate(lam) if lam else np.zeros(0))
        object.__setattr__(self, "_pooled_k", np.concatenate(ks) if ks else np.zeros(0, dtype=int))
        object.__setattr__(self, "_pooled_j", np.concatenate(js) if js else np.zeros(0, dtype=int))

    @property
    def p(self):
        return len(self.kernels)

    @property
    def m(self):
        return self.eigenvalues[0].size

    @property
    def total_rank(self):
        return int(sum(self.effective_ranks))


def anchor_hash(X):
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    h = hashlib.sha256()
    h.update(str(X.shape).encode())
    h.update(X.tobytes())
    return h.hexdigest()[:16]


def build_bundle(specs, X, rank_tol=DEFAULT_RANK_TOL):
    """Eigendecompose each kernel's normalized Gram on the anchor sample X.

    Kernels with ``normalize=True`` are rescaled on X first.  Eigenvalues
    below ``rank_tol`` times the leading one are treated as exact zeros when
    counting effective ranks.
    """
    if not specs:
        raise ConfigError("at least one kernel is required")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    specs = effective_specs(specs, X)
    evals, evecs, ranks = [], [], []
    for spec in specs:
        w, V = eigendecompose(normalized_gram(spec, anchor_points(spec, X)))
        top = max(float(w[0]), 0.0)
        if w[-1] < -1e-8 * max(top, 1e-300):
            raise NumericError(f"normalized Gram is not PSD (min eigenvalue {w[-1]:.3e})")
        w = np.maximum(w, 0.0)
        w.setflags(write=False)
        V.setflags(write=False)
        evals.append(w)
        evecs.append(V)
        ranks.append(int(np.sum(w > rank_tol * max(w[0], 1e-300))))
    anchor = X.copy()
    anchor.setflags(write=False)
    return SpectralBundle(
        kernels=specs,
        anchor=anchor,
        eigenvalues=tuple(evals),
        eigenvectors=tuple(evecs),
        effective_ranks=tuple(ranks),
        rank_tol=rank_tol,
        anchor_hash=anchor_hash(X),
    )


def _pooled(bundle, mu):
    """All (value, k, j) triples with j inside kernel k's effective rank."""
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or mu.size != bundle.p:
        raise ConfigError(f"weight vector must have length {bundle.p}")
    if np.any(mu < 0):
        raise ConfigError("mixture weights must be non-negative")
    ks = bundle._pooled_k
    return mu[ks] * bundle._pooled_lam, ks, bundle._pooled_j


def union_spectrum(bundle, mu):
    """Mixture spectrum {mu_k * lam_{k,j}} sorted descending.

    Returns (values, pairs) where pairs is an (n, 2) array of 0-based
    (kernel, rank) indices.  Values within TIE_RTOL of each other are
    ordered by (kernel, rank).
    """
    vals, ks, js = _pooled(bundle, mu)
    if vals.size == 0:
        return np.zeros(0), np.zeros((0, 2), dtype=int)
    tol = TIE_RTOL * max(float(np.max(vals)), 1e-300)
    # quantize to tie groups, then lexsort by (group, k, j)
    order = np.argsort(-vals, kind="stable")
    vals, ks, js = vals[order], ks[order], js[order]
    group = np.zeros(vals.size, dtype=int)
    for i in range(1, vals.size):
        group[i] = group[i - 1] + (vals[i - 1] - vals[i] > tol)
    order2 = np.lexsort((js, ks, group))
    return vals[order2], np.stack([ks[order2], js[order2]], axis=1)


def top_r_index_set(bundle, mu, r):
    """The r head pairs of the union spectrum (0-based (kernel, rank) rows)."""
    r = int(r)
    if r < 1:
        raise ConfigError("r must be at least 1")
    vals, pairs = union_spectrum(bundle, mu)
    if r > vals.size:
        raise ConfigError(f"r={r} exceeds the total effective rank {vals.size}")
    return pairs[:r]


def kyfan_r(bundle, mu, r):
    """Ky-Fan r-norm of the mixture operator: the sum of its r top eigenvalues."""
    r = int(r)
    if r < 1:
        raise ConfigError("r must be at least 1")
    vals, _, _ = _pooled(bundle, mu)
    if r > vals.size:
        raise ConfigError(f"r={r} exceeds the total effective rank {vals.size}")
    if r == vals.size:
        return float(vals.sum())
    return float(np.partition(vals, vals.size - r)[vals.size - r :].sum())


@dataclass(frozen=True)
class Eigengap:
    """Plug-in eigengap; ``flagged`` marks a gap below the positivity floor."""

    value: float
    flagged: bool


def eigengap_plugin(bundle, r):
    """min_k (lam_{k,r} - lam_{k,r+1}) from the empirical spectra.

    Spectra are padded with zeros beyond the stored eigenvalues.  Returns a
    flagged zero instead of raising when the gap degenerates.
    """
    r = int(r)
    if r < 1:
        raise ConfigError("r must be at least 1")
    gaps = []
    for w in bundle.eigenvalues:
        lam_r = w[r - 1] if r - 1 < w.size else 0.0
        lam_r1 = w[r] if r < w.size else 0.0
        gaps.append(float(lam_r - lam_r1))
    g = min(gaps)
    g = max(g, 0.0)
    if g < GAP_FLOOR:
        return Eigengap(0.0, True)
    return Eigengap(g, False)


def projected_sigma_norm(bundle, mu, r, sigma):
    """|| P_r sum_n sigma_n Phi(x_n) || via the index-set identity.

    Equals sqrt(m * sum_{(k,j) in I} mu_k lam_{k,j} (v_{k,j}' sigma)^2) where
    I is the top-r index set for mu.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (bundle.m,):
        raise DataError(f"sign vector must have length {bundle.m}")
    if not np.all(np.abs(sigma) == 1.0):
        raise DataError("sign vector entries must be +1 or -1")
    mu = np.asarray(mu, dtype=float)
    pairs = top_r_index_set(bundle, mu, r)
    total = 0.0
    for k, j in pairs:
        proj = float(bundle.eigenvectors[k][:, j] @ sigma)
        total += mu[k] * bundle.eigenvalues[k][j] * proj * proj
    return float(np.sqrt(bundle.m * total))


# ---------------------------------------------------------------------------
# bundle caching


def save_bundle(bundle, path):
    payload = {
        "format_version": 1,
        "rank_tol": bundle.rank_tol,
        "anchor_hash": bundle.anchor_hash,
        "effective_ranks": list(bundle.effective_ranks),
        "eigenvalues": [w.tolist() for w in bundle.eigenvalues],
        "eigenvectors": [V.tolist() for V in bundle.eigenvectors],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_bundle(path, specs, X):
    """Load cached eigenpairs, verifying they match the given anchor sample."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if payload["anchor_hash"] != anchor_hash(X):
        raise DataError("cached bundle does not match the anchor sample")
    specs = effective_specs(specs, X)
    evals = tuple(np.asarray(w) for w in payload["eigenvalues"])
    evecs = tuple(np.asarray(V) for V in payload["eigenvectors"])
    if len(evals) != len(specs):
        raise DataError("cached bundle kernel count mismatch")
    for a in evals + evecs:
        a.setflags(write=False)
    anchor = X.copy()
    anchor.setflags(write=False)
    return SpectralBundle(
        kernels=specs,
        anchor=anchor,
        eigenvalues=evals,
        eigenvectors=evecs,
        effective_ranks=tuple(int(r) for r in payload["effective_ranks"]),
        rank_tol=float(payload["rank_tol"]),
        anchor_hash=payload["anchor_hash"],
    )
