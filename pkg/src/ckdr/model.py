"""The hypothesis class: spectral features, selection, and evaluation.

Every hypothesis is a linear function of spectral features

    c_{k,j}(x) = (1 / sqrt(m * lam_{k,j})) * sum_n K_k(x, x_n) [v_{k,j}]_n

anchored on the bundle sample (the unscaled-Gram eigenvalue is m times the
normalized one).  Discrete models sum w_{k,j} c_{k,j}(x) over a selected
index set; continuous-relaxation models weight every active pair by a
selection variable xi in [0, 1].  The transformed norm constraint is
sum w^2 / mu <= 1.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .kernels import KernelSpec, anchor_points, cross_gram

MODEL_FORMAT_VERSION = 1
NORM_TOL = 1e-8


def _pair_ok(bundle, k, j):
    return 0 <= k < bundle.p and 0 <= j < bundle.effective_ranks[k]


def _eval_points(spec, X, anchor):
    """Evaluation-point representation for one kernel.

    Precomputed kernels only know their matrix rows, so points must either
    be integer row indices already or coincide with the anchor sample (the
    S = U case), which maps to indices 0..m-1.
    """
    if spec.kind != "precomputed":
        return X
    X_arr = np.asarray(X)
    if X_arr.dtype.kind in "iu":
        return X_arr
    anchor = np.asarray(anchor)
    if X_arr.shape == anchor.shape and np.array_equal(X_arr, anchor):
        return np.arange(anchor.shape[0])
    raise ConfigError("precomputed kernels evaluate on anchor row indices only")


def c_feature(bundle, pair, x):
    """Evaluate one spectral feature at a single point."""
    k, j = int(pair[0]), int(pair[1])
    if not _pair_ok(bundle, k, j):
        raise ConfigError(f"pair ({k}, {j}) is outside the effective rank")
    spec = bundle.kernels[k]
    pts = _eval_points(spec, np.asarray([x]), bundle.anchor)
    kx = cross_gram(spec, pts, anchor_points(spec, bundle.anchor))
    lam = bundle.m * bundle.eigenvalues[k][j]
    return float((kx @ bundle.eigenvectors[k][:, j])[0] / np.sqrt(lam))


def c_features(bundle, pairs, X):
    """Feature matrix C[i, q] = c_{pairs[q]}(X[i]); one cross-Gram per kernel."""
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    for k, j in pairs:
        if not _pair_ok(bundle, k, j):
            raise ConfigError(f"pair ({k}, {j}) is outside the effective rank")
    C = np.zeros((np.asarray(X).shape[0], pairs.shape[0]))
    for k in np.unique(pairs[:, 0]):
        spec = bundle.kernels[k]
        cols = np.nonzero(pairs[:, 0] == k)[0]
        pts = _eval_points(spec, X, bundle.anchor)
        kx = cross_gram(spec, pts, anchor_points(spec, bundle.anchor))
        V = bundle.eigenvectors[k][:, pairs[cols, 1]]
        lam = bundle.m * bundle.eigenvalues[k][pairs[cols, 1]]
        C[:, cols] = (kx @ V) / np.sqrt(lam)[None, :]
    return C


@dataclass(frozen=True)
class Model:
    """A trained hypothesis, self-contained for evaluation.

    The anchor sample and the selected eigenpairs are stored by value so a
    persisted model reproduces scores without the original bundle.  ``xi``
    is None for discrete selections.
    """

    kernels: tuple[KernelSpec, ...]
    mu: np.ndarray
    pairs: np.ndarray
    weights: np.ndarray
    lambda_bars: np.ndarray
    eigvecs: np.ndarray
    anchor: np.ndarray
    xi: np.ndarray | None = None
    bundle_hash: str = ""
    format_version: int = MODEL_FORMAT_VERSION
    extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("mu", "weights", "lambda_bars"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "pairs", np.asarray(self.pairs, dtype=int).reshape(-1, 2))
        object.__setattr__(self, "eigvecs", np.asarray(self.eigvecs, dtype=float))
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float))
        if self.xi is not None:
            object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float))
        n = self.pairs.shape[0]
        if not (self.weights.size == self.lambda_bars.size == n and self.eigvecs.shape == (self.anchor.shape[0], n)):
            raise DataError("inconsistent model arrays")

    @property
    def norm_value(self):
        """The transformed norm sum_q w_q^2 / mu_{k(q)}."""
        mus = self.mu[self.pairs[:, 0]]
        return float(np.sum(self.weights**2 / mus))


def evaluate(model, X):
    """Scores h(x) for a point or a batch of points.

    Models over precomputed kernels evaluate on integer row indices into
    their matrices (or on the anchor sample itself); all other models take
    coordinate vectors.
    """
    X_arr = np.asarray(X)
    precomp = any(s.kind == "precomputed" for s in model.kernels)
    if precomp and not all(s.kind == "precomputed" for s in model.kernels):
        raise ConfigError("cannot mix precomputed and functional kernels at evaluation time")
    if precomp and X_arr.dtype.kind in "iu":
        single = X_arr.ndim == 0
        pts = X_arr.reshape(-1)
    else:
        single = X_arr.ndim == 1
        pts = X_arr[None, :] if single else X_arr
    m = model.anchor.shape[0]
    C = np.zeros((pts.shape[0], model.pairs.shape[0]))
    for k in np.unique(model.pairs[:, 0]):
        spec = model.kernels[k]
        cols = np.nonzero(model.pairs[:, 0] == k)[0]
        kx = cross_gram(spec, _eval_points(spec, pts, model.anchor), anchor_points(spec, model.anchor))
        C[:, cols] = (kx @ model.eigvecs[:, cols]) / np.sqrt(m * model.lambda_bars[cols])[None, :]
    coef = model.weights if model.xi is None else model.xi * model.weights
    h = C @ coef
    return float(h[0]) if single else h


def predict(model, X):
    """Sign of the score; h = 0 maps to +1."""
    h = evaluate(model, X)
    if np.asarray(h).ndim == 0:
        return 1 if h >= 0.0 else -1
    return np.where(h >= 0.0, 1, -1)


def margin_loss(model, X, y, rho):
    """Fraction of points with classification margin y * h(x) below rho."""
    if not rho > 0:
        raise ConfigError("rho must be positive")
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise DataError("empty sample")
    h = np.atleast_1d(evaluate(model, X))
    return float(np.mean(y * h < rho))


# ---------------------------------------------------------------------------
# persistence


def save_model(model, path):
    payload = {
        "format_version": model.format_version,
        "bundle_hash": model.bundle_hash,
        "kernels": [_spec_to_dict(s) for s in model.kernels],
        "mu": model.mu.tolist(),
        "pairs": model.pairs.tolist(),
        "weights": model.weights.tolist(),
        "lambda_bars": model.lambda_bars.tolist(),
        "eigvecs": model.eigvecs.tolist(),
        "anchor": model.anchor.tolist(),
        "xi": None if model.xi is None else model.xi.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise DataError(f"unsupported model format version {payload.get('format_version')!r}")
    return Model(
        kernels=tuple(_spec_from_dict(d) for d in payload["kernels"]),
        mu=payload["mu"],
        pairs=payload["pairs"],
        weights=payload["weights"],
        lambda_bars=payload["lambda_bars"],
        eigvecs=payload["eigvecs"],
        anchor=payload["anchor"],
        xi=payload["xi"],
        bundle_hash=payload["bundle_hash"],
    )


def _spec_to_dict(spec):
    return {
        "kind": spec.kind,
        "degree": spec.degree,
        "bandwidth": spec.bandwidth,
        "coords": None if spec.coords is None else list(spec.coords),
        "normalize": spec.normalize,
        "scale": spec.scale,
        "matrix": None if spec.matrix is None else spec.matrix.tolist(),
    }


def _spec_from_dict(d):
    return KernelSpec(
        kind=d["kind"],
        degree=d["degree"],
        bandwidth=d["bandwidth"],
        coords=None if d["coords"] is None else tuple(d["coords"]),
        normalize=d["normalize"],
        scale=d["scale"],
        matrix=None if d["matrix"] is None else np.asarray(d["matrix"]),
    )
