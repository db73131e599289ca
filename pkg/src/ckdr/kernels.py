"""Base kernel families and Gram-matrix construction.

Five kernel kinds are supported:

* ``linear``             K(x, y) = <x, y>
* ``polynomial``         K(x, y) = <x, y> ** degree    (homogeneous)
* ``gaussian``           K(x, y) = exp(-||x - y||^2 / bandwidth)
* ``coordinate-linear``  a linear kernel restricted to a coordinate subset
* ``precomputed``        a user-supplied PSD matrix indexed by sample position

Every kind carries a multiplicative ``scale`` so a kernel can be rescaled to
satisfy K(x, x) <= 1 on a given sample; see :func:`normalize_spec`.  All
functions here are pure and safe for concurrent use.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, DegenerateKernelError, NumericError

KINDS = ("linear", "polynomial", "gaussian", "coordinate-linear", "precomputed")

# PSD validation tolerance for precomputed matrices, relative to the top eigenvalue.
PSD_RTOL = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """One member of the base kernel family.

    ``coords`` holds 0-based column indices (the CLI config accepts 1-based
    indices and converts).  ``matrix`` is only set for the precomputed kind;
    its "points" are integer row indices into the matrix.
    """

    kind: str
    degree: int | None = None
    bandwidth: float | None = None
    coords: tuple[int, ...] | None = None
    normalize: bool = True
    scale: float = 1.0
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown kernel kind {self.kind!r}")
        allowed = {
            "linear": set(),
            "polynomial": {"degree"},
            "gaussian": {"bandwidth"},
            "coordinate-linear": {"coords"},
            "precomputed": {"matrix"},
        }[self.kind]
        for name in ("degree", "bandwidth", "coords", "matrix"):
            if getattr(self, name) is not None and name not in allowed:
                raise DataError(f"{self.kind} kernel does not take {name!r}")
        if self.kind == "polynomial":
            if self.degree is None or int(self.degree) < 1 or self.degree != int(self.degree):
                raise DataError("polynomial kernel requires integer degree >= 1")
        if self.kind == "gaussian":
            if self.bandwidth is None or not self.bandwidth > 0:
                raise DataError("gaussian kernel requires bandwidth > 0")
        if self.kind == "coordinate-linear":
            if not self.coords or len(set(self.coords)) != len(self.coords) or min(self.coords) < 0:
                raise DataError("coordinate-linear kernel requires a non-empty set of distinct coordinates")
        if not self.scale > 0:
            raise DataError("kernel scale must be positive")
        if self.kind == "precomputed":
            if self.matrix is None:
                raise DataError("precomputed kernel requires a matrix")
            M = np.asarray(self.matrix, dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise DataError("precomputed kernel matrix must be square")
            if not np.isfinite(M).all():
                raise DataError("precomputed kernel matrix has non-finite entries")
            if np.max(np.abs(M - M.T)) > 1e-8 * max(np.max(np.abs(M)), 1e-300):
                raise DataError("precomputed kernel matrix is not symmetric")
            M = 0.5 * (M + M.T)
            w = np.linalg.eigvalsh(M)
            if w[0] < -PSD_RTOL * max(w[-1], 0.0) - 1e-300:
                raise DataError(f"precomputed kernel matrix is not PSD (min eigenvalue {w[0]:.3e})")
            M.setflags(write=False)
            object.__setattr__(self, "matrix", M)


def _points(X, d=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DataError("points must form a 2-d array")
    if not np.isfinite(X).all():
        raise DataError("points contain non-finite values")
    if d is not None and X.shape[1] != d:
        raise DataError(f"dimension mismatch: expected {d}, got {X.shape[1]}")
    return X


def _indices(X, n):
    idx = np.asarray(X)
    if idx.dtype.kind == "f" and not np.all(idx == np.round(idx)):
        raise DataError("precomputed kernel points must be integer row indices")
    idx = idx.reshape(-1).astype(int)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DataError("precomputed kernel index out of range")
    return idx


def _restrict(spec, X):
    if max(spec.coords) >= X.shape[1]:
        raise DataError("coordinate-linear coords exceed data dimension")
    return X[:, list(spec.coords)]


def eval_kernel(spec, x, y):
    """Evaluate K(x, y) for a single pair of points.

    For the precomputed kind, ``x`` and ``y`` are row indices.  Raises
    DataError on dimension mismatch and NumericError on non-finite output.
    """
    if spec.kind == "precomputed":
        i = _indices(x, spec.matrix.shape[0])
        j = _indices(y, spec.matrix.shape[0])
        if i.size != 1 or j.size != 1:
            raise DataError("precomputed kernel points are single indices")
        return float(spec.scale * spec.matrix[i[0], j[0]])
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise DataError("dimension mismatch between the two points")
    if spec.kind == "linear":
        val = float(x @ y)
    elif spec.kind == "polynomial":
        val = float(x @ y) ** int(spec.degree)
    elif spec.kind == "gaussian":
        d = x - y
        val = float(np.exp(-(d @ d) / spec.bandwidth))
    else:  # coordinate-linear
        if max(spec.coords) >= x.size:
            raise DataError("coordinate-linear coords exceed data dimension")
        sel = list(spec.coords)
        val = float(x[sel] @ y[sel])
    val = spec.scale * val
    if not np.isfinite(val):
        raise NumericError("kernel evaluation produced a non-finite value")
    return val


def cross_gram(spec, X, Y):
    """Rectangular kernel matrix K[i, j] = K(X[i], Y[j])."""
    if spec.kind == "precomputed":
        i = _indices(X, spec.matrix.shape[0])
        j = _indices(Y, spec.matrix.shape[0])
        return spec.scale * spec.matrix[np.ix_(i, j)]
    X = _points(X)
    Y = _points(Y, d=X.shape[1])
    if spec.kind == "linear":
        K = X @ Y.T
    elif spec.kind == "polynomial":
        K = (X @ Y.T) ** int(spec.degree)
    elif spec.kind == "gaussian":
        sq = np.sum(X**2, axis=1)[:, None] + np.sum(Y**2, axis=1)[None, :] - 2.0 * (X @ Y.T)
        K = np.exp(-np.maximum(sq, 0.0) / spec.bandwidth)
    else:
        Xa, Ya = _restrict(spec, X), _restrict(spec, Y)
        K = Xa @ Ya.T
    K = spec.scale * K
    if not np.isfinite(K).all():
        raise NumericError("kernel evaluation produced non-finite values")
    return K


def gram(spec, X):
    """Unscaled sample kernel matrix [K]_ij = K(x_i, x_j).

    Symmetric by construction: the upper triangle is computed and mirrored.
    """
    K = cross_gram(spec, X, X)
    upper = np.triu(K)
    return upper + upper.T - np.diag(np.diag(K))


def normalized_gram(spec, X):
    """Normalized kernel matrix, the sample Gram divided by the sample size."""
    n = np.asarray(X).shape[0] if np.asarray(X).ndim > 0 else 1
    if n < 1:
        raise DataError("empty sample")
    return gram(spec, X) / n


def _raw_diagonal(spec, X):
    if spec.kind == "precomputed":
        i = _indices(X, spec.matrix.shape[0])
        return spec.scale * np.diag(spec.matrix)[i]
    X = _points(X)
    if spec.kind == "linear":
        d = np.sum(X**2, axis=1)
    elif spec.kind == "polynomial":
        d = np.sum(X**2, axis=1) ** int(spec.degree)
    elif spec.kind == "gaussian":
        d = np.ones(X.shape[0])
    else:
        d = np.sum(_restrict(spec, X) ** 2, axis=1)
    return spec.scale * d


def normalize_spec(spec, X):
    """Rescale a kernel so K(x_i, x_i) <= 1 holds on the given sample.

    The returned spec has scale divided by the largest diagonal value on X;
    a gaussian kernel is returned unchanged (its diagonal is already 1).
    """
    diag = _raw_diagonal(spec, X)
    top = float(np.max(diag)) if diag.size else 0.0
    if top <= 0.0:
        raise DegenerateKernelError("kernel diagonal is zero on the whole sample")
    if top == 1.0:
        return spec
    return replace(spec, scale=spec.scale / top)


def anchor_points(spec, X):
    """The argument actually passed to kernel routines for this spec.

    Precomputed kernels index by row position, so the points of a sample of
    size n are simply 0..n-1.
    """
    if spec.kind == "precomputed":
        n = np.asarray(X).shape[0]
        if spec.matrix.shape[0] != n:
            raise DataError(
                f"precomputed kernel matrix is {spec.matrix.shape[0]}x{spec.matrix.shape[0]} "
                f"but the sample has {n} points"
            )
        return np.arange(n)
    return X


def effective_specs(specs, X):
    """Apply :func:`normalize_spec` to every spec that asks for normalization."""
    return tuple(normalize_spec(s, anchor_points(s, X)) if s.normalize else s for s in specs)
