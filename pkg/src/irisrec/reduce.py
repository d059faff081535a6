"""Kernel PCA on standardized feature vectors."""
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RankDeficientWarning

EIG_RTOL = 1e-10


def rbf_kernel(a, b, gamma):
    sq = (np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * a @ b.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def linear_kernel(a, b):
    return a @ b.T


def polynomial_kernel(a, b, degree=3, coef=1.0, gamma=1.0):
    return (gamma * (a @ b.T) + coef) ** degree


@dataclass
class KernelSpec:
    name: str = "rbf"
    gamma: float = None     # rbf / polynomial; rbf default 1 / n_features
    degree: int = 3
    coef: float = 1.0

    def __call__(self, a, b):
        if self.name == "rbf":
            return rbf_kernel(a, b, self.gamma)
        if self.name == "linear":
            return linear_kernel(a, b)
        if self.name == "polynomial":
            return polynomial_kernel(a, b, self.degree, self.coef, self.gamma or 1.0)
        raise ValueError(f"unknown kernel {self.name!r}")

    def to_dict(self):
        return {"name": self.name, "gamma": self.gamma, "degree": self.degree, "coef": self.coef}


@dataclass
class KpcaModel:
    kernel: KernelSpec
    mean: np.ndarray          # per-column standardization
    scale: np.ndarray         # std, 0 for constant columns
    train: np.ndarray         # standardized training rows
    eigenvalues: np.ndarray   # descending, > 0
    coef: np.ndarray          # (n, k), alpha_i / sqrt(lambda_i)
    k_col_mean: np.ndarray    # column means of the uncentered training kernel
    k_grand_mean: float

    @property
    def n_components(self):
        return self.eigenvalues.size

    def standardize(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.mean.size:
            raise DimensionMismatch(f"expected {self.mean.size} features, got {x.shape[1]}")
        safe = np.where(self.scale > 0, self.scale, 1.0)
        return np.where(self.scale > 0, (x - self.mean) / safe, 0.0)

    def transform(self, x):
        return kpca_transform(self, x)


def kpca_fit(x, k=100, kernel=None, standardize=True):
    """Fit kernel PCA keeping up to ``k`` components.

    Columns are z-scored over the training rows (constant columns become 0).
    Eigenpairs of the double-centred kernel with eigenvalue at or below
    ``1e-10 * lambda_1`` are dropped, and at most ``n - 1`` are kept; a
    ``RankDeficientWarning`` is issued when fewer than ``min(k, n - 1)``
    survive. Eigenvector signs are fixed so the largest-magnitude entry is
    positive.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least two rows")
    n = x.shape[0]
    kernel = kernel or KernelSpec()
    if kernel.name == "rbf" and kernel.gamma is None:
        kernel = KernelSpec("rbf", 1.0 / x.shape[1], kernel.degree, kernel.coef)
    if standardize:
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale > 1e-12 * np.maximum(np.abs(mean), 1.0), scale, 0.0)
    else:
        mean = np.zeros(x.shape[1])
        scale = np.ones(x.shape[1])
    model = KpcaModel(kernel, mean, scale, None, None, None, None, 0.0)
    z = model.standardize(x)
    kmat = kernel(z, z)
    col_mean = kmat.mean(axis=0)
    grand = float(col_mean.mean())
    kc = kmat - col_mean[None, :] - col_mean[:, None] + grand
    kc = 0.5 * (kc + kc.T)
    vals, vecs = np.linalg.eigh(kc)
    order = np.argsort(vals, kind="stable")[::-1]
    vals, vecs = vals[order], vecs[:, order]
    top = vals[0] if vals.size else 0.0
    target = min(k, n - 1)
    keep = np.nonzero(vals > max(EIG_RTOL * top, 0.0))[0] if top > 0 else np.array([], int)
    keep = keep[:target]
    if keep.size < target:
        warnings.warn(f"only {keep.size} of {target} kernel components have positive eigenvalues",
                      RankDeficientWarning, stacklevel=2)
    vals, vecs = vals[keep], vecs[:, keep]
    if vecs.size:
        pivot = np.argmax(np.abs(vecs), axis=0)
        signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
        vecs = vecs * np.where(signs == 0, 1.0, signs)
    # C order throughout so a reloaded model multiplies bit-identically
    model.train = np.ascontiguousarray(z)
    model.eigenvalues = np.ascontiguousarray(vals)
    model.coef = np.ascontiguousarray(vecs / np.sqrt(vals) if vals.size else vecs)
    model.k_col_mean = col_mean
    model.k_grand_mean = grand
    return model


def kpca_transform(model, x):
    """Project rows (or a single vector) onto the fitted components."""
    single = np.asarray(x).ndim == 1
    z = model.standardize(x)
    kx = model.kernel(z, model.train)
    kx = kx - model.k_col_mean[None, :] - kx.mean(axis=1, keepdims=True) + model.k_grand_mean
    out = kx @ model.coef
    return out[0] if single else out


def centered_kernel(model):
    kmat = model.kernel(model.train, model.train)
    return kmat - model.k_col_mean[None, :] - model.k_col_mean[:, None] + model.k_grand_mean
