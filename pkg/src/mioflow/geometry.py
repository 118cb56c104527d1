"""Graph kernels, Markov diffusion operators, and the multiscale diffusion
geodesic distance.

The pipeline is: pairwise affinities (``build_kernel``), density-normalized
row-stochastic operator (``markov_normalize``), then a multiscale comparison
of random-walk transition rows (``diffusion_geodesic``). Everything is dense
float64; the intended inputs are subsamples of at most a few hundred points,
so no sparse path is provided.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

logger = logging.getLogger(__name__)

KERNEL_KINDS = ("gaussian", "alpha_decay")


def as_point_cloud(points) -> np.ndarray:
    """Validate and return an (n, d) float64 point cloud."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError(f"point cloud must be 2-D, got shape {pts.shape}")
    if pts.shape[0] < 1 or pts.shape[1] < 1:
        raise ValueError(f"point cloud needs at least one row and column, got {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError("point cloud contains non-finite entries")
    return pts


@dataclass(frozen=True)
class KernelSpec:
    """Affinity kernel choice.

    ``gaussian`` uses ``exp(-||x - y||^2 / epsilon)``. ``alpha_decay`` uses an
    adaptive local bandwidth (the distance to each point's ``knn``-th nearest
    neighbor) with a steep exponent, symmetrized by averaging the two one-sided
    affinities.
    """

    kind: str = "gaussian"
    epsilon: float = 0.1
    knn: int = 5
    decay: float = 40.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        if self.kind == "gaussian" and not self.epsilon > 0:
            raise ValueError(f"gaussian bandwidth must be positive, got {self.epsilon}")
        if self.kind == "alpha_decay":
            if self.knn < 1:
                raise ValueError(f"knn must be >= 1, got {self.knn}")
            if self.decay < 1:
                raise ValueError(f"decay exponent must be >= 1, got {self.decay}")


@dataclass(frozen=True)
class GeodesicParams:
    """Multiscale parameters: exponent ``alpha`` in (0, 1/2] and the number of
    doubling scales ``max_scale`` (the largest power used is 2**max_scale)."""

    alpha: float = 0.49
    max_scale: int = 5

    def __post_init__(self):
        if not 0.0 < self.alpha <= 0.5:
            raise ValueError(f"alpha must lie in (0, 0.5], got {self.alpha}")
        if self.max_scale < 0:
            raise ValueError(f"max_scale must be non-negative, got {self.max_scale}")


@dataclass
class DiffusionOperator:
    """Row-stochastic transition matrix ``p`` with its stationary distribution ``pi``."""

    p: np.ndarray
    pi: np.ndarray


def build_kernel(cloud, spec: KernelSpec) -> np.ndarray:
    """Pairwise affinity matrix for a point cloud.

    Returns a symmetric non-negative (n, n) matrix with unit diagonal.
    For ``alpha_decay``, a local bandwidth that collapses to zero (duplicate
    points) is replaced by the smallest positive pairwise distance.
    """
    pts = as_point_cloud(cloud)
    n = pts.shape[0]
    if spec.kind == "gaussian":
        sq = cdist(pts, pts, "sqeuclidean")
        return np.exp(-sq / spec.epsilon)

    if spec.knn >= n:
        raise ValueError(f"alpha_decay knn={spec.knn} must be smaller than the cloud size n={n}")
    dist = cdist(pts, pts, "euclidean")
    # Row-sorted distances put self (0) first; index knn is the knn-th neighbor.
    bandwidth = np.sort(dist, axis=1)[:, spec.knn].copy()
    if np.any(bandwidth <= 0):
        positive = dist[dist > 0]
        if positive.size == 0:
            raise ValueError("all points coincide; alpha_decay kernel is undefined")
        fallback = positive.min()
        collapsed = np.flatnonzero(bandwidth <= 0)
        logger.warning(
            "alpha_decay: %d local bandwidths collapsed to 0 (duplicate points); "
            "substituting smallest positive distance %.3g", collapsed.size, fallback,
        )
        bandwidth[collapsed] = fallback
    with np.errstate(over="ignore"):
        left = np.exp(-((dist / bandwidth[:, None]) ** spec.decay))
        right = np.exp(-((dist / bandwidth[None, :]) ** spec.decay))
    return 0.5 * (left + right)


def markov_normalize(kernel: np.ndarray) -> DiffusionOperator:
    """Density-normalize then row-normalize a symmetric affinity matrix.

    The kernel is first divided by its row sums on both sides (removing the
    sampling density), then divided by the row sums of the result to obtain a
    row-stochastic matrix. The stationary distribution is the normalized
    vector of intermediate row sums.
    """
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"kernel must be square, got shape {k.shape}")
    if not np.allclose(k, k.T, rtol=0, atol=1e-10):
        raise ValueError("kernel must be symmetric")
    if np.any(k < 0):
        raise ValueError("kernel must be non-negative")
    q = k.sum(axis=1)
    dead = np.flatnonzero(q <= 0)
    if dead.size:
        raise ValueError(f"kernel row {dead[0]} sums to zero (isolated point)")
    m = k / np.outer(q, q)
    d = m.sum(axis=1)
    p = m / d[:, None]
    pi = d / d.sum()
    return DiffusionOperator(p=p, pi=pi)


def _pairwise_l1(rows: np.ndarray) -> np.ndarray:
    return squareform(pdist(rows, "cityblock"))


def diffusion_geodesic(op: DiffusionOperator, params: GeodesicParams) -> np.ndarray:
    """Multiscale diffusion geodesic distance matrix.

    Sums, over scales k = 0..max_scale, the L1 distance between transition
    rows of the 2**k-step random walk, weighted by 2**(-(max_scale - k) *
    alpha), plus a stationary-distribution term weighted by
    2**(-(max_scale + 1) / 2). Walk powers are formed by repeated squaring.
    Output is symmetric with a zero diagonal and satisfies the triangle
    inequality (it is a weighted sum of L1 pseudometrics).
    """
    alpha, big_k = params.alpha, params.max_scale
    power = np.array(op.p, dtype=np.float64)
    g = np.zeros((power.shape[0], power.shape[0]))
    for k in range(big_k + 1):
        g += 2.0 ** (-(big_k - k) * alpha) * _pairwise_l1(power)
        if k < big_k:
            power = power @ power
    g += 2.0 ** (-(big_k + 1) / 2.0) * _pairwise_l1(op.pi[:, None])
    return g
