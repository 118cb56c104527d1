"""Snapshot datasets: synthetic generators, CSV ingestion, and holdout splits.

A snapshot dataset is an ordered collection of point clouds with integer
time labels on a unit-spaced model-time axis. The two generators are desk
surrogates for common differentiation geometries: ``gen_petal`` places
points on rose-curve lobes traversed from the center to the tips (so
trajectories bifurcate leaving the center and merge at each tip), and
``gen_bifurcation`` builds an asymmetric two-branch split embedded in a
higher-dimensional ambient space by a random orthonormal map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import as_point_cloud


class SnapshotDataset:
    """Ordered point clouds with integer time labels.

    Labels are strictly increasing and non-negative; generated datasets use
    0..T-1, while holdout splits keep the original labels so the removed
    time stays a valid integration target.
    """

    def __init__(self, times, clouds):
        times = [int(t) for t in times]
        if len(times) != len(clouds):
            raise ValueError("times and clouds must align")
        if len(times) < 2:
            raise ValueError("a snapshot dataset needs at least two timepoints")
        if any(t < 0 for t in times):
            raise ValueError("time labels must be non-negative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("time labels must be strictly increasing")
        clouds = [as_point_cloud(c) for c in clouds]
        dims = {c.shape[1] for c in clouds}
        if len(dims) != 1:
            raise ValueError(f"snapshots disagree on dimension: {sorted(dims)}")
        self.times = times
        self.clouds = clouds

    @property
    def dim(self) -> int:
        return self.clouds[0].shape[1]

    @property
    def n_snapshots(self) -> int:
        return len(self.times)

    @property
    def counts(self) -> list:
        return [c.shape[0] for c in self.clouds]

    def snapshot(self, time: int) -> np.ndarray:
        try:
            return self.clouds[self.times.index(int(time))]
        except ValueError:
            raise KeyError(f"no snapshot at time {time}; available: {self.times}") from None

    def with_clouds(self, clouds) -> "SnapshotDataset":
        return SnapshotDataset(self.times, clouds)

    def __eq__(self, other):
        if not isinstance(other, SnapshotDataset):
            return NotImplemented
        return self.times == other.times and all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.clouds, other.clouds)
        )


@dataclass(frozen=True)
class PetalSpec:
    n_lobes: int = 4
    points_per_branch: int = 25     # per timepoint, per lobe
    timepoints: int = 5
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_lobes < 2:
            raise ValueError("need at least two lobes")
        if self.timepoints < 2:
            raise ValueError("need at least two timepoints")
        if self.points_per_branch < 1:
            raise ValueError("points_per_branch must be positive")
        if self.noise < 0:
            raise ValueError("noise std must be non-negative")


def _petal_arc_table(n_lobes: int, resolution: int = 2048):
    """Polar angles of one petal side and the matching normalized arc lengths.

    One side of a lobe of r = sin(n_lobes * theta / 2) runs from the center
    (theta = 0) to the tip (theta = pi / n_lobes).
    """
    w = np.linspace(0.0, np.pi / n_lobes, resolution)
    r = np.sin(n_lobes * w / 2.0)
    x = r * np.cos(w)
    y = r * np.sin(w)
    seg = np.hypot(np.diff(x), np.diff(y))
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    return w, arc / arc[-1]


def gen_petal(spec: PetalSpec) -> SnapshotDataset:
    """Rose-curve lobe dataset: time bins sweep the arc from center to tip."""
    rng = np.random.default_rng(spec.seed)
    w_table, arc_table = _petal_arc_table(spec.n_lobes)
    lobe_span = 2.0 * np.pi / spec.n_lobes
    big_t = spec.timepoints
    clouds = []
    for t in range(big_t):
        points = []
        for lobe in range(spec.n_lobes):
            base = lobe * lobe_span
            fracs = rng.uniform(t / big_t, (t + 1) / big_t, size=spec.points_per_branch)
            sides = rng.integers(0, 2, size=spec.points_per_branch)
            w = np.interp(fracs, arc_table, w_table)
            theta = np.where(sides == 0, base + w, base + lobe_span - w)
            r = np.sin(spec.n_lobes * w / 2.0)
            points.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
        cloud = np.concatenate(points, axis=0)
        if spec.noise > 0:
            cloud = cloud + rng.normal(0.0, spec.noise, size=cloud.shape)
        clouds.append(cloud)
    return SnapshotDataset(list(range(big_t)), clouds)


@dataclass(frozen=True)
class BifurcationSpec:
    dim: int = 5
    counts: tuple = (140, 120, 100, 80, 60)
    asymmetry: float = 0.5      # 0 = mirror branches; > 0 flattens the lower one
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("ambient dimension must be at least 2")
        if len(self.counts) < 2 or any(c < 1 for c in self.counts):
            raise ValueError("counts must list at least two positive snapshot sizes")
        if not 0.0 <= self.asymmetry < 1.0:
            raise ValueError("asymmetry must lie in [0, 1)")
        if self.noise < 0:
            raise ValueError("noise std must be non-negative")


_SPLIT_FRACTION = 0.35
_STEM_LENGTH = 2.5
_BRANCH_CURVATURE = 2.8


def _bifurcation_latent(spec: BifurcationSpec):
    """2-D latent clouds: a stem splitting into two branches of unequal curvature."""
    rng = np.random.default_rng(spec.seed)
    big_t = len(spec.counts)
    clouds = []
    for t, count in enumerate(spec.counts):
        progress = (t + rng.uniform(0.0, 1.0, size=count)) / big_t
        branch = rng.integers(0, 2, size=count)  # 0 upper, 1 lower
        x = _STEM_LENGTH * progress
        excess = np.maximum(progress - _SPLIT_FRACTION, 0.0)
        curvature = np.where(branch == 0, _BRANCH_CURVATURE,
                             -(1.0 - spec.asymmetry) * _BRANCH_CURVATURE)
        y = curvature * excess ** 2
        cloud = np.column_stack([x, y])
        if spec.noise > 0:
            cloud = cloud + rng.normal(0.0, spec.noise, size=cloud.shape)
        clouds.append(cloud)
    return clouds


def _orthonormal_embedding(dim: int, seed: int) -> np.ndarray:
    """Seeded (dim, 2) matrix with orthonormal columns."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((dim, 2)))
    return q * np.sign(np.diag(r))


def gen_bifurcation(spec: BifurcationSpec) -> SnapshotDataset:
    """Asymmetric bifurcation with unequal per-time counts, isometrically
    embedded into ``spec.dim`` ambient dimensions."""
    latent = _bifurcation_latent(spec)
    basis = _orthonormal_embedding(spec.dim, spec.seed + 1)
    clouds = [cloud @ basis.T for cloud in latent]
    return SnapshotDataset(list(range(len(spec.counts))), clouds)


@dataclass
class HoldoutSplit:
    held_time: int
    train: SnapshotDataset
    truth: np.ndarray


def make_holdout(dataset: SnapshotDataset, held_time: int) -> HoldoutSplit:
    """Remove one interior snapshot, keeping the original time coordinates."""
    held_time = int(held_time)
    if held_time not in dataset.times:
        raise ValueError(f"no snapshot at time {held_time}; available: {dataset.times}")
    if held_time in (dataset.times[0], dataset.times[-1]):
        raise ValueError(f"held time must be interior, got boundary time {held_time}")
    keep = [i for i, t in enumerate(dataset.times) if t != held_time]
    train = SnapshotDataset([dataset.times[i] for i in keep],
                            [dataset.clouds[i] for i in keep])
    return HoldoutSplit(held_time=held_time, train=train,
                        truth=dataset.snapshot(held_time))


CSV_FLOAT_FORMAT = "%.17g"


def save_csv(dataset: SnapshotDataset, path) -> None:
    """Write ``t,x0,...,x{d-1}`` rows, floats at 17 significant digits."""
    d = dataset.dim
    header = "t," + ",".join(f"x{i}" for i in range(d))
    lines = [header]
    for t, cloud in zip(dataset.times, dataset.clouds):
        for row in cloud:
            lines.append(f"{t}," + ",".join(CSV_FLOAT_FORMAT % v for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_csv(path) -> SnapshotDataset:
    """Read a snapshot CSV; rows are grouped and ordered by the time column."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    lines = [ln for ln in lines if ln.strip() != ""]
    if not lines:
        raise ValueError(f"{path}: empty file (expected a header row)")
    header = [c.strip() for c in lines[0].split(",")]
    d = len(header) - 1
    expected = ["t"] + [f"x{i}" for i in range(d)]
    if d < 1 or header != expected:
        raise ValueError(f"{path}: line 1: bad header {lines[0]!r}; expected 't,x0,...,x{{d-1}}'")
    if len(lines) == 1:
        raise ValueError(f"{path}: no data rows")
    groups: dict[int, list] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != d + 1:
            raise ValueError(f"{path}: line {lineno}: expected {d + 1} columns, got {len(cells)}")
        try:
            t_val = float(cells[0])
            coords = [float(c) for c in cells[1:]]
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: non-numeric cell") from None
        if not t_val.is_integer() or t_val < 0:
            raise ValueError(f"{path}: line {lineno}: time label must be a non-negative integer")
        groups.setdefault(int(t_val), []).append(coords)
    times = sorted(groups)
    clouds = [np.asarray(groups[t], dtype=np.float64) for t in times]
    return SnapshotDataset(times, clouds)
