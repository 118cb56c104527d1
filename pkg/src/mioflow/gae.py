"""Geodesic autoencoder: an encoder whose latent Euclidean distances are
trained to match the diffusion geodesic distance, plus an optional decoder
trained to reconstruct.

Each training iteration draws a fresh subsample, builds the diffusion
operator and the geodesic target on that batch alone, perturbs the network
inputs with Gaussian noise of scale ``noise_scale``, and takes one joint
optimizer step. The reconstruction loss compares the reconstruction of the
perturbed input against the clean input, so a nonzero noise scale trains the
autoencoder to denoise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .datasets import SnapshotDataset
from .geometry import (GeodesicParams, KernelSpec, as_point_cloud, build_kernel,
                       diffusion_geodesic, markov_normalize)
from .net import CHECKPOINT_VERSION, AdamW, MultilayerNet, net_from_dict, net_to_dict

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaeConfig:
    latent_dim: int = 8
    hidden_dims: tuple = (8,)
    activation: str = "relu"
    batch_size: int = 100
    noise_scale: float = 0.0
    iterations: int = 1000
    kernel: KernelSpec = field(default_factory=KernelSpec)
    geodesic: GeodesicParams = field(default_factory=GeodesicParams)
    learning_rate: float = 1e-3
    weight_decay: float = 0.01
    train_decoder: bool = True
    stratify_by_time: bool = False

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


class GeodesicAutoencoder:
    """Encoder (ambient -> latent) and optional mirrored decoder."""

    def __init__(self, encoder: MultilayerNet, decoder: MultilayerNet | None = None):
        if decoder is not None:
            if decoder.dims[0] != encoder.dims[-1] or decoder.dims[-1] != encoder.dims[0]:
                raise ValueError("decoder dims must mirror the encoder")
        self.encoder = encoder
        self.decoder = decoder

    @classmethod
    def initialize(cls, data_dim: int, config: GaeConfig, seed: int = 0):
        enc_dims = [data_dim, *config.hidden_dims, config.latent_dim]
        encoder = MultilayerNet(enc_dims, activation=config.activation, seed=seed)
        decoder = None
        if config.train_decoder:
            decoder = MultilayerNet(list(reversed(enc_dims)),
                                    activation=config.activation, seed=seed + 1)
        return cls(encoder, decoder)

    def encode(self, x) -> np.ndarray:
        return self.encoder.forward(np.asarray(x, dtype=np.float64))

    def decode(self, z) -> np.ndarray:
        if self.decoder is None:
            raise ValueError("this autoencoder has no decoder")
        return self.decoder.forward(np.asarray(z, dtype=np.float64))


def _latent_pairwise(z: np.ndarray):
    diff = z[:, None, :] - z[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    return dist, diff


def gae_distance_loss(model: GeodesicAutoencoder, batch, target: np.ndarray) -> float:
    """Mean squared mismatch between latent pairwise distances and the target
    distance matrix, scaled by 2/N over the strict upper triangle."""
    batch = as_point_cloud(batch)
    n = batch.shape[0]
    if n < 2:
        raise ValueError("distance loss needs at least two points")
    if target.shape != (n, n):
        raise ValueError("target distance matrix must match the batch")
    z = model.encode(batch)
    dist, _ = _latent_pairwise(z)
    iu = np.triu_indices(n, k=1)
    return float((2.0 / n) * ((dist[iu] - target[iu]) ** 2).sum())


def _distance_loss_value_and_zgrad(z: np.ndarray, target: np.ndarray):
    n = z.shape[0]
    dist, diff = _latent_pairwise(z)
    iu = np.triu_indices(n, k=1)
    loss = float((2.0 / n) * ((dist[iu] - target[iu]) ** 2).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(dist > 0, (4.0 / n) * (dist - target) / np.where(dist > 0, dist, 1.0), 0.0)
    np.fill_diagonal(w, 0.0)
    dz = (w[:, :, None] * diff).sum(axis=1)
    return loss, dz


def reconstruction_loss(model: GeodesicAutoencoder, batch) -> float:
    """Sum over points of the Euclidean reconstruction error."""
    batch = as_point_cloud(batch)
    if model.decoder is None:
        raise ValueError("reconstruction loss requires a decoder")
    recon = model.decode(model.encode(batch))
    return float(np.linalg.norm(recon - batch, axis=1).sum())


def _train_step(model, opt_enc, opt_dec, clean, noisy, target):
    """One joint update; returns (distance_loss, reconstruction_loss)."""
    z, enc_tape = model.encoder.forward(noisy, record=True)
    loss_d, dz = _distance_loss_value_and_zgrad(z, target)
    loss_r = 0.0
    dec_grads = None
    if model.decoder is not None:
        recon, dec_tape = model.decoder.forward(z, record=True)
        residual = recon - clean
        norms = np.linalg.norm(residual, axis=1)
        loss_r = float(norms.sum())
        d_recon = np.where(norms[:, None] > 0, residual / np.where(norms[:, None] > 0, norms[:, None], 1.0), 0.0)
        dec_grads, dz_rec = model.decoder.backward(dec_tape, d_recon)
        dz = dz + dz_rec
    enc_grads, _ = model.encoder.backward(enc_tape, dz)
    opt_enc.step(enc_grads)
    if dec_grads is not None:
        opt_dec.step(dec_grads)
    return loss_d, loss_r


def _batch_indices(rng, counts, batch_size, stratify):
    """Row indices into the pooled matrix for one training batch."""
    total = sum(counts)
    if batch_size > total:
        raise ValueError(f"batch_size {batch_size} exceeds dataset size {total}")
    if not stratify:
        return rng.choice(total, size=batch_size, replace=False)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    n_times = len(counts)
    base, extra = divmod(batch_size, n_times)
    idx = []
    for t, count in enumerate(counts):
        take = base + (1 if t < extra else 0)
        if take > count:
            raise ValueError(f"stratified batch needs {take} points at time index {t}, "
                             f"but only {count} are available")
        idx.append(offsets[t] + rng.choice(count, size=take, replace=False))
    return np.concatenate(idx)


def train_gae(data: SnapshotDataset, config: GaeConfig, seed: int = 0,
              batch_observer=None):
    """Train the geodesic autoencoder on pooled snapshots.

    Returns ``(model, log)`` where the log holds one record per iteration
    with the distance and reconstruction losses. The geodesic target is
    recomputed on every sampled batch from that batch's own kernel.
    """
    master = np.random.default_rng(seed)
    model = GeodesicAutoencoder.initialize(data.dim, config,
                                           seed=int(master.integers(2 ** 31)))
    pooled = np.concatenate(data.clouds, axis=0)
    counts = data.counts
    opt_enc = AdamW(model.encoder.params(), lr=config.learning_rate,
                    weight_decay=config.weight_decay)
    opt_dec = None
    if model.decoder is not None:
        opt_dec = AdamW(model.decoder.params(), lr=config.learning_rate,
                        weight_decay=config.weight_decay)
    log = []
    for it in range(config.iterations):
        idx = _batch_indices(master, counts, config.batch_size, config.stratify_by_time)
        clean = pooled[idx]
        if batch_observer is not None:
            batch_observer("gae", clean)
        operator = markov_normalize(build_kernel(clean, config.kernel))
        target = diffusion_geodesic(operator, config.geodesic)
        noisy = clean
        if config.noise_scale > 0:
            noisy = clean + config.noise_scale * master.standard_normal(clean.shape)
        loss_d, loss_r = _train_step(model, opt_enc, opt_dec, clean, noisy, target)
        log.append({"iteration": it, "distance_loss": loss_d, "reconstruction_loss": loss_r})
    return model, log


GAE_CHECKPOINT_KIND = "geodesic_autoencoder"


def gae_to_dict(model: GeodesicAutoencoder) -> dict:
    return {
        "format_version": CHECKPOINT_VERSION,
        "kind": GAE_CHECKPOINT_KIND,
        "encoder": net_to_dict(model.encoder),
        "decoder": net_to_dict(model.decoder) if model.decoder is not None else None,
    }


def gae_from_dict(data: dict) -> GeodesicAutoencoder:
    if data.get("kind") != GAE_CHECKPOINT_KIND:
        raise ValueError(f"not an autoencoder checkpoint: kind {data.get('kind')!r}")
    encoder = net_from_dict(data["encoder"])
    decoder = net_from_dict(data["decoder"]) if data.get("decoder") is not None else None
    return GeodesicAutoencoder(encoder, decoder)
