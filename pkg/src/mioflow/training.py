"""Flow training: loss assembly and the local/global epoch schedule.

Local epochs supervise one-step-ahead predictions (integrate a batch from
time t to t+1 and compare against a batch at t+1); global epochs integrate a
batch from the first snapshot through the full horizon and supervise every
available time at once. Local epochs always run before global ones. Each
(batch, interval) pair takes its own optimizer step. Transport gradients use
the fixed-plan envelope: the plan is re-solved at every step, then held
constant while its squared-distance cost is differentiated with respect to
the predicted endpoints.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .datasets import SnapshotDataset
from .gae import GeodesicAutoencoder
from .net import AdamW
from .ode import SdeParams, SolverConfig, VectorField, integrate_with_gradients

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MioflowConfig:
    lambda_density: float = 5.0
    lambda_energy: float = 0.0
    density_floor: float = 0.01    # hinge threshold h
    density_knn: int = 5
    n_local: int = 0
    n_global: int = 0
    batches_per_epoch: int = 20
    batch_size: int = 60           # per timepoint
    use_gae: bool = False
    use_density: bool = True
    learning_rate: float = 1e-3
    lr_schedule: str = "cosine"    # "cosine" decays to 5% over the epoch budget
    weight_decay: float = 0.01
    max_grad_norm: float = 5.0     # global-norm clip; 0 disables
    hidden_dims: tuple = (16, 32, 16)
    activation: str = "leakyrelu"
    sigma_init: float = 0.1
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0

    def __post_init__(self):
        if self.lambda_density < 0 or self.lambda_energy < 0:
            raise ValueError("loss weights must be non-negative")
        if self.density_floor <= 0:
            raise ValueError("density_floor must be positive")
        if self.density_knn < 1:
            raise ValueError("density_knn must be at least 1")
        if min(self.n_local, self.n_global, self.batches_per_epoch) < 0:
            raise ValueError("epoch and batch counts must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")


@dataclass
class LossBreakdown:
    l_m: float
    l_e: float
    l_d: float

    @property
    def total(self) -> float:
        return self.l_m + self.l_e + self.l_d


@dataclass
class FlowModel:
    field: VectorField
    sde: SdeParams


def marginal_loss(pred_sets, data_sets) -> float:
    """Sum over supervised times of the squared 2-Wasserstein distance
    between predicted and observed batches."""
    from .transport import emd

    if len(pred_sets) != len(data_sets):
        raise ValueError("predicted and observed set lists must align")
    total = 0.0
    for pred, data in zip(pred_sets, data_sets):
        pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
        if pred.shape[0] < 1:
            raise ValueError("empty predicted set")
        _, plan = emd(pred, data, p=2)
        total += plan.cost
    return total


def _marginal_term(pred: np.ndarray, data: np.ndarray):
    """Squared-W2 value and its envelope gradient at the predicted points."""
    from .transport import emd, emd_gradient

    if pred.shape[0] < 1:
        raise ValueError("empty predicted set")
    _, plan = emd(pred, data, p=2)
    return plan.cost, emd_gradient(pred, data, plan)


def energy_loss(bundle, lambda_energy: float) -> float:
    """Energy penalty: the squared-speed integral averaged over trajectories."""
    if lambda_energy == 0.0:
        return 0.0
    return float(lambda_energy * bundle.energy.mean())


def density_loss(pred, data, k: int, floor: float, lambda_density: float) -> float:
    """Hinge penalty on each predicted point's k smallest distances to the
    data, averaged over the predicted points. The per-point average keeps the
    weight comparable to the (mean-normalized) marginal term across batch
    sizes."""
    value, _ = _density_term(np.atleast_2d(np.asarray(pred, dtype=np.float64)),
                             np.atleast_2d(np.asarray(data, dtype=np.float64)),
                             k, floor, lambda_density)
    return value


def _density_term(pred: np.ndarray, data: np.ndarray, k: int, floor: float,
                  lam: float):
    if data.shape[0] < k:
        raise ValueError(f"density loss needs at least k={k} data points, got {data.shape[0]}")
    if lam == 0.0:
        return 0.0, np.zeros_like(pred)
    n = pred.shape[0]
    dists = cdist(pred, data, "euclidean")
    nearest = np.argpartition(dists, k - 1, axis=1)[:, :k]
    rows = np.arange(n)[:, None]
    dk = dists[rows, nearest]
    active = dk > floor
    value = float(lam * np.maximum(dk - floor, 0.0).sum() / n)
    grad = np.zeros_like(pred)
    for i in range(n):
        for col, is_active in zip(nearest[i], active[i]):
            if is_active:
                grad[i] += (pred[i] - data[col]) / dists[i, col]
    return value, (lam / n) * grad


def _clip_global_norm(grads, max_norm: float) -> None:
    if max_norm <= 0:
        return
    total = np.sqrt(sum(float((g * g).sum()) for g in grads))
    if total > max_norm:
        scale = max_norm / total
        for g in grads:
            g *= scale


class FlowTrainer:
    """Owns the field, noise scales, optimizers, and the sampling state for
    one training run. Snapshots are encoded once up front when a geodesic
    autoencoder is supplied; all training then happens in latent coordinates.
    """

    def __init__(self, dataset: SnapshotDataset, config: MioflowConfig,
                 gae: GeodesicAutoencoder | None = None, batch_observer=None):
        if config.use_gae and gae is None:
            raise ValueError("use_gae is set but no trained autoencoder was supplied")
        self.config = config
        self.gae = gae if config.use_gae else None
        self.batch_observer = batch_observer
        self.times = [float(t) for t in dataset.times]
        if self.gae is not None:
            self.clouds = [self.gae.encode(c) for c in dataset.clouds]
        else:
            self.clouds = list(dataset.clouds)
        self.dim = self.clouds[0].shape[1]
        if any(c.shape[0] < config.batch_size for c in self.clouds):
            raise ValueError("batch_size exceeds the size of at least one snapshot")

        self.rng = np.random.default_rng(config.seed)
        self.field = VectorField(self.dim, hidden_dims=config.hidden_dims,
                                 activation=config.activation,
                                 seed=int(self.rng.integers(2 ** 31)))
        n_intervals = int(round(self.times[-1] - self.times[0]))
        self.sde = SdeParams(np.full(n_intervals, config.sigma_init), t0=self.times[0])
        self.opt_field = AdamW(self.field.net.params(), lr=config.learning_rate,
                               weight_decay=config.weight_decay)
        self.opt_sigma = AdamW([self.sde.sigma], lr=config.learning_rate, weight_decay=0.0)
        self._cursors = None
        self._orders = None
        self._phase_epoch = 0
        self._phase_budget = max(config.n_local, 1)

    @property
    def model(self) -> FlowModel:
        return FlowModel(field=self.field, sde=self.sde)

    def start_phase(self, n_epochs: int) -> None:
        """Begin a training phase; the cosine schedule restarts per phase."""
        self._phase_epoch = 0
        self._phase_budget = max(n_epochs, 1)

    def _start_epoch(self):
        self._orders = [self.rng.permutation(c.shape[0]) for c in self.clouds]
        self._cursors = [0] * len(self.clouds)
        lr = self.config.learning_rate
        if self.config.lr_schedule == "cosine":
            progress = min(self._phase_epoch / self._phase_budget, 1.0)
            floor = 0.05
            lr = lr * (floor + (1.0 - floor) * 0.5 * (1.0 + np.cos(np.pi * progress)))
        self.opt_field.lr = lr
        self.opt_sigma.lr = lr
        self._phase_epoch += 1

    def _next_batch(self, slot: int) -> np.ndarray:
        """Draw the next without-replacement batch at snapshot index ``slot``,
        reshuffling when the current pass is exhausted."""
        b = self.config.batch_size
        if self._cursors[slot] + b > self._orders[slot].size:
            self._orders[slot] = self.rng.permutation(self.clouds[slot].shape[0])
            self._cursors[slot] = 0
        idx = self._orders[slot][self._cursors[slot]:self._cursors[slot] + b]
        self._cursors[slot] += b
        batch = self.clouds[slot][idx]
        if self.batch_observer is not None:
            self.batch_observer(self.times[slot], batch)
        return batch

    def _effective_lambda_d(self) -> float:
        return self.config.lambda_density if self.config.use_density else 0.0

    def _loss_closure(self, data_batches, density_targets):
        """Build the bundle -> (loss, d_states, d_energy) closure for one step.

        ``data_batches`` and ``density_targets`` are aligned with the bundle's
        non-initial times; the breakdown of the most recent call is kept on
        the closure for logging.
        """
        cfg = self.config
        lam_d = self._effective_lambda_d()
        parts = {}

        def closure(bundle):
            batch = bundle.states.shape[0]
            d_states = np.zeros_like(bundle.states)
            l_m = 0.0
            l_d = 0.0
            for j, (data, dens) in enumerate(zip(data_batches, density_targets), start=1):
                pred = bundle.states[:, j]
                value, grad = _marginal_term(pred, data)
                l_m += value
                d_states[:, j] += grad
                if lam_d > 0:
                    dvalue, dgrad = _density_term(pred, dens, cfg.density_knn,
                                                  cfg.density_floor, lam_d)
                    l_d += dvalue
                    d_states[:, j] += dgrad
            l_e = cfg.lambda_energy * float(bundle.energy.mean())
            d_energy = np.full(batch, cfg.lambda_energy / batch)
            parts["breakdown"] = LossBreakdown(l_m=l_m, l_e=l_e, l_d=l_d)
            return l_m + l_e + l_d, d_states, d_energy

        closure.parts = parts
        return closure

    def _apply_step(self, x0, times, closure):
        seed = int(self.rng.integers(2 ** 63))
        _, _, grads, sigma_grad, _ = integrate_with_gradients(
            self.field, x0, times, self.sde, self.config.solver, closure, seed=seed)
        _clip_global_norm(grads, self.config.max_grad_norm)
        _clip_global_norm([sigma_grad], self.config.max_grad_norm)
        self.opt_field.step(grads)
        self.opt_sigma.step([sigma_grad])
        return closure.parts["breakdown"]

    def local_epoch(self) -> list:
        """One-step-ahead supervision: a gradient step per (batch, interval)."""
        self._start_epoch()
        series = []
        for _ in range(self.config.batches_per_epoch):
            for slot in range(len(self.times) - 1):
                x0 = self._next_batch(slot)
                target = self._next_batch(slot + 1)
                closure = self._loss_closure([target], [self.clouds[slot + 1]])
                series.append(self._apply_step(
                    x0, [self.times[slot], self.times[slot + 1]], closure))
        return series

    def global_epoch(self) -> list:
        """Full-horizon supervision from the first snapshot."""
        self._start_epoch()
        series = []
        n_times = len(self.times)
        for _ in range(self.config.batches_per_epoch):
            x0 = self._next_batch(0)
            targets = [self._next_batch(j) for j in range(1, n_times)]
            closure = self._loss_closure(targets, self.clouds[1:])
            series.append(self._apply_step(x0, self.times, closure))
        return series


def train_local_epoch(trainer: FlowTrainer) -> list:
    return trainer.local_epoch()


def train_global_epoch(trainer: FlowTrainer) -> list:
    return trainer.global_epoch()


def train_mioflow(dataset: SnapshotDataset, config: MioflowConfig,
                  gae: GeodesicAutoencoder | None = None, batch_observer=None):
    """Run the full schedule: ``n_local`` local epochs then ``n_global``
    global epochs. Returns ``(FlowModel, log)`` where the log holds one
    record per gradient step with the loss breakdown and the current noise
    scales."""
    trainer = FlowTrainer(dataset, config, gae=gae, batch_observer=batch_observer)
    log = []

    def extend(epoch, phase, series):
        for step, br in enumerate(series):
            log.append({
                "epoch": epoch, "phase": phase, "step": step,
                "l_m": br.l_m, "l_e": br.l_e, "l_d": br.l_d, "total": br.total,
                "sigma": trainer.sde.sigma.tolist(),
            })

    trainer.start_phase(config.n_local)
    for epoch in range(config.n_local):
        extend(epoch, "local", trainer.local_epoch())
    trainer.start_phase(config.n_global)
    for epoch in range(config.n_global):
        extend(epoch, "global", trainer.global_epoch())
    if log:
        logger.info("training finished: final total loss %.6g", log[-1]["total"])
    return trainer.model, log
