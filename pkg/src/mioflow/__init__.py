"""Learning continuous stochastic population trajectories from static
snapshot samples: multiscale diffusion geodesics, a distance-matching
geodesic autoencoder, and transport-penalized neural ODE flows."""

from .datasets import (BifurcationSpec, HoldoutSplit, PetalSpec, SnapshotDataset,
                       gen_bifurcation, gen_petal, load_csv, make_holdout, save_csv)
from .evaluation import (MetricReport, ablation_suite, baseline_metric,
                         compute_metrics, evaluate_holdout)
from .gae import (GaeConfig, GeodesicAutoencoder, gae_distance_loss,
                  reconstruction_loss, train_gae)
from .geometry import (DiffusionOperator, GeodesicParams, KernelSpec, build_kernel,
                       diffusion_geodesic, markov_normalize)
from .net import AdamW, MultilayerNet
from .ode import (SdeParams, SolverConfig, TrajectoryBundle, VectorField,
                  integrate, integrate_with_gradients)
from .training import (FlowModel, FlowTrainer, LossBreakdown, MioflowConfig,
                       density_loss, energy_loss, marginal_loss, train_mioflow)
from .transport import (DiscreteDistribution, TransportPlan, emd, emd_gradient,
                        mmd_gaussian, mmd_mean, one_nn_distance)

__version__ = "0.1.0"
