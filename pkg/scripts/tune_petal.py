"""Config matrix for the petal holdout target (ratio <= 0.7 on 2 of 3 seeds)."""

import time

from mioflow.datasets import PetalSpec, gen_petal
from mioflow.evaluation import evaluate_holdout
from mioflow.gae import GaeConfig
from mioflow.geometry import GeodesicParams, KernelSpec
from mioflow.training import MioflowConfig

ds = gen_petal(PetalSpec(seed=0))

GAE_PETAL = GaeConfig(latent_dim=32, hidden_dims=(8,), activation="relu",
                      batch_size=100, iterations=1000,
                      kernel=KernelSpec(kind="gaussian", epsilon=0.1),
                      geodesic=GeodesicParams(alpha=0.49, max_scale=5))

CONFIGS = {
    "A_noGAE_h15_lr1e-3_clip5": dict(
        m=MioflowConfig(n_local=30, n_global=15, batch_size=60, lambda_density=1.0,
                        density_floor=0.15, sigma_init=0.1, learning_rate=1e-3,
                        max_grad_norm=5.0),
        g=None),
    "B_noGAE_h15_lr3e-3_clip5": dict(
        m=MioflowConfig(n_local=30, n_global=15, batch_size=60, lambda_density=1.0,
                        density_floor=0.15, sigma_init=0.1, learning_rate=3e-3,
                        max_grad_norm=5.0),
        g=None),
    "C_GAE_h15": dict(
        m=MioflowConfig(n_local=30, n_global=15, batch_size=60, lambda_density=1.0,
                        density_floor=0.15, sigma_init=0.1, learning_rate=1e-3,
                        max_grad_norm=5.0),
        g=GAE_PETAL),
    "D_GAE_h50": dict(
        m=MioflowConfig(n_local=30, n_global=15, batch_size=60, lambda_density=1.0,
                        density_floor=0.5, sigma_init=0.1, learning_rate=1e-3,
                        max_grad_norm=5.0),
        g=GAE_PETAL),
    "E_noGAE_h15_lr1e-3_noclip": dict(
        m=MioflowConfig(n_local=30, n_global=15, batch_size=60, lambda_density=1.0,
                        density_floor=0.15, sigma_init=0.1, learning_rate=1e-3,
                        max_grad_norm=0.0),
        g=None),
}

for name, cfg in CONFIGS.items():
    ratios = []
    for seed in (0, 1, 2):
        t0 = time.time()
        rec = evaluate_holdout(ds, 2, cfg["m"], gae_config=cfg["g"], seed=seed)
        ratio = rec["w1"] / rec["baseline"]["w1"]
        ratios.append(ratio)
        print(f"{name} seed {seed}: w1 {rec['w1']:.4f} ratio {ratio:.3f} "
              f"({time.time()-t0:.0f}s)", flush=True)
    ok = sum(r <= 0.7 for r in ratios)
    print(f"== {name}: ratios {[round(r,3) for r in ratios]} pass {ok}/3", flush=True)
