"""Round 3: cosine schedule; learning-rate levels; with/without autoencoder."""

import time

import numpy as np

from mioflow.datasets import PetalSpec, gen_petal
from mioflow.evaluation import evaluate_holdout
from mioflow.gae import GaeConfig
from mioflow.geometry import GeodesicParams, KernelSpec
from mioflow.training import MioflowConfig
from mioflow.transport import one_nn_distance

ds = gen_petal(PetalSpec(seed=0))

GAE_PETAL = GaeConfig(latent_dim=32, hidden_dims=(8,), activation="relu",
                      batch_size=100, iterations=1000,
                      kernel=KernelSpec(kind="gaussian", epsilon=0.1),
                      geodesic=GeodesicParams(alpha=0.49, max_scale=5))


def flow(**kw):
    base = dict(n_local=30, n_global=15, batch_size=60, lambda_density=1.0,
                density_floor=0.15, sigma_init=0.1, learning_rate=3e-3,
                max_grad_norm=5.0, lr_schedule="cosine")
    base.update(kw)
    return MioflowConfig(**base)


CONFIGS = {
    "F_cos3e-3": dict(m=flow(), g=None),
    "G_cos5e-3": dict(m=flow(learning_rate=5e-3), g=None),
    "H_cos3e-3_GAE": dict(m=flow(), g=GAE_PETAL),
    "I_cos1e-2": dict(m=flow(learning_rate=1e-2), g=None),
}

for name, cfg in CONFIGS.items():
    ratios = []
    for seed in (0, 1, 2):
        t0 = time.time()
        rec, pred, truth = evaluate_holdout(ds, 2, cfg["m"], gae_config=cfg["g"],
                                            seed=seed, return_prediction=True)
        ratio = rec["w1"] / rec["baseline"]["w1"]
        ratios.append(ratio)
        adhere = one_nn_distance(pred, truth, "mean")
        cover = one_nn_distance(truth, pred, "mean")
        print(f"{name} seed {seed}: w1 {rec['w1']:.4f} ratio {ratio:.3f} "
              f"adhere {adhere:.3f} cover {cover:.3f} ({time.time()-t0:.0f}s)", flush=True)
    ok = sum(r <= 0.7 for r in ratios)
    print(f"== {name}: ratios {[round(r,3) for r in ratios]} pass {ok}/3", flush=True)
