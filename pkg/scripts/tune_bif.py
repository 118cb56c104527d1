"""Bifurcation surrogate: base recipe quality + GAE and density directions."""

import time

import numpy as np

from mioflow.datasets import BifurcationSpec, gen_bifurcation
from mioflow.evaluation import evaluate_holdout
from mioflow.gae import GaeConfig
from mioflow.geometry import GeodesicParams, KernelSpec
from mioflow.training import MioflowConfig

ds = gen_bifurcation(BifurcationSpec(seed=0))

GAE_BIF = GaeConfig(latent_dim=8, hidden_dims=(16,), activation="relu",
                    batch_size=100, iterations=1000,
                    kernel=KernelSpec(kind="gaussian", epsilon=0.5),
                    geodesic=GeodesicParams(alpha=0.49, max_scale=5))


def flow(**kw):
    base = dict(n_local=20, n_global=15, batches_per_epoch=20, batch_size=60,
                lambda_density=1.0, density_floor=0.15, density_knn=5,
                sigma_init=0.2, learning_rate=3e-3, max_grad_norm=5.0,
                lr_schedule="cosine", activation="celu")
    base.update(kw)
    return MioflowConfig(**base)


for name, m_cfg, g_cfg in [
    ("noGAE_density", flow(), None),
    ("GAE_density", flow(), GAE_BIF),
    ("GAE_nodensity", flow(use_density=False), GAE_BIF),
]:
    rows = []
    for seed in (0, 1, 2):
        t0 = time.time()
        rec = evaluate_holdout(ds, 2, m_cfg, gae_config=g_cfg, seed=seed)
        ratio = rec["w1"] / rec["baseline"]["w1"]
        rows.append((ratio, rec["one_nn_worst_quartile"]))
        print(f"{name} seed {seed}: w1 {rec['w1']:.4f} ratio {ratio:.3f} "
              f"1nn_wq {rec['one_nn_worst_quartile']:.4f} ({time.time()-t0:.0f}s)", flush=True)
    print(f"== {name}: ratios {[round(r,3) for r,_ in rows]} "
          f"wq {[round(w,4) for _,w in rows]}", flush=True)
