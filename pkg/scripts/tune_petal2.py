"""Round 2: energy weight and learning-rate combinations."""

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


def flow(**kw):
    base = dict(n_local=30, n_global=15, batch_size=60, lambda_density=1.0,
                density_floor=0.15, sigma_init=0.1, learning_rate=3e-3,
                max_grad_norm=5.0)
    base.update(kw)
    return MioflowConfig(**base)


CONFIGS = {
    "B_le001": dict(m=flow(lambda_energy=0.001), g=None),
    "B_le01": dict(m=flow(lambda_energy=0.01), g=None),
    "B_le1": dict(m=flow(lambda_energy=0.1), g=None),
    "C3_GAE_lr3e-3": dict(m=flow(), g=GAE_PETAL),
    "C3_GAE_lr3e-3_le001": dict(m=flow(lambda_energy=0.001), g=GAE_PETAL),
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
