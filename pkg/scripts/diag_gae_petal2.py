"""GAE capacity/lr sweep: does the decoded latent midpoint reach the truth band?"""

import numpy as np

from mioflow.datasets import PetalSpec, gen_petal
from mioflow.gae import GaeConfig, train_gae
from mioflow.geometry import GeodesicParams, KernelSpec

ds = gen_petal(PetalSpec(seed=0))
truth_mid = np.linalg.norm(ds.snapshot(2), axis=1).mean()
print(f"truth t=2 radius {truth_mid:.3f}; ambient chord midpoint 0.554")

for hidden in [(8,), (64,), (64, 64)]:
    for lr in (1e-3, 3e-3):
        for iters in (2000,):
            cfg = GaeConfig(latent_dim=32, hidden_dims=hidden, activation="relu",
                            batch_size=100, iterations=iters,
                            kernel=KernelSpec(epsilon=0.1),
                            geodesic=GeodesicParams(alpha=0.49, max_scale=5),
                            learning_rate=lr)
            gae, log = train_gae(ds, cfg, seed=0)
            z1 = gae.encode(ds.snapshot(1))
            z3 = gae.encode(ds.snapshot(3))
            mid = gae.decode(0.5 * (z1[:80] + z3[:80]))
            radii = np.linalg.norm(mid, axis=1)
            print(f"hidden={hidden} lr={lr} iters={iters}: "
                  f"dist loss {log[-1]['distance_loss']:.3f} "
                  f"recon {log[-1]['reconstruction_loss']:.3f} "
                  f"midpoint radius {radii.mean():.3f}+-{radii.std():.3f}", flush=True)
