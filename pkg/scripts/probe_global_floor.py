"""What is the converged floor of the full-horizon objective?"""

import numpy as np

from mioflow.datasets import PetalSpec, gen_petal, make_holdout
from mioflow.ode import integrate
from mioflow.training import FlowTrainer, MioflowConfig
from mioflow.transport import emd

ds = gen_petal(PetalSpec(points_per_branch=50, seed=0))
split = make_holdout(ds, 2)

for hidden in ((16, 32, 16), (64, 64, 64)):
    cfg = MioflowConfig(n_local=0, n_global=150, batches_per_epoch=20, batch_size=200,
                        lambda_density=1.0, density_floor=0.15, sigma_init=0.1,
                        learning_rate=3e-3, max_grad_norm=5.0, lr_schedule="cosine",
                        hidden_dims=hidden, seed=0)
    tr = FlowTrainer(split.train, cfg)
    tr.start_phase(150)
    for e in range(150):
        s = tr.global_epoch()
        if e % 25 == 0 or e == 149:
            print(f"hidden={hidden} epoch {e}: l_m {np.mean([b.l_m for b in s]):.4f}",
                  flush=True)
    b = integrate(tr.field, split.train.clouds[0], [0, 1, 2], sde=tr.sde, seed=7)
    w1 = emd(b.states[:, 2], ds.snapshot(2), p=1)[0]
    print(f"hidden={hidden}: held W1 {w1:.4f} ratio {w1/0.2459:.3f}", flush=True)
