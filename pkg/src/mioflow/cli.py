"""Command-line front end.

Subcommands: gen-data, train-gae, train, eval-holdout, trajectories.
Every command honors --seed and is reproducible byte-for-byte apart from
recorded runtimes. Values come from an optional --config JSON file with
command-line flags taking precedence. Exit codes: 0 success, 2 usage or
configuration problem, 1 runtime failure. MIOFLOW_LOG={error|info|debug}
controls logging verbosity on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import (ConfigError, bifurcation_spec_from_dict, gae_config_from_dict,
                     load_run_config, mioflow_config_from_dict, petal_spec_from_dict,
                     solver_from_dict)
from .datasets import gen_bifurcation, gen_petal, load_csv, save_csv
from .evaluation import (DEFAULT_MMD_SCALES, MetricReport, ablation_suite,
                         compute_metrics, evaluate_holdout)
from .gae import gae_from_dict, gae_to_dict, train_gae
from .ode import field_from_dict, field_to_dict, integrate
from .plots import trajectory_svg
from .training import train_mioflow

logger = logging.getLogger(__name__)

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    name = os.environ.get("MIOFLOW_LOG", "error").lower()
    if name not in _LOG_LEVELS:
        print(f"warning: unknown MIOFLOW_LOG level {name!r}; using 'error'", file=sys.stderr)
        name = "error"
    logging.basicConfig(stream=sys.stderr, level=_LOG_LEVELS[name],
                        format="%(levelname)s %(name)s: %(message)s")


def _write_json(path, data) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def _write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def _read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _parse_hidden_dims(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip() != "")
    except ValueError:
        raise ConfigError(f"bad hidden dims {text!r}; expected e.g. '16,32,16'") from None


def _section(run_config: dict | None, name: str) -> dict:
    return dict((run_config or {}).get(name, {}))


def _merge(base: dict, **overrides) -> dict:
    out = dict(base)
    for key, value in overrides.items():
        if value is not None:
            out[key] = value
    return out


def _gae_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("autoencoder")
    g.add_argument("--latent-dim", type=int)
    g.add_argument("--gae-hidden-dims", metavar="D0,D1,..")
    g.add_argument("--gae-activation", choices=("relu", "leakyrelu", "celu"))
    g.add_argument("--gae-batch-size", type=int)
    g.add_argument("--noise-scale", type=float)
    g.add_argument("--iters", type=int, help="autoencoder training iterations")
    g.add_argument("--kernel", choices=("gaussian", "alpha_decay"))
    g.add_argument("--epsilon", type=float, help="gaussian kernel bandwidth")
    g.add_argument("--knn", type=int, help="alpha-decay neighbor index")
    g.add_argument("--decay", type=float, help="alpha-decay exponent")
    g.add_argument("--alpha", type=float, help="geodesic scale exponent")
    g.add_argument("--max-scale", type=int, help="largest doubling scale")
    g.add_argument("--gae-lr", type=float)
    g.add_argument("--no-decoder", action="store_true")
    g.add_argument("--stratify-by-time", action="store_true")


def _gae_config_from_args(args, run_config):
    section = _section(run_config, "gae")
    kernel = _merge(section.get("kernel", {}), kind=args.kernel, epsilon=args.epsilon,
                    knn=args.knn, decay=args.decay)
    geodesic = _merge(section.get("geodesic", {}), alpha=args.alpha,
                      max_scale=args.max_scale)
    merged = _merge(section,
                    latent_dim=args.latent_dim,
                    hidden_dims=(_parse_hidden_dims(args.gae_hidden_dims)
                                 if args.gae_hidden_dims else None),
                    activation=args.gae_activation,
                    batch_size=args.gae_batch_size,
                    noise_scale=args.noise_scale,
                    iterations=args.iters,
                    learning_rate=args.gae_lr)
    merged["kernel"] = kernel
    merged["geodesic"] = geodesic
    if args.no_decoder:
        merged["train_decoder"] = False
    if args.stratify_by_time:
        merged["stratify_by_time"] = True
    return gae_config_from_dict(merged)


def _mioflow_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("flow training")
    g.add_argument("--n-local", type=int)
    g.add_argument("--n-global", type=int)
    g.add_argument("--batches-per-epoch", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--lambda-density", type=float)
    g.add_argument("--lambda-energy", type=float)
    g.add_argument("--density-floor", type=float)
    g.add_argument("--density-knn", type=int)
    g.add_argument("--no-density", action="store_true")
    g.add_argument("--lr", type=float)
    g.add_argument("--weight-decay", type=float)
    g.add_argument("--hidden-dims", metavar="D0,D1,..")
    g.add_argument("--activation", choices=("relu", "leakyrelu", "celu"))
    g.add_argument("--sigma-init", type=float)
    g.add_argument("--substeps", type=int)
    g.add_argument("--scheme", choices=("rk4", "euler_maruyama"))


def _mioflow_config_from_args(args, run_config, seed: int, use_gae: bool):
    section = _section(run_config, "mioflow")
    solver = _merge(section.get("solver", _section(run_config, "solver")),
                    substeps=args.substeps, scheme=args.scheme)
    merged = _merge(section,
                    n_local=args.n_local,
                    n_global=args.n_global,
                    batches_per_epoch=args.batches_per_epoch,
                    batch_size=args.batch_size,
                    lambda_density=args.lambda_density,
                    lambda_energy=args.lambda_energy,
                    density_floor=args.density_floor,
                    density_knn=args.density_knn,
                    learning_rate=args.lr,
                    weight_decay=args.weight_decay,
                    hidden_dims=(_parse_hidden_dims(args.hidden_dims)
                                 if args.hidden_dims else None),
                    activation=args.activation,
                    sigma_init=args.sigma_init)
    if args.no_density:
        merged["use_density"] = False
    merged["solver"] = solver
    merged["seed"] = seed
    merged["use_gae"] = use_gae
    return mioflow_config_from_dict(merged)


def _resolve_seed(args, run_config) -> int:
    if args.seed is not None:
        return args.seed
    return int((run_config or {}).get("seed", 0))


def cmd_gen_data(args) -> int:
    run_config = load_run_config(args.config) if args.config else None
    seed = _resolve_seed(args, run_config)
    ds_section = _section(run_config, "dataset")
    if args.generator == "petal":
        spec_dict = _merge(ds_section.get("petal", {}), n_lobes=args.n_lobes,
                           points_per_branch=args.points_per_branch,
                           timepoints=args.timepoints, noise=args.noise, seed=seed)
        dataset = gen_petal(petal_spec_from_dict(spec_dict))
    else:
        counts = None
        if args.counts:
            counts = tuple(int(c) for c in args.counts.split(","))
        spec_dict = _merge(ds_section.get("bifurcation", {}), dim=args.dim,
                           counts=counts, asymmetry=args.asymmetry,
                           noise=args.noise, seed=seed)
        dataset = gen_bifurcation(bifurcation_spec_from_dict(spec_dict))
    save_csv(dataset, args.output)
    print(f"wrote {args.output}: T={dataset.n_snapshots} d={dataset.dim} "
          f"counts={dataset.counts}")
    return 0


def cmd_train_gae(args) -> int:
    run_config = load_run_config(args.config) if args.config else None
    seed = _resolve_seed(args, run_config)
    config = _gae_config_from_args(args, run_config)
    dataset = load_csv(args.data)
    model, log = train_gae(dataset, config, seed=seed)
    _write_json(args.output, gae_to_dict(model))
    if args.log:
        _write_jsonl(args.log, log)
    final = log[-1]["distance_loss"] if log else float("nan")
    print(f"wrote {args.output}: {config.iterations} iterations, "
          f"final distance loss {final:.6g}")
    return 0


def cmd_train(args) -> int:
    run_config = load_run_config(args.config) if args.config else None
    seed = _resolve_seed(args, run_config)
    gae = None
    if args.gae:
        gae = gae_from_dict(_read_json(args.gae))
    config = _mioflow_config_from_args(args, run_config, seed, use_gae=gae is not None)
    dataset = load_csv(args.data)
    model, log = train_mioflow(dataset, config, gae=gae)
    _write_json(args.output, field_to_dict(model.field, model.sde))
    if args.log:
        _write_jsonl(args.log, log)
    final = log[-1]["total"] if log else float("nan")
    print(f"wrote {args.output}: {len(log)} steps, final loss {final:.6g}, "
          f"sigma {[round(s, 4) for s in model.sde.sigma.tolist()]}")
    return 0


def _strip_runtime(record) -> dict:
    return {k: v for k, v in record.items() if k != "runtime_seconds"}


def cmd_eval_holdout(args) -> int:
    run_config = load_run_config(args.config) if args.config else None
    seed = _resolve_seed(args, run_config)
    dataset = load_csv(args.data)
    metrics_section = _section(run_config, "metrics")
    mmd_scales = tuple(metrics_section.get("mmd_scales", DEFAULT_MMD_SCALES))
    gae_config = _gae_config_from_args(args, run_config) if args.use_gae or args.ablate else None
    mioflow_config = _mioflow_config_from_args(args, run_config, seed,
                                               use_gae=args.use_gae)

    if args.ablate:
        axes = {}
        for axis in args.ablate.split(","):
            axis = axis.strip()
            if axis == "gae":
                axes["gae"] = [True, False]
            elif axis == "density":
                axes["density"] = [True, False]
            elif axis == "kernel":
                axes["kernel"] = ["gaussian", "alpha_decay"]
            else:
                raise ConfigError(f"unknown ablation axis {axis!r}")
        report = ablation_suite(dataset, args.held_time, mioflow_config, gae_config,
                                axes, seed=seed, mmd_scales=mmd_scales, jobs=args.jobs)
    else:
        record, pred, truth = evaluate_holdout(
            dataset, args.held_time, mioflow_config, gae_config=gae_config,
            seed=seed, mmd_scales=mmd_scales, return_prediction=True)
        if args.export_dir:
            os.makedirs(args.export_dir, exist_ok=True)
            _export_points(os.path.join(args.export_dir, f"pred_t{args.held_time}.csv"),
                           args.held_time, pred)
            _export_points(os.path.join(args.export_dir, f"truth_t{args.held_time}.csv"),
                           args.held_time, truth)
        report = MetricReport(records=[record], config={"mmd_scales": list(mmd_scales)},
                              seed=seed)
    _write_json(args.output, json.loads(report.to_json()))
    print(report.format_table())
    return 0


def _export_points(path, time, points) -> None:
    from .datasets import CSV_FLOAT_FORMAT
    d = points.shape[1]
    lines = ["t," + ",".join(f"x{i}" for i in range(d))]
    for row in points:
        lines.append(f"{time}," + ",".join(CSV_FLOAT_FORMAT % v for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _load_projection(spec: str, dim: int) -> np.ndarray:
    if spec == "first2":
        proj = np.zeros((dim, 2))
        proj[0, 0] = 1.0
        proj[1, 1] = 1.0
        return proj
    matrix = np.loadtxt(spec, delimiter=",", ndmin=2)
    if matrix.shape != (dim, 2):
        raise ConfigError(f"projection matrix must be ({dim}, 2), got {matrix.shape}")
    return matrix


def cmd_trajectories(args) -> int:
    run_config = load_run_config(args.config) if args.config else None
    seed = _resolve_seed(args, run_config)
    dataset = load_csv(args.data)
    field, sde = field_from_dict(_read_json(args.model))
    gae = gae_from_dict(_read_json(args.gae)) if args.gae else None

    solver = solver_from_dict(_merge(_section(run_config, "solver"),
                                     substeps=args.substeps, scheme=args.scheme))
    x0 = dataset.clouds[0]
    if args.n_traj is not None:
        if args.n_traj < 1:
            raise ConfigError("--n-traj must be positive")
        take = min(args.n_traj, x0.shape[0])
        x0 = x0[np.random.default_rng(seed).choice(x0.shape[0], size=take, replace=False)]
    start = x0
    if gae is not None:
        start = gae.encode(x0)
    times = [float(t) for t in dataset.times]
    bundle = integrate(field, start, times, sde=sde, cfg=solver, seed=seed, dense=True)
    dense = bundle.dense_states
    if gae is not None:
        flat = dense.reshape(-1, dense.shape[2])
        dense = gae.decode(flat).reshape(dense.shape[0], dense.shape[1], -1)

    d = dense.shape[2]
    from .datasets import CSV_FLOAT_FORMAT
    lines = ["traj_id,t," + ",".join(f"x{i}" for i in range(d))]
    for traj_id in range(dense.shape[0]):
        for step, t in enumerate(bundle.dense_times):
            coords = ",".join(CSV_FLOAT_FORMAT % v for v in dense[traj_id, step])
            lines.append(f"{traj_id},{CSV_FLOAT_FORMAT % t},{coords}")
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {args.output}: {dense.shape[0]} trajectories x {dense.shape[1]} states")

    if args.svg:
        if d > 2:
            if not args.proj:
                raise ConfigError(
                    f"data dimension {d} > 2: pass --proj first2 or --proj MATRIX.csv "
                    f"(a {d}x2 projection)")
            proj = _load_projection(args.proj, d)
            paths2d = dense @ proj
            background = [(t, c @ proj) for t, c in zip(dataset.times, dataset.clouds)]
        else:
            paths2d = dense
            background = list(zip(dataset.times, dataset.clouds))
        svg = trajectory_svg(background, paths2d, bundle.dense_times)
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(svg + "\n")
        print(f"wrote {args.svg}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mioflow",
        description="Learn continuous stochastic population trajectories from "
                    "static snapshot samples.")
    parser.add_argument("--version", action="version", version=f"mioflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic snapshot dataset CSV")
    p.add_argument("generator", choices=("petal", "bifurcation"))
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--n-lobes", type=int)
    p.add_argument("--points-per-branch", type=int)
    p.add_argument("--timepoints", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--counts", metavar="N0,N1,..")
    p.add_argument("--asymmetry", type=float)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-gae", help="train the geodesic autoencoder")
    p.add_argument("--data", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--log")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    _gae_flags(p)
    p.set_defaults(func=cmd_train_gae)

    p = sub.add_parser("train", help="train the flow on a snapshot dataset")
    p.add_argument("--data", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--log")
    p.add_argument("--gae", help="autoencoder checkpoint; enables latent-space training")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    _mioflow_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-holdout", help="leave-one-out evaluation at a held time")
    p.add_argument("--data", required=True)
    p.add_argument("--held-time", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--export-dir", help="write predicted/truth point CSVs here")
    p.add_argument("--use-gae", action="store_true")
    p.add_argument("--ablate", metavar="AXIS[,AXIS..]",
                   help="comma list from: gae, kernel, density")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    _gae_flags(p)
    _mioflow_flags(p)
    p.set_defaults(func=cmd_eval_holdout)

    p = sub.add_parser("trajectories", help="export dense integrated paths (CSV, SVG)")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--gae")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--svg")
    p.add_argument("--n-traj", type=int)
    p.add_argument("--proj", help="'first2' or a CSV projection matrix path")
    p.add_argument("--substeps", type=int)
    p.add_argument("--scheme", choices=("rk4", "euler_maruyama"))
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_trajectories)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single CLI failure boundary
        logger.debug("unhandled failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
