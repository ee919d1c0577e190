"""Command line interface.

Four subcommands: train, eval, synth, cv. Data rows go to stdout,
diagnostics and progress lines to stderr. Exit codes: 0 on success, 2
for usage errors, 1 for runtime failures. All commands are
deterministic given their flags.
"""

import argparse
import os
import sys

import numpy as np

from .datasets import CircleSpec, generate_circle, load_libsvm, save_libsvm
from .gd import GdConfig, gd_train
from .losses import LossSpec
from .metrics import GridSpec, MetricsRow, MetricsTable, cross_validate, topk_accuracy
from .model import load_model, save_model
from .sdca import TrainConfig, sdca_train

__all__ = ["main", "LOSS_NAMES"]

# public loss names -> (family, forced k or None)
LOSS_NAMES = {
    "svm_ova": ("ova_hinge", None),
    "lr_ova": ("ova_logistic", None),
    "svm_multi": ("multi_hinge_topk_alpha", 1),
    "lr_multi": ("softmax_topk_entropy", 1),
    "topk_svm_a": ("multi_hinge_topk_alpha", None),
    "topk_svm_b": ("multi_hinge_topk_beta", None),
    "topk_svm_a_smooth": ("multi_hinge_topk_alpha_smooth", None),
    "topk_svm_b_smooth": ("multi_hinge_topk_beta_smooth", None),
    "topk_ent": ("softmax_topk_entropy", None),
    "topk_ent_trunc": ("truncated_topk_entropy", None),
}


class UsageError(Exception):
    pass


def _loss_spec(name, k, gamma):
    family, forced_k = LOSS_NAMES[name]
    if forced_k is not None:
        if k not in (None, forced_k):
            raise UsageError(f"--loss {name} implies k={forced_k}")
        k = forced_k
    k = 1 if k is None else k
    if k < 1:
        raise UsageError("--k must be >= 1")
    if name == "svm_ova" and gamma is not None:
        family = "ova_hinge_smooth"
    if gamma is not None and gamma <= 0:
        raise UsageError("--gamma must be positive")
    return LossSpec(family=family, k=k, gamma=gamma if gamma else 1.0)


def _resolve_lambda(args, n):
    if args.c is not None:
        if args.c <= 0:
            raise UsageError("--c must be positive")
        return 1.0 / (args.c * n)
    if args.lam <= 0:
        raise UsageError("--lambda must be positive")
    return args.lam


def _progress(line):
    print(line, file=sys.stderr)


def cmd_train(args):
    data = load_libsvm(args.data)
    spec = _loss_spec(args.loss, args.k, args.gamma)
    if not spec.ova and spec.k > data.m - 1:
        raise UsageError(f"--k {spec.k} out of range for m={data.m} classes")
    lam = _resolve_lambda(args, data.n)
    log = _progress if args.verbose else None

    if spec.family == "truncated_topk_entropy":
        if args.init:
            warm = load_model(args.init)
            if warm.d != data.d or warm.m != data.m:
                raise ValueError("--init model does not match the data dimensions")
        else:
            warm_cfg = TrainConfig(loss=LossSpec("softmax_topk_entropy", k=1),
                                   lam=lam, max_epochs=args.epochs,
                                   gap_tolerance=args.tol, seed=args.seed,
                                   log=log)
            warm, _ = sdca_train(data, warm_cfg)
        model, report = gd_train(data, spec, lam,
                                 GdConfig(init=warm, max_iters=args.epochs,
                                          log=log))
        final = (report.objective, float("nan"), float("nan"),
                 report.iterations)
    else:
        cfg = TrainConfig(loss=spec, lam=lam, max_epochs=args.epochs,
                          gap_tolerance=args.tol, seed=args.seed, log=log)
        model, report = sdca_train(data, cfg)
        final = (report.primal, report.dual, report.gap, report.epochs)
    save_model(model, args.out)
    print(f"P={final[0]:.17g} D={final[1]:.17g} gap={final[2]:.6g} "
          f"epochs={final[3]}")
    return 0


def cmd_eval(args):
    model = load_model(args.model)
    data = load_libsvm(args.data, num_features=model.d)
    if data.m > model.m:
        raise ValueError(f"data has {data.m} classes but the model only {model.m}")
    k_max = args.kmax
    if k_max > model.m:
        print(f"warning: --kmax {k_max} clipped to m={model.m}", file=sys.stderr)
        k_max = model.m
    accs = topk_accuracy(model, data, k_max)
    table = MetricsTable(k_max=k_max, n_eval=data.n)
    table.rows.append(MetricsRow(method=model.loss.family, c=float("nan"),
                                 lam=model.lam, k_target=0,
                                 accuracies=tuple(accs)))
    table.write_csv(sys.stdout)
    return 0


def cmd_synth(args):
    spec = CircleSpec(n_train=args.ntrain, n_val=args.nval,
                      n_test=args.ntest, seed=args.seed)
    os.makedirs(args.outdir, exist_ok=True)
    parts = generate_circle(spec)
    for name, ds in zip(("train", "val", "test"), parts):
        path = os.path.join(args.outdir, f"circle-{name}.libsvm")
        save_libsvm(ds, path)
        print(path)
    return 0


def cmd_cv(args):
    if (args.val is None) == (args.folds is None):
        raise UsageError("provide exactly one of --val or --folds")
    train_data = load_libsvm(args.data)
    val_data = (load_libsvm(args.val, num_features=train_data.d)
                if args.val else None)
    spec = _loss_spec(args.loss, args.k, args.gamma)
    if args.grid_lo > args.grid_hi:
        raise UsageError("--grid-lo must not exceed --grid-hi")
    if args.folds is not None and args.folds < 2:
        raise UsageError("--folds must be at least 2")
    cs = tuple(float(args.grid_base) ** e
               for e in range(args.grid_lo, args.grid_hi + 1))
    target_ks = tuple(int(t) for t in args.target_k.split(","))
    k_max = args.kmax or min(train_data.m, max(max(target_ks), 2))
    result = cross_validate(train_data, val_data, spec,
                            grid=GridSpec(c_values=cs), target_ks=target_ks,
                            k_max=k_max, seed=args.seed,
                            max_epochs=args.epochs, gap_tolerance=args.tol,
                            n_folds=args.folds)
    for k in target_ks:
        if result.boundary[k]:
            print(f"warning: top-{k} optimum C={result.selected[k][0]:g} "
                  "lies on the grid boundary; consider extending the grid",
                  file=sys.stderr)
    result.table.write_csv(sys.stdout)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="topklearn",
        description="Train and evaluate linear multiclass models under "
                    "top-k loss functions.")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train one model on a LibSVM file")
    tr.add_argument("--data", required=True)
    tr.add_argument("--loss", required=True, choices=sorted(LOSS_NAMES))
    tr.add_argument("--k", type=int, default=None)
    tr.add_argument("--gamma", type=float, default=None)
    group = tr.add_mutually_exclusive_group(required=True)
    group.add_argument("--c", type=float, default=None)
    group.add_argument("--lambda", dest="lam", type=float, default=None)
    tr.add_argument("--epochs", type=int, default=1000)
    tr.add_argument("--tol", type=float, default=1e-3)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out", required=True)
    tr.add_argument("--init", default=None,
                    help="warm-start model (truncated entropy only)")
    tr.add_argument("--verbose", action="store_true",
                    help="emit progress lines on stderr")
    tr.set_defaults(fn=cmd_train)

    ev = sub.add_parser("eval", help="top-k accuracies of a saved model")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--kmax", type=int, default=5)
    ev.set_defaults(fn=cmd_eval)

    sy = sub.add_parser("synth", help="sample the synthetic circle datasets")
    sy.add_argument("--ntrain", type=int, default=200)
    sy.add_argument("--nval", type=int, default=200)
    sy.add_argument("--ntest", type=int, default=200000)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--outdir", required=True)
    sy.set_defaults(fn=cmd_synth)

    cv = sub.add_parser("cv", help="tune C on a validation set or by folds")
    cv.add_argument("--data", required=True)
    cv.add_argument("--val", default=None,
                    help="held-out validation file (or use --folds)")
    cv.add_argument("--folds", type=int, default=None,
                    help="stratified k-fold count instead of --val")
    cv.add_argument("--loss", required=True, choices=sorted(LOSS_NAMES))
    cv.add_argument("--k", type=int, default=None)
    cv.add_argument("--gamma", type=float, default=None)
    cv.add_argument("--grid-lo", type=int, default=-18,
                    help="smallest grid exponent (C = base^e)")
    cv.add_argument("--grid-hi", type=int, default=18)
    cv.add_argument("--grid-base", type=float, default=2.0)
    cv.add_argument("--target-k", default="1",
                    help="comma-separated list of target top-k values")
    cv.add_argument("--kmax", type=int, default=None)
    cv.add_argument("--epochs", type=int, default=300)
    cv.add_argument("--tol", type=float, default=1e-3)
    cv.add_argument("--seed", type=int, default=0)
    cv.set_defaults(fn=cmd_cv)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
