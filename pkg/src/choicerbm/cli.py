"""Command-line entry point wiring the estimation workflow together.

Subcommands: train, evaluate, predict, sensitivity, hinton, generate.
Training defaults mirror the reference configuration (batch 64, 400
epochs, learning rate 1e-3, CD-1), so `train` with no tuning flags runs
the standard recipe.  Exit codes: 0 success, 2 usage error, 1 runtime
failure with a one-line diagnostic.
"""

import argparse
import sys

import numpy as np

from . import dataset, oracle, report, sensitivity, stats, trainer
from .inference import predict_batch, write_predictions_csv


class UsageError(ValueError):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="choicerbm",
        description="Latent-variable discrete choice estimation with a "
                    "conditional RBM")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_train_flags(sp, with_hidden=True):
        sp.add_argument("--data", required=True, help="dataset CSV path")
        sp.add_argument("--choice-col", default="choice",
                        help="name of the integer choice column")
        sp.add_argument("--features", default=None,
                        help="comma-separated feature columns "
                             "(default: all non-choice columns)")
        if with_hidden:
            sp.add_argument("--hidden", type=int, default=2,
                            help="latent variables J; 0 selects the MNL baseline")
        sp.add_argument("--epochs", type=int, default=400)
        sp.add_argument("--batch", type=int, default=64)
        sp.add_argument("--lr", type=float, default=1e-3)
        sp.add_argument("--cd-k", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--split", type=float, default=0.70,
                        help="training fraction of the data")
        sp.add_argument("--patience", type=int, default=20,
                        help="early-stopping patience in epochs")
        sp.add_argument("--init-scale", type=float, default=0.01,
                        help="std dev of the weight initialization")
        sp.add_argument("--momentum", type=float, nargs=2,
                        default=[0.5, 0.9], metavar=("INITIAL", "FINAL"))
        sp.add_argument("--weight-decay", type=float, default=0.0)
        sp.add_argument("--lr-decay", action="store_true",
                        help="decay the base rate as 1/(1+epoch)")

    sp = sub.add_parser("train", help="estimate a model and print a results row")
    add_train_flags(sp)
    sp.add_argument("--out", required=True, help="model file to write")

    sp = sub.add_parser("evaluate", help="print the fit report of a saved model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--whole-file", action="store_true",
                    help="score every row instead of replaying the saved "
                         "train/validation split")

    sp = sub.add_parser("predict", help="write batch predictions as CSV")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("sensitivity",
                        help="subsample refits and the sensitivity rank table")
    add_train_flags(sp, with_hidden=False)
    sp.add_argument("--hidden", default="2",
                    help="comma-separated latent sizes, one column group each")
    sp.add_argument("--fraction", type=float, default=0.1)
    sp.add_argument("--replicates", type=int, default=5)
    sp.add_argument("--out", required=True, help="CSV table to write")

    sp = sub.add_parser("hinton", help="render a weight block as an SVG diagram")
    sp.add_argument("--model", required=True)
    sp.add_argument("--block", required=True, choices=["B", "D", "A"],
                    help="B: choice-context, D: choice-hidden, A: hidden-context")
    sp.add_argument("--out", required=True)
    sp.add_argument("--threshold", type=float, default=1.96)

    sp = sub.add_parser("generate", help="draw a synthetic dataset CSV")
    sp.add_argument("--planted", required=True,
                    help="planted-model JSON (see oracle.save_planted)")
    sp.add_argument("--n", type=int, default=None, help="rows to draw")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    return parser


def _feature_list(arg):
    if arg is None:
        return None
    cols = [c.strip() for c in arg.split(",") if c.strip()]
    if not cols:
        raise UsageError("--features given but empty")
    return cols


def _train_config(args) -> trainer.TrainConfig:
    cfg = trainer.TrainConfig(
        cd_k=args.cd_k, batch_size=args.batch, epochs=args.epochs,
        learning_rate=args.lr, seed=args.seed,
        early_stop_patience=args.patience,
        weight_init_scale=args.init_scale,
        momentum_initial=args.momentum[0], momentum_final=args.momentum[1],
        weight_decay=args.weight_decay, lr_decay=args.lr_decay)
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _load_split(args):
    ds = dataset.load_csv(args.data, args.choice_col, _feature_list(args.features))
    spec = dataset.SplitSpec(train_fraction=args.split, seed=args.seed)
    train_ds, valid_ds = dataset.split(ds, spec)
    return dataset.refit_normalization(train_ds, valid_ds)


def _cmd_train(args) -> int:
    cfg = _train_config(args)
    if args.hidden < 0:
        raise UsageError("--hidden must be >= 0")
    if not 0.0 < args.split < 1.0:
        raise UsageError("--split must lie in (0, 1)")
    train_ds, valid_ds = _load_split(args)
    params, trace = trainer.train_crbm(train_ds, valid_ds, args.hidden, cfg)
    rep = stats.evaluate(params, train_ds, valid_ds)
    label = "MNL" if args.hidden == 0 else f"CRBM-J{args.hidden}"
    sys.stdout.write(stats.report_table_rows([(label, rep)]))
    report.save_model(
        params, args.out, norm_stats=train_ds.norm_stats,
        feature_names=train_ds.feature_names,
        alternative_names=train_ds.alternative_names,
        train_config=cfg,
        metrics={
            "loglik_train": rep.loglik_train,
            "loglik_valid": rep.loglik_valid,
            "rho2": rep.rho2,
            "bic": rep.bic,
            "validation_error": rep.validation_error,
            "mean_true_prob": rep.mean_true_prob,
            "n_params": rep.n_params,
            "best_epoch": trace.best_epoch,
            "split_fraction": args.split,
            "split_seed": args.seed,
        },
        std_errs=rep.std_errs, tstats=rep.tstats,
        choice_column=args.choice_col)
    return 0


def _cmd_evaluate(args) -> int:
    params, meta = report.load_model(args.model)
    norm = meta.get("norm_stats")
    feats = meta.get("feature_names")
    if norm is None or feats is None:
        raise UsageError("model file lacks normalization metadata")
    choice_col = meta.get("choice_column", "choice")
    metrics = meta.get("metrics", {})
    if not args.whole_file and "split_fraction" in metrics:
        # Replay the exact split and scaling used when the model was
        # trained, so the printed metrics reproduce the training output.
        ds = dataset.load_csv(args.data, choice_col, list(feats),
                              n_alternatives=params.n_alternatives)
        spec = dataset.SplitSpec(train_fraction=metrics["split_fraction"],
                                 seed=int(metrics["split_seed"]))
        train_ds, valid_ds = dataset.refit_normalization(
            *dataset.split(ds, spec))
        rep = stats.evaluate(params, train_ds, valid_ds)
    else:
        ds = dataset.load_csv(args.data, choice_col, list(feats),
                              n_alternatives=params.n_alternatives,
                              norm_stats=norm)
        rep = stats.evaluate(params, ds, ds)
    label = "MNL" if params.n_hidden == 0 else f"CRBM-J{params.n_hidden}"
    sys.stdout.write(stats.report_table_rows([(label, rep)]))
    sys.stdout.write(f"valid_loglik,{rep.loglik_valid:.6f}\n")
    sys.stdout.write(f"mean_true_prob,{rep.mean_true_prob:.6f}\n")
    return 0


def _cmd_predict(args) -> int:
    params, meta = report.load_model(args.model)
    norm = meta.get("norm_stats")
    feats = meta.get("feature_names")
    if norm is None or feats is None:
        raise UsageError("model file lacks normalization metadata")
    x = dataset.load_features_csv(args.data, list(feats), norm)
    alt_names = meta.get("alternative_names",
                         tuple(f"alt{i + 1}" for i in
                               range(params.n_alternatives)))
    # predict only reads x; a placeholder choice column keeps the dataset
    # invariants satisfied.
    ds_like = dataset.ChoiceDataset(
        x=x, y=dataset.one_hot(np.zeros(len(x), dtype=np.int64),
                               params.n_alternatives),
        feature_names=tuple(feats), alternative_names=alt_names,
        norm_stats=norm)
    preds, _ = predict_batch(params, ds_like)
    write_predictions_csv(args.out, preds, alt_names)
    return 0


def _cmd_sensitivity(args) -> int:
    hidden_sizes = [int(tok) for tok in str(args.hidden).split(",") if tok != ""]
    if not hidden_sizes or any(j < 0 for j in hidden_sizes):
        raise UsageError("--hidden must list non-negative integers")
    cfg = _train_config(args)
    train_ds, valid_ds = _load_split(args)
    reports = [
        sensitivity.sensitivity_run(train_ds, j, cfg, args.fraction,
                                    args.replicates, args.seed)
        for j in hidden_sizes
    ]
    table = sensitivity.sensitivity_table_csv(reports)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(table)
    sys.stdout.write(table)
    return 0


_BLOCKS = {
    "B": ("choice_context_w", "alternative_names", "feature_names"),
    "D": ("choice_hidden_w", "alternative_names", None),
    "A": ("hidden_context_w", None, "feature_names"),
}


def _cmd_hinton(args) -> int:
    params, meta = report.load_model(args.model)
    attr, row_key, col_key = _BLOCKS[args.block]
    values = getattr(params, attr)
    if values.size == 0:
        raise UsageError(f"block {args.block} is empty for this model")
    tstats = meta.get("tstats")
    t = getattr(tstats, attr) if tstats is not None else np.zeros_like(values)
    rows, cols = values.shape
    row_labels = (meta.get(row_key, tuple(f"alt{i + 1}" for i in range(rows)))
                  if row_key else tuple(f"h{j + 1}" for j in range(rows)))
    col_labels = (meta.get(col_key, tuple(f"f{k + 1}" for k in range(cols)))
                  if col_key else tuple(f"h{j + 1}" for j in range(cols)))
    spec = report.HintonSpec(values=values, row_labels=row_labels,
                             col_labels=col_labels, tstats=t,
                             threshold=args.threshold)
    svg = report.hinton_svg(spec)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    return 0


def _cmd_generate(args) -> int:
    pm = oracle.load_planted(args.planted, n_rows=args.n, seed=args.seed)
    oracle.write_dataset_csv(pm, args.out)
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "predict": _cmd_predict,
    "sensitivity": _cmd_sensitivity,
    "hinton": _cmd_hinton,
    "generate": _cmd_generate,
}


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
