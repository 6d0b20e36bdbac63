"""Contrastive-divergence estimation with minibatch SGD and momentum.

One loop drives both estimators.  With hidden units the per-batch gradient
is the CD estimate: mean-field hidden activations against a sampled
reconstruction chain.  Without hidden units the reconstruction chain mixes
in a single step, so its expectation is available in closed form and the
loop becomes exact multinomial-logit gradient ascent; `train_mnl` is that
same loop pinned to zero hidden units, which keeps the two estimators
bit-identical under a shared seed.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dataset import ChoiceDataset
from .model import CrbmParams, ParamBlocks

BLOCK_NAMES = ("choice_hidden_w", "choice_context_w", "hidden_context_w",
               "choice_bias", "hidden_bias")


class TrainingDivergedError(RuntimeError):
    """Raised when a parameter turns NaN or infinite during training."""


@dataclass(frozen=True)
class TrainConfig:
    cd_k: int = 1
    batch_size: int = 64
    epochs: int = 400
    learning_rate: float = 1e-3
    momentum_initial: float = 0.5
    momentum_final: float = 0.9
    momentum_switch_epoch: int = 5
    seed: int = 0
    early_stop_patience: int = 20
    weight_init_scale: float = 0.01
    lr_decay: bool = False      # optional 1/(1+epoch) decay of the base rate
    weight_decay: float = 0.0   # L2 on weight blocks only, off by default

    def validate(self):
        if self.cd_k < 1:
            raise ValueError("cd_k must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        for m in (self.momentum_initial, self.momentum_final):
            if not 0.0 <= m < 1.0:
                raise ValueError("momentum must lie in [0, 1)")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be non-negative")
        if self.weight_init_scale <= 0:
            raise ValueError("weight_init_scale must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")


@dataclass
class TrainTrace:
    """Per-epoch diagnostics; `best_epoch` indexes the kept parameter snapshot."""

    train_nll: list = field(default_factory=list)   # mean per-row NLL
    valid_nll: list = field(default_factory=list)
    valid_error: list = field(default_factory=list)
    recon_error: list = field(default_factory=list)
    best_epoch: int = -1


def init_param_arrays(n_alternatives, n_hidden, n_features, class_counts,
                      scale, rng) -> dict:
    """Weights ~ Normal(0, scale^2); biases zero except the choice bias,
    which starts at log empirical shares (zero counts floored at one)."""
    counts = np.maximum(np.asarray(class_counts, dtype=np.float64), 1.0)
    return {
        "choice_hidden_w": rng.normal(0.0, scale, size=(n_alternatives, n_hidden)),
        "choice_context_w": rng.normal(0.0, scale, size=(n_alternatives, n_features)),
        "hidden_context_w": rng.normal(0.0, scale, size=(n_hidden, n_features)),
        "choice_bias": np.log(counts / counts.sum()),
        "hidden_bias": np.zeros(n_hidden),
    }


def _softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _mean_field_logits(b, x):
    h_bar = expit(b["hidden_bias"] + x @ b["hidden_context_w"].T)
    return b["choice_bias"] + x @ b["choice_context_w"].T + h_bar @ b["choice_hidden_w"].T


def _mean_nll(b, ds: ChoiceDataset) -> float:
    logits = _mean_field_logits(b, ds.x)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-log_probs[np.arange(ds.n_rows), ds.choice_indices()].mean())


def _error_rate(b, ds: ChoiceDataset) -> float:
    predicted = _mean_field_logits(b, ds.x).argmax(axis=1)
    return float(np.mean(predicted != ds.choice_indices()))


def _cd_batch_grads(b, xb, yb, cd_k, rng):
    """CD-k gradient estimate for one minibatch.

    Positive phase: mean-field hidden activations at the data.  Negative
    phase: alternate hidden/choice sampling for cd_k steps from the data,
    keeping the final sampled pair.  Context stays clamped throughout.
    """
    n = xb.shape[0]
    hidden_drive = xb @ b["hidden_context_w"].T + b["hidden_bias"]
    choice_drive = xb @ b["choice_context_w"].T + b["choice_bias"]

    h_pos = expit(hidden_drive + yb @ b["choice_hidden_w"])
    y_neg = yb
    for _ in range(cd_k):
        h_probs = expit(hidden_drive + y_neg @ b["choice_hidden_w"])
        h_neg = (rng.random(h_probs.shape) < h_probs).astype(np.float64)
        probs = _softmax(choice_drive + h_neg @ b["choice_hidden_w"].T)
        u = rng.random(n)
        idx = (probs.cumsum(axis=1) > u[:, None]).argmax(axis=1)
        y_neg = np.zeros_like(probs)
        y_neg[np.arange(n), idx] = 1.0

    grads = {
        "choice_hidden_w": (yb.T @ h_pos - y_neg.T @ h_neg) / n,
        "choice_context_w": (yb - y_neg).T @ xb / n,
        "hidden_context_w": (h_pos - h_neg).T @ xb / n,
        "choice_bias": (yb - y_neg).mean(axis=0),
        "hidden_bias": (h_pos - h_neg).mean(axis=0),
    }
    mismatch = float(np.mean(y_neg.argmax(axis=1) != yb.argmax(axis=1)))
    return grads, mismatch


def _mnl_batch_grads(b, xb, yb):
    """Exact multinomial-logit gradient for one minibatch (no hidden units)."""
    n = xb.shape[0]
    probs = _softmax(xb @ b["choice_context_w"].T + b["choice_bias"])
    resid = yb - probs
    grads = {
        "choice_hidden_w": np.zeros_like(b["choice_hidden_w"]),
        "choice_context_w": resid.T @ xb / n,
        "hidden_context_w": np.zeros_like(b["hidden_context_w"]),
        "choice_bias": resid.mean(axis=0),
        "hidden_bias": np.zeros_like(b["hidden_bias"]),
    }
    mismatch = float(
        1.0 - probs[np.arange(n), yb.argmax(axis=1)].mean())
    return grads, mismatch


def cd_step(p: CrbmParams, batch, cfg: TrainConfig, rng: np.random.Generator):
    """One CD gradient evaluation on (x rows, y rows); returns block gradients.

    The returned values are ascent directions on the conditional
    log-likelihood, before any learning rate or momentum is applied.
    """
    xb, yb = (np.asarray(a, dtype=np.float64) for a in batch)
    if xb.ndim != 2 or yb.ndim != 2 or xb.shape[0] != yb.shape[0]:
        raise ValueError("batch must be two aligned 2-d arrays")
    if xb.shape[0] == 0:
        raise ValueError("batch is empty")
    if xb.shape[1] != p.n_features or yb.shape[1] != p.n_alternatives:
        raise ValueError("batch dimensions do not match the parameters")
    b = {name: arr for name, arr in p.blocks()}
    grads, _ = _cd_batch_grads(b, xb, yb, cfg.cd_k, rng)
    return ParamBlocks(**grads)


def _fit(ds_train: ChoiceDataset, ds_valid: ChoiceDataset, n_hidden: int,
         cfg: TrainConfig, epoch_hook=None):
    cfg.validate()
    if n_hidden < 0:
        raise ValueError("n_hidden must be >= 0")
    if ds_train.n_features != ds_valid.n_features:
        raise ValueError("train and valid disagree on feature count")
    if ds_train.n_alternatives != ds_valid.n_alternatives:
        raise ValueError("train and valid disagree on alternative count")

    rng = np.random.default_rng(cfg.seed)
    n = ds_train.n_rows
    b = init_param_arrays(
        ds_train.n_alternatives, n_hidden, ds_train.n_features,
        ds_train.y.sum(axis=0), cfg.weight_init_scale, rng)
    vel = {name: np.zeros_like(arr) for name, arr in b.items()}
    weight_blocks = {"choice_hidden_w", "choice_context_w", "hidden_context_w"}

    trace = TrainTrace()
    best_error = np.inf
    best_params = None

    for epoch in range(cfg.epochs):
        momentum = (cfg.momentum_initial if epoch < cfg.momentum_switch_epoch
                    else cfg.momentum_final)
        lr = cfg.learning_rate / (1.0 + epoch) if cfg.lr_decay else cfg.learning_rate

        perm = rng.permutation(n)
        mismatch_sum = 0.0
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            rows = perm[start:start + cfg.batch_size]
            xb, yb = ds_train.x[rows], ds_train.y[rows]
            if n_hidden > 0:
                grads, mismatch = _cd_batch_grads(b, xb, yb, cfg.cd_k, rng)
            else:
                grads, mismatch = _mnl_batch_grads(b, xb, yb)
            for name in BLOCK_NAMES:
                g = grads[name]
                if cfg.weight_decay and name in weight_blocks:
                    g = g - cfg.weight_decay * b[name]
                vel[name] = momentum * vel[name] + lr * g
                b[name] = b[name] + vel[name]
            mismatch_sum += mismatch
            n_batches += 1

        for name in BLOCK_NAMES:
            if not np.all(np.isfinite(b[name])):
                raise TrainingDivergedError(
                    f"non-finite values in {name} at epoch {epoch}")

        trace.train_nll.append(_mean_nll(b, ds_train))
        trace.valid_nll.append(_mean_nll(b, ds_valid))
        trace.valid_error.append(_error_rate(b, ds_valid))
        trace.recon_error.append(mismatch_sum / n_batches)

        if epoch_hook is not None:
            epoch_hook(epoch, CrbmParams(**{k: v.copy() for k, v in b.items()}))

        if trace.valid_error[-1] < best_error:
            best_error = trace.valid_error[-1]
            trace.best_epoch = epoch
            best_params = {k: v.copy() for k, v in b.items()}
        elif epoch - trace.best_epoch > cfg.early_stop_patience:
            break

    return CrbmParams(**best_params), trace


def train_crbm(ds_train: ChoiceDataset, ds_valid: ChoiceDataset, n_hidden: int,
               cfg: TrainConfig, epoch_hook=None):
    """Estimate a conditional RBM; returns the best-validation snapshot and trace.

    `n_hidden=0` degenerates to the multinomial-logit estimator.  The
    optional `epoch_hook(epoch, params)` observes the end-of-epoch snapshot
    and must not touch any random state.
    """
    return _fit(ds_train, ds_valid, n_hidden, cfg, epoch_hook)


def train_mnl(ds_train: ChoiceDataset, ds_valid: ChoiceDataset, cfg: TrainConfig,
              epoch_hook=None):
    """Multinomial-logit baseline: the same schedule with zero hidden units."""
    return _fit(ds_train, ds_valid, 0, cfg, epoch_hook)
