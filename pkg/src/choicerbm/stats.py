"""Fit statistics: log-likelihood, rho-squared, BIC, validation error,
standard errors and t values.

The likelihood surface evaluated here is the prediction model itself:
hidden activations are held at their context-driven mean-field values, so
with zero hidden units everything reduces to exact multinomial-logit
statistics.  Standard errors come from the outer product of per-row score
vectors (the BHHH information estimator); the softmax blocks are always
rank-deficient by one per feature, so the information matrix is inverted
on its identified subspace (minimum-norm gauge).
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .dataset import ChoiceDataset
from .model import CrbmParams, ParamBlocks, param_count


@dataclass
class FitReport:
    loglik_train: float
    loglik_valid: float
    rho2: float
    bic: float
    validation_error: float
    mean_true_prob: float      # mean probability on the observed alternative
    n_params: int
    confusion: np.ndarray      # I x I counts on the validation set
    std_errs: ParamBlocks
    tstats: ParamBlocks


def _mean_field_log_probs(p: CrbmParams, x):
    h_bar = expit(p.hidden_bias + x @ p.hidden_context_w.T)
    logits = p.choice_bias + x @ p.choice_context_w.T + h_bar @ p.choice_hidden_w.T
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def log_likelihood(p: CrbmParams, ds: ChoiceDataset) -> float:
    """Total log P(y_obs | x) under the mean-field prediction model.

    Computed in log space end to end, so finite parameters can never
    produce -inf.
    """
    if ds.n_features != p.n_features:
        raise ValueError("dataset feature count does not match the model")
    log_probs = _mean_field_log_probs(p, ds.x)
    return float(log_probs[np.arange(ds.n_rows), ds.choice_indices()].sum())


def rho_squared(loglik: float, n: int, n_alternatives: int) -> float:
    """Fit against the equal-shares null: 1 - LL / (n * ln(1/I))."""
    if n <= 0:
        raise ValueError("n must be positive")
    if n_alternatives < 2:
        raise ValueError("need at least 2 alternatives")
    return 1.0 - loglik / (n * np.log(1.0 / n_alternatives))


def bic(loglik: float, n_params: int, n: int) -> float:
    """Bayesian information criterion: -2 LL + n_params ln(n)."""
    if n <= 0:
        raise ValueError("n must be positive")
    return -2.0 * loglik + n_params * np.log(n)


def validation_error(p: CrbmParams, ds: ChoiceDataset) -> float:
    """1 - share of rows whose argmax prediction matches the observed choice."""
    if ds.n_rows == 0:
        raise ValueError("empty dataset")
    predicted = _mean_field_log_probs(p, ds.x).argmax(axis=1)
    return float(np.mean(predicted != ds.choice_indices()))


def mean_true_probability(p: CrbmParams, ds: ChoiceDataset) -> float:
    """Secondary accuracy figure: mean probability on the observed alternative."""
    log_probs = _mean_field_log_probs(p, ds.x)
    return float(np.exp(
        log_probs[np.arange(ds.n_rows), ds.choice_indices()]).mean())


def pinv_standard_errors(scores: np.ndarray) -> np.ndarray:
    """Standard errors from an outer-product-of-scores information matrix.

    `scores` is (rows, params).  The information matrix is inverted through
    its eigendecomposition; directions with (numerically) zero information
    are projected out rather than inverted, which is the minimum-norm gauge
    for overparameterized softmax blocks.  Emits a warning when that
    happens.  Parameters with no information at all get a zero standard
    error.
    """
    n_params = scores.shape[1]
    if n_params == 0:
        return np.zeros(0)
    info = scores.T @ scores
    eigvals, eigvecs = np.linalg.eigh(info)
    cutoff = max(n_params, 1) * np.finfo(np.float64).eps * max(eigvals.max(), 0.0)
    keep = eigvals > cutoff
    if not np.all(keep):
        warnings.warn(
            f"information matrix is singular (rank {int(keep.sum())} of "
            f"{n_params}); standard errors use the identified subspace only")
    inv = np.where(keep, 1.0 / np.where(keep, eigvals, 1.0), 0.0)
    variances = (eigvecs ** 2 * inv).sum(axis=1)
    return np.sqrt(np.maximum(variances, 0.0))


def _prediction_scores(p: CrbmParams, ds: ChoiceDataset):
    """Per-row score vectors of the mean-field prediction log-likelihood.

    Returns (scores for the choice blocks B/D/c, scores for the hidden
    blocks A/d).  The choice blocks see an exact multinomial score over the
    augmented features [x, h_bar, 1]; the hidden blocks receive the chain
    rule through h_bar and are therefore approximate.
    """
    x = ds.x
    n = x.shape[0]
    h_bar = expit(p.hidden_bias + x @ p.hidden_context_w.T)        # (n, J)
    logits = (p.choice_bias + x @ p.choice_context_w.T
              + h_bar @ p.choice_hidden_w.T)
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    resid = ds.y - probs                                           # (n, I)

    feats = np.concatenate([x, h_bar, np.ones((n, 1))], axis=1)    # (n, K+J+1)
    choice_scores = np.einsum("ni,nf->nif", resid, feats).reshape(n, -1)

    # d(log lik)/d(h_bar_j) = sum_i resid_i D_ij, then through the sigmoid.
    dh = (resid @ p.choice_hidden_w) * h_bar * (1.0 - h_bar)       # (n, J)
    hidden_feats = np.concatenate([x, np.ones((n, 1))], axis=1)    # (n, K+1)
    hidden_scores = np.einsum("nj,nf->njf", dh, hidden_feats).reshape(n, -1)
    return choice_scores, hidden_scores


def t_statistics(p: CrbmParams, ds_train: ChoiceDataset):
    """(standard errors, t values) in parameter-block layout.

    Blocks B, D and c are scored against the mean-field prediction
    likelihood; blocks A and d against the same likelihood through the
    hidden activations and should be read as approximate.  t is the
    parameter over its standard error, with zero parameters pinned to
    t = 0.
    """
    if ds_train.n_rows <= param_count(p.n_alternatives, p.n_hidden, p.n_features):
        warnings.warn("fewer rows than parameters; standard errors are unreliable")
    n_alt, n_hid, k = p.n_alternatives, p.n_hidden, p.n_features
    choice_scores, hidden_scores = _prediction_scores(p, ds_train)
    se_choice = pinv_standard_errors(choice_scores).reshape(n_alt, k + n_hid + 1)
    se_hidden = pinv_standard_errors(hidden_scores).reshape(n_hid, k + 1) \
        if n_hid else np.zeros((0, k + 1))

    std_errs = ParamBlocks(
        choice_hidden_w=se_choice[:, k:k + n_hid].copy(),
        choice_context_w=se_choice[:, :k].copy(),
        hidden_context_w=se_hidden[:, :k].copy(),
        choice_bias=se_choice[:, -1].copy(),
        hidden_bias=se_hidden[:, -1].copy() if n_hid else np.zeros(0),
    )
    tstats = ParamBlocks.zeros_like(p)
    for name, se in std_errs.blocks():
        theta = getattr(p, name)
        t = np.zeros_like(theta)
        nonzero = theta != 0.0
        with np.errstate(divide="ignore"):
            t[nonzero] = theta[nonzero] / se[nonzero]
        setattr(tstats, name, t)
    return std_errs, tstats


def significant(tstats: np.ndarray, threshold: float = 1.96) -> np.ndarray:
    """Boolean mask: |t| at or above the two-sided 95% normal quantile."""
    return np.abs(tstats) >= threshold


def finite_difference_hessian(fn, theta: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Symmetric central-difference Hessian of a scalar function.

    Intended for cross-checking the score-based errors on problems with at
    most a few dozen parameters.
    """
    theta = np.asarray(theta, dtype=np.float64)
    m = theta.size
    if m > 50:
        raise ValueError("finite-difference Hessian capped at 50 parameters")
    hess = np.zeros((m, m))
    for a in range(m):
        for b_idx in range(a, m):
            t = theta.copy()
            t[a] += step
            t[b_idx] += step
            fpp = fn(t)
            t = theta.copy()
            t[a] += step
            t[b_idx] -= step
            fpm = fn(t)
            t = theta.copy()
            t[a] -= step
            t[b_idx] += step
            fmp = fn(t)
            t = theta.copy()
            t[a] -= step
            t[b_idx] -= step
            fmm = fn(t)
            hess[a, b_idx] = hess[b_idx, a] = (fpp - fpm - fmp + fmm) / (4 * step * step)
    return hess


def evaluate(p: CrbmParams, ds_train: ChoiceDataset,
             ds_valid: ChoiceDataset) -> FitReport:
    """Assemble the full statistical report for a fitted model."""
    from .inference import predict_batch

    ll_train = log_likelihood(p, ds_train)
    ll_valid = log_likelihood(p, ds_valid)
    n_params = param_count(p.n_alternatives, p.n_hidden, p.n_features)
    _, confusion = predict_batch(p, ds_valid)
    std_errs, tstats = t_statistics(p, ds_train)
    return FitReport(
        loglik_train=ll_train,
        loglik_valid=ll_valid,
        rho2=rho_squared(ll_train, ds_train.n_rows, p.n_alternatives),
        bic=bic(ll_train, n_params, ds_train.n_rows),
        validation_error=validation_error(p, ds_valid),
        mean_true_prob=mean_true_probability(p, ds_valid),
        n_params=n_params,
        confusion=confusion,
        std_errs=std_errs,
        tstats=tstats,
    )


TABLE_COLUMNS = ("model", "validation_error", "log_likelihood", "rho2",
                 "n_params", "bic")


def report_table_rows(labeled_reports) -> str:
    """CSV rows of (label, FitReport) pairs in result-table column order."""
    lines = [",".join(TABLE_COLUMNS)]
    for label, rep in labeled_reports:
        lines.append(",".join([
            str(label),
            f"{rep.validation_error:.4f}",
            f"{rep.loglik_train:.0f}",
            f"{rep.rho2:.3f}",
            str(rep.n_params),
            f"{rep.bic:.0f}",
        ]))
    return "\n".join(lines) + "\n"
