"""Adversarial training of the selector/predictor pair.

Each mini-batch plays one round of the game: sample a selection vector
per example, measure how much adding the sensitive feature moves the
predictor's output (the sensitivity norm), push the selector's logits
up that score-function gradient, then push the predictor's parameters
down the gradient of (sensitivity_weight * sensitivity + cross-entropy)
with Adam. The selector maximizes sensitivity, the predictor minimizes
it while keeping classification accuracy, so at convergence the chosen
features carry little information the sensitive feature could add.

Training is deterministic given the config seed: identical runs produce
bit-identical logs and parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DimensionError, NumericalError
from .nets import (PROB_FLOOR, AdamState, DenseNet, adam_step, backward,
                   forward)
from .selector import (SelectorPolicy, enumerate_selections, probabilities,
                       sample_selection_batch)

INFERENCE_POLICIES = ("threshold05", "expected-input", "mc-average")

# sensitivity norms below this are treated as exactly zero (the norm is
# not differentiable there; zero is a valid subgradient)
NORM_EPS = 1e-12


@dataclass
class TrainConfig:
    """Hyper-parameters of one training run.

    patience is clamped to max_epochs so the invariant
    patience <= max_epochs always holds.
    """

    alpha_theta: float = 1e-4
    alpha_phi: float = 1e-4
    batch_size: int = 128
    max_epochs: int = 200
    patience: int = 20
    sensitivity_weight: float = 1.0
    seed: int = 0
    inference_policy: str = "threshold05"
    mc_samples: int = 32
    hidden_sizes: tuple = (200, 200, 200, 200)
    mask_sensitive: bool = True
    score_baseline: bool = False

    def __post_init__(self):
        if self.alpha_theta <= 0 or self.alpha_phi <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be nonnegative")
        if self.sensitivity_weight < 0:
            raise ValueError("sensitivity_weight must be nonnegative")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be at least 1")
        if self.inference_policy not in INFERENCE_POLICIES:
            raise ValueError(f"inference_policy must be one of {INFERENCE_POLICIES}, "
                             f"got {self.inference_policy!r}")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden_sizes must be a nonempty tuple of positive ints")
        self.patience = min(int(self.patience), self.max_epochs)

    def to_dict(self):
        return {
            "alpha_theta": self.alpha_theta,
            "alpha_phi": self.alpha_phi,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "sensitivity_weight": self.sensitivity_weight,
            "seed": self.seed,
            "inference_policy": self.inference_policy,
            "mc_samples": self.mc_samples,
            "hidden_sizes": list(self.hidden_sizes),
            "mask_sensitive": self.mask_sensitive,
            "score_baseline": self.score_baseline,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["hidden_sizes"] = tuple(d.get("hidden_sizes", (200, 200, 200, 200)))
        return cls(**d)


@dataclass
class EpochRecord:
    prediction_loss: float
    sensitivity: float
    val_balanced_accuracy: float


@dataclass
class TrainedModel:
    net: DenseNet
    policy: SelectorPolicy
    config: TrainConfig
    training_log: list = field(default_factory=list)
    best_epoch: int = -1
    diagnostics: str = None

    @property
    def selection_probabilities(self):
        return probabilities(self.policy)


def apply_selection(x, s):
    """Zero out unselected features: out_j = x_j if s_j = 1 else 0."""
    x = np.asarray(x, dtype=np.float64)
    s = np.asarray(s)
    if x.shape[-1] != s.shape[-1]:
        raise DimensionError("selection vector", x.shape[-1], s.shape[-1])
    return x * s


def selection_outputs(net, X, S, k):
    """Predictor outputs with and without the sensitive feature added.

    Returns (probs_selected, probs_with_sensitive, diff, norms) where
    diff = probs_with_sensitive - probs_selected and norms are its
    per-row Euclidean lengths.
    """
    x_sel = apply_selection(X, S)
    x_with = x_sel.copy()
    x_with[..., k] = np.asarray(X, dtype=np.float64)[..., k]
    p_sel = forward(net, x_sel)
    p_with = forward(net, x_with)
    diff = p_with - p_sel
    norms = np.linalg.norm(np.atleast_2d(diff), axis=1)
    return p_sel, p_with, diff, norms


def sensitivity_loss(net, x, s, k):
    """Euclidean norm of the output change caused by adding feature k to
    the selection s."""
    _, _, _, norms = selection_outputs(net, np.atleast_2d(x), np.atleast_2d(s), k)
    return float(norms[0])


def prediction_loss(net, x, s, y):
    """Cross-entropy of the predictor on the selected input:
    -log of the probability assigned to the true class."""
    p = forward(net, apply_selection(x, s))
    p_true = float(np.dot(p, np.asarray(y, dtype=np.float64)))
    return -math.log(max(p_true, PROB_FLOOR))


def selector_step(policy, X, net, alpha_theta, rng, baseline=None):
    """One gradient-ascent step on the selector logits.

    Samples one selection per row, scores each by its sensitivity norm,
    and moves the logits along the batch-mean score-function estimate
    norm * (s - p). Returns (updated policy, sampled selections, norms)
    so the paired predictor step can reuse the same samples.

    baseline, if given, is subtracted from the norms before weighting
    (variance reduction; leaves the expected update unchanged).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("selector_step needs a nonempty batch")
    p = probabilities(policy)
    S = sample_selection_batch(p, X.shape[0], rng)
    _, _, _, norms = selection_outputs(net, X, S, policy.sensitive_index)
    if not np.isfinite(norms).all():
        raise NumericalError("sensitivity estimate is non-finite; aborting epoch")
    coeff = norms - baseline if baseline is not None else norms
    grad = (coeff[:, None] * (S - p)).mean(axis=0)
    if not np.isfinite(grad).all():
        raise NumericalError("selector gradient estimate is non-finite; aborting epoch")
    return policy.with_logits(policy.logits + alpha_theta * grad), S, norms


def composite_loss_and_grads(net, X, Y, S, k, sensitivity_weight, fault=None):
    """Batch-mean predictor loss and its exact parameter gradients.

    Loss per example: sensitivity_weight * ||sensitivity diff|| plus
    cross-entropy on the selected input. Examples whose sensitivity norm
    is below NORM_EPS contribute a zero sensitivity gradient (valid
    subgradient at the kink).

    fault is a test hook for the gradient checker; "sen-grad-sign" flips
    the sign of the sensitivity gradient term without touching the loss.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    S = np.atleast_2d(S)
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty batch")

    x_sel = apply_selection(X, S)
    x_with = x_sel.copy()
    x_with[:, k] = X[:, k]
    p_sel = forward(net, x_sel)
    p_with = forward(net, x_with)
    diff = p_with - p_sel
    norms = np.linalg.norm(diff, axis=1)

    p_true = np.maximum((p_sel * Y).sum(axis=1), PROB_FLOOR)
    ce = -np.log(p_true)
    loss = float(np.mean(sensitivity_weight * norms + ce))

    unit = np.zeros_like(diff)
    active = norms > NORM_EPS
    unit[active] = diff[active] / norms[active, None]
    if fault == "sen-grad-sign":
        unit = -unit

    grad_with = (sensitivity_weight / n) * unit
    grad_sel = -(sensitivity_weight / n) * unit - (Y / np.maximum(p_sel, PROB_FLOOR)) / n
    grads_a, _ = backward(net, x_with, grad_with)
    grads_b, _ = backward(net, x_sel, grad_sel)
    grads = [ga + gb for ga, gb in zip(grads_a, grads_b)]
    return loss, grads, float(ce.mean()), float(norms.mean())


def sensitivity_loss_and_grads(net, X, S, k, fault=None):
    """Batch-mean sensitivity norm and its exact parameter gradients
    (the predictor-side half of the adversarial objective).

    fault="sen-grad-sign" flips the gradient sign (checker test hook).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    S = np.atleast_2d(S)
    n = X.shape[0]
    x_sel = apply_selection(X, S)
    x_with = x_sel.copy()
    x_with[:, k] = X[:, k]
    p_sel = forward(net, x_sel)
    p_with = forward(net, x_with)
    diff = p_with - p_sel
    norms = np.linalg.norm(diff, axis=1)

    unit = np.zeros_like(diff)
    active = norms > NORM_EPS
    unit[active] = diff[active] / norms[active, None]
    if fault == "sen-grad-sign":
        unit = -unit
    grads_a, _ = backward(net, x_with, unit / n)
    grads_b, _ = backward(net, x_sel, -unit / n)
    grads = [ga + gb for ga, gb in zip(grads_a, grads_b)]
    return float(norms.mean()), grads


def predictor_step(net, X, Y, S, k, adam_state, alpha_phi, sensitivity_weight):
    """One Adam descent step on the composite predictor loss.

    Must be fed the same sampled selections as the paired selector step.
    Returns (updated net, updated adam state, mean cross-entropy,
    mean sensitivity norm).
    """
    _, grads, ce_mean, sens_mean = composite_loss_and_grads(
        net, X, Y, S, k, sensitivity_weight)
    params, adam_state = adam_step(net.params(), grads, adam_state, alpha_phi)
    return net.with_params(params), adam_state, ce_mean, sens_mean


def _macro_recall(y_true, y_pred, num_classes):
    """Mean per-class recall; equals (TPR + TNR) / 2 for two classes."""
    recalls = []
    for c in range(num_classes):
        mask = y_true == c
        if mask.any():
            recalls.append(float((y_pred[mask] == c).mean()))
    if not recalls:
        raise DataError("no labeled examples to score")
    return float(np.mean(recalls))


def _predict_probs(net, policy, config, X, rng):
    p = probabilities(policy)
    k = policy.sensitive_index
    if config.inference_policy == "threshold05":
        s_det = (p >= 0.5).astype(np.float64)
        s_det[k] = 0.0
        return forward(net, X * s_det)
    if config.inference_policy == "expected-input":
        return forward(net, X * p)
    # mc-average
    acc = np.zeros((X.shape[0], net.num_classes))
    for _ in range(config.mc_samples):
        S = sample_selection_batch(p, X.shape[0], rng)
        acc += forward(net, apply_selection(X, S))
    return acc / config.mc_samples


def predict(model, x, rng=None):
    """Predicted class and probability vector under the model's
    inference policy.

    Accepts a single vector or a batch. Ties break toward the lower
    class index. For the mc-average policy an rng may be passed;
    otherwise a generator derived from the config seed is used, so
    repeated calls give identical output.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.net.input_dim:
        raise DimensionError("input", f"(n, {model.net.input_dim})", x.shape)
    if rng is None:
        rng = np.random.default_rng([model.config.seed, 0x9E3779B9])
    probs = _predict_probs(model.net, model.policy, model.config, X, rng)
    labels = probs.argmax(axis=1)
    if squeeze:
        return int(labels[0]), probs[0]
    return labels, probs


def mean_sensitivity(net, policy, X, n_samples=16, rng=None):
    """Monte-Carlo estimate of the expected sensitivity norm over the
    selection distribution, averaged over the rows of X."""
    if rng is None:
        rng = np.random.default_rng(0)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    p = probabilities(policy)
    total = 0.0
    for _ in range(n_samples):
        S = sample_selection_batch(p, X.shape[0], rng)
        _, _, _, norms = selection_outputs(net, X, S, policy.sensitive_index)
        total += norms.mean()
    return total / n_samples


def enumerate_sensitivity(net, policy, x):
    """Exact expected sensitivity norm and its logit gradient for one
    input, by enumerating every selection vector.

    Oracle-grade reference for the sampled estimates; only sensible for
    small feature counts.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    p = probabilities(policy)
    masked = policy.sensitive_index if policy.mask_sensitive else None
    S_all = enumerate_selections(d, masked_index=masked)
    pi = np.prod(np.where(S_all == 1, p, 1.0 - p), axis=1)
    X_rep = np.broadcast_to(x, (S_all.shape[0], d))
    _, _, _, norms = selection_outputs(net, X_rep, S_all, policy.sensitive_index)
    expected = float(np.dot(pi, norms))
    grad = ((pi * norms)[:, None] * (S_all - p)).sum(axis=0)
    return expected, grad


def score_function_estimate(net, policy, x, n_samples, rng, chunk=20000):
    """Monte-Carlo estimate of the logit gradient of the expected
    sensitivity norm for one input: mean of norm * (s - p) over sampled
    selections. The sampled counterpart of `enumerate_sensitivity`."""
    x = np.asarray(x, dtype=np.float64)
    p = probabilities(policy)
    total = np.zeros_like(p)
    remaining = n_samples
    while remaining > 0:
        m = min(chunk, remaining)
        S = sample_selection_batch(p, m, rng)
        X_rep = np.broadcast_to(x, (m, x.shape[0]))
        _, _, _, norms = selection_outputs(net, X_rep, S, policy.sensitive_index)
        total += (norms[:, None] * (S - p)).sum(axis=0)
        remaining -= m
    return total / n_samples


def _validation_score(net, policy, config, val_data, epoch):
    rng = np.random.default_rng([config.seed, 1, epoch])
    probs = _predict_probs(net, policy, config, val_data.features, rng)
    y_pred = probs.argmax(axis=1)
    y_true = val_data.labels.argmax(axis=1)
    return _macro_recall(y_true, y_pred, val_data.labels.shape[1])


def train(train_data, val_data, config, selection_hook=None):
    """Run the adversarial training loop and return the model from the
    best validation epoch.

    Stops early once validation balanced accuracy has not improved for
    `config.patience` epochs. If the optimization produces non-finite
    values, the run aborts, the parameters from the last finished epoch
    are returned, and the diagnostics field says why.

    selection_hook, if given, is called with every batch's sampled
    selection matrix (instrumentation; used to audit masking).
    """
    X, Y = train_data.features, train_data.labels
    k = train_data.sensitive_index
    n, d = X.shape

    rng = np.random.default_rng(config.seed)
    net = DenseNet.initialize(d, config.hidden_sizes, Y.shape[1], rng)
    policy = SelectorPolicy.initialize(d, k, rng,
                                       mask_sensitive=config.mask_sensitive)
    adam = AdamState.for_params(net.params())

    log = []
    best = None  # (score, epoch, net, policy)
    baseline = None
    diagnostics = None

    for epoch in range(config.max_epochs):
        epoch_start = (net, policy, adam)
        order = rng.permutation(n)
        ce_sum = sens_sum = 0.0
        try:
            for lo in range(0, n, config.batch_size):
                idx = order[lo:lo + config.batch_size]
                policy, S, norms = selector_step(
                    policy, X[idx], net, config.alpha_theta, rng,
                    baseline=baseline if config.score_baseline else None)
                if selection_hook is not None:
                    selection_hook(S)
                net, adam, ce_mean, sens_mean = predictor_step(
                    net, X[idx], Y[idx], S, k, adam,
                    config.alpha_phi, config.sensitivity_weight)
                if config.score_baseline:
                    m = float(norms.mean())
                    baseline = m if baseline is None else 0.9 * baseline + 0.1 * m
                ce_sum += ce_mean * len(idx)
                sens_sum += sens_mean * len(idx)
        except NumericalError as exc:
            net, policy, adam = epoch_start
            diagnostics = f"training aborted during epoch {epoch}: {exc}"
            break

        val_score = _validation_score(net, policy, config, val_data, epoch)
        log.append(EpochRecord(ce_sum / n, sens_sum / n, val_score))
        if best is None or val_score > best[0]:
            best = (val_score, epoch, net, policy)
        elif epoch - best[1] >= config.patience:
            break

    if diagnostics is not None or best is None:
        # diverged (keep last finite parameters) or never trained
        return TrainedModel(net, policy, config, log, -1, diagnostics)
    _, best_epoch, best_net, best_policy = best
    return TrainedModel(best_net, best_policy, config, log, best_epoch, None)
