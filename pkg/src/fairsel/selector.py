"""Stochastic feature-selection policy.

A single global logit vector defines independent per-feature Bernoulli
selection probabilities through a sigmoid. The sensitive feature is
masked out of sampling by default, so no sampled selection ever carries
it. The score-function gradient of the log selection probability is
what drives the selector's training updates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, FairselError, NumericalError

# logits are clamped before the sigmoid so selection probabilities stay
# strictly inside (0, 1) and log-probabilities stay finite (float64 keeps
# sigmoid strictly below 1 up to ~36.7)
LOGIT_LIMIT = 20.0


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class SelectorPolicy:
    """Per-feature selection logits plus the masked sensitive index."""

    logits: np.ndarray
    sensitive_index: int
    mask_sensitive: bool = True

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 1:
            raise DimensionError("selector logits", "(d,)", self.logits.shape)
        if not np.isfinite(self.logits).all():
            raise NumericalError("non-finite selector logits")
        if not 0 <= self.sensitive_index < self.logits.shape[0]:
            raise ValueError(
                f"sensitive index {self.sensitive_index} outside [0, {self.logits.shape[0]})")

    @property
    def dim(self):
        return self.logits.shape[0]

    @classmethod
    def initialize(cls, dim, sensitive_index, rng, scale=0.01,
                   mask_sensitive=True):
        """Small random logits, so initial selection probabilities sit
        near 1/2 without being exactly symmetric."""
        return cls(rng.normal(0.0, scale, size=dim), sensitive_index,
                   mask_sensitive)

    def with_logits(self, logits):
        return replace(self, logits=np.asarray(logits, dtype=np.float64))


def probabilities(policy):
    """Selection probability per feature; exactly 0 at the masked index."""
    p = sigmoid(np.clip(policy.logits, -LOGIT_LIMIT, LOGIT_LIMIT))
    if policy.mask_sensitive:
        p[policy.sensitive_index] = 0.0
    return p


def sample_selection(p, rng):
    """One selection vector of independent Bernoulli(p_j) draws."""
    p = np.asarray(p, dtype=np.float64)
    return (rng.random(p.shape[0]) < p).astype(np.int8)


def sample_selection_batch(p, n_rows, rng):
    """n_rows independent selection vectors, one row per draw."""
    p = np.asarray(p, dtype=np.float64)
    return (rng.random((n_rows, p.shape[0])) < p).astype(np.int8)


def _validate_pair(p, s):
    p = np.asarray(p, dtype=np.float64)
    s = np.asarray(s)
    if p.shape != s.shape:
        raise DimensionError("selection vector", p.shape, s.shape)
    if np.any((s == 1) & (p <= 0.0)):
        raise FairselError("selection includes a masked (zero-probability) feature")
    return p, s


def pi_prob(p, s):
    """Probability of the joint selection vector s under independent
    Bernoulli gates: prod_j p_j^{s_j} (1-p_j)^{1-s_j}."""
    p, s = _validate_pair(p, s)
    return float(np.prod(np.where(s == 1, p, 1.0 - p)))


def log_pi_grad(p, s):
    """Gradient of log pi w.r.t. the logits: s_j - p_j componentwise.

    Zero at the masked index (there s_j = p_j = 0), so masked logits
    never receive an update.
    """
    p, s = _validate_pair(p, s)
    return s.astype(np.float64) - p


def enumerate_selections(d, masked_index=None):
    """All selection vectors over d features, as an (m, d) int8 matrix.

    With masked_index set, only vectors with a 0 there are produced
    (2^(d-1) rows). Intended for small d; used by enumeration oracles.
    """
    if d > 20:
        raise ValueError(f"enumeration over 2^{d} selections is not sensible")
    codes = np.arange(2 ** d, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(d)[None, :]) & 1
    out = bits.astype(np.int8)
    if masked_index is not None:
        out = out[out[:, masked_index] == 0]
    return out
