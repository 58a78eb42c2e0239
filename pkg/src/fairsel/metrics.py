"""Prediction-quality and group-fairness metrics.

All metrics operate on binary outcomes (favorable label = 1) tagged
with a privileged / unprivileged group flag. Degenerate inputs (a group
missing the class a rate needs) raise DegenerateGroupError rather than
silently reporting zero, because a silent zero would fake fairness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateGroupError, DimensionError


@dataclass
class GroupedOutcomes:
    """True labels, predicted labels and group membership, row-aligned.

    Labels are 0/1 with 1 the favorable outcome; privileged is a boolean
    flag per record.
    """

    y_true: np.ndarray
    y_pred: np.ndarray
    privileged: np.ndarray

    def __post_init__(self):
        self.y_true = np.asarray(self.y_true, dtype=np.int64)
        self.y_pred = np.asarray(self.y_pred, dtype=np.int64)
        self.privileged = np.asarray(self.privileged, dtype=bool)
        n = self.y_true.shape[0]
        if self.y_pred.shape != (n,) or self.privileged.shape != (n,):
            raise DimensionError("outcome arrays", (n,),
                                 (self.y_pred.shape, self.privileged.shape))
        for name, arr in (("y_true", self.y_true), ("y_pred", self.y_pred)):
            if arr.size and not np.isin(arr, (0, 1)).all():
                raise DataError(f"{name} must contain only 0/1 labels")

    def __len__(self):
        return self.y_true.shape[0]

    @classmethod
    def from_records(cls, records):
        """Build from an iterable of (true, pred, privileged) triples."""
        rows = list(records)
        if rows:
            t, p, g = zip(*rows)
        else:
            t, p, g = (), (), ()
        return cls(np.array(t, dtype=np.int64), np.array(p, dtype=np.int64),
                   np.array(g, dtype=bool))


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def tpr(self, group_name="population"):
        if self.tp + self.fn == 0:
            raise DegenerateGroupError(
                f"{group_name} has no positive (label 1) examples")
        return self.tp / (self.tp + self.fn)

    def tnr(self, group_name="population"):
        if self.tn + self.fp == 0:
            raise DegenerateGroupError(
                f"{group_name} has no negative (label 0) examples")
        return self.tn / (self.tn + self.fp)

    def fpr(self, group_name="population"):
        return 1.0 - self.tnr(group_name)


def confusion_counts(outcomes, privileged=None):
    """Confusion counts, optionally restricted to one group.

    privileged=None uses all records; True / False restricts to the
    corresponding group.
    """
    t, p = outcomes.y_true, outcomes.y_pred
    if privileged is not None:
        mask = outcomes.privileged == privileged
        t, p = t[mask], p[mask]
    return ConfusionCounts(
        tp=int(((t == 1) & (p == 1)).sum()),
        fp=int(((t == 0) & (p == 1)).sum()),
        tn=int(((t == 0) & (p == 0)).sum()),
        fn=int(((t == 1) & (p == 0)).sum()),
    )


def _require_nonempty(outcomes):
    if len(outcomes) == 0:
        raise DataError("metric requires at least one outcome record")


def _require_groups(outcomes):
    _require_nonempty(outcomes)
    if not outcomes.privileged.any():
        raise DegenerateGroupError("privileged group is empty")
    if outcomes.privileged.all():
        raise DegenerateGroupError("unprivileged group is empty")


def accuracy(outcomes):
    """Fraction of records classified correctly."""
    _require_nonempty(outcomes)
    return float((outcomes.y_true == outcomes.y_pred).mean())


def balanced_accuracy(outcomes):
    """Average of true positive rate and true negative rate."""
    _require_nonempty(outcomes)
    c = confusion_counts(outcomes)
    return 0.5 * (c.tpr() + c.tnr())


def equal_opportunity_diff(outcomes):
    """Absolute gap in true positive rate between the groups."""
    _require_groups(outcomes)
    priv = confusion_counts(outcomes, privileged=True)
    unpriv = confusion_counts(outcomes, privileged=False)
    return abs(priv.tpr("privileged group") - unpriv.tpr("unprivileged group"))


def average_odds_diff(outcomes, variant="balanced-accuracy-gap"):
    """Absolute average-odds gap between the groups.

    The default variant is the absolute difference in per-group balanced
    accuracy. variant="tpr-fpr-average" instead averages the absolute
    TPR and FPR gaps (the convention of several fairness toolkits),
    offered for cross-toolkit comparison.
    """
    _require_groups(outcomes)
    priv = confusion_counts(outcomes, privileged=True)
    unpriv = confusion_counts(outcomes, privileged=False)
    tpr_p, tpr_u = priv.tpr("privileged group"), unpriv.tpr("unprivileged group")
    tnr_p, tnr_u = priv.tnr("privileged group"), unpriv.tnr("unprivileged group")
    if variant == "balanced-accuracy-gap":
        return abs(0.5 * (tpr_p + tnr_p) - 0.5 * (tpr_u + tnr_u))
    if variant == "tpr-fpr-average":
        return 0.5 * (abs(tpr_p - tpr_u) + abs((1 - tnr_p) - (1 - tnr_u)))
    raise ValueError(f"unknown average_odds_diff variant {variant!r}")


def theil_index(outcomes):
    """Generalized-entropy (alpha = 1) dispersion of per-record benefits.

    Benefit b_i = predicted_i - true_i + 1, so a correct prediction
    scores 1, a false positive 2 and a false negative 0. Returns
    (1/n) * sum (b_i/mu) ln(b_i/mu) with 0 ln 0 = 0; zero means every
    record received the same benefit.
    """
    _require_nonempty(outcomes)
    b = outcomes.y_pred - outcomes.y_true + 1
    mu = float(b.mean())
    if mu == 0.0:
        raise DataError("Theil index undefined: zero mean benefit "
                        "(every record is a false negative)")
    ratios = b / mu
    terms = np.where(b > 0, ratios * np.log(np.where(b > 0, ratios, 1.0)), 0.0)
    return float(terms.mean())
