"""Detection metrics: DET operating points, EER and normalized MinDCF.

A trial is accepted iff its score is >= the threshold.  All rates are
fractions; rendering as percentages is left to callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScoreSet:
    targets: np.ndarray
    nontargets: np.ndarray

    def __post_init__(self):
        tar = np.asarray(self.targets, dtype=np.float64).ravel()
        non = np.asarray(self.nontargets, dtype=np.float64).ravel()
        if tar.size == 0 or non.size == 0:
            raise ValueError("score set needs at least one target and one nontarget")
        if not (np.all(np.isfinite(tar)) and np.all(np.isfinite(non))):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "targets", tar)
        object.__setattr__(self, "nontargets", non)

    @classmethod
    def from_labels(cls, scores, labels):
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.asarray(labels, dtype=bool)
        return cls(scores[labels], scores[~labels])


@dataclass(frozen=True)
class DcfParams:
    p_target: float = 0.01
    c_miss: float = 10.0
    c_fa: float = 1.0

    def __post_init__(self):
        if not 0 < self.p_target < 1:
            raise ValueError("p_target must be in (0, 1)")
        if self.c_miss < 0 or self.c_fa < 0 or (self.c_miss == 0 and self.c_fa == 0):
            raise ValueError("costs must be >= 0 and not both zero")


@dataclass(frozen=True)
class DetPoint:
    threshold: float
    far: float
    frr: float


def det_curve(s: ScoreSet):
    """DET polyline as arrays ``(thresholds, far, frr)``, thresholds ascending.

    The first point (threshold -inf) accepts everything and the last (+inf)
    rejects everything; in between there is one point per distinct score.
    """
    thresholds = np.unique(np.concatenate([s.targets, s.nontargets]))
    tar = np.sort(s.targets)
    non = np.sort(s.nontargets)
    # Rejected = strictly below the threshold.
    n_miss = np.searchsorted(tar, thresholds, side="left")
    n_fa = non.size - np.searchsorted(non, thresholds, side="left")
    frr = np.concatenate([[0], n_miss, [tar.size]]) / tar.size
    far = np.concatenate([[non.size], n_fa, [0]]) / non.size
    thresholds = np.concatenate([[-np.inf], thresholds, [np.inf]])
    return thresholds, far, frr


def det_points(s: ScoreSet) -> list[DetPoint]:
    return [DetPoint(float(t), float(a), float(r)) for t, a, r in zip(*det_curve(s))]


def _eer_from_curve(far, frr) -> float:
    diff = frr - far  # non-decreasing from -1 to +1
    j = int(np.argmax(diff >= 0))
    if diff[j] == 0:
        return float(frr[j])
    # Lines far(t) and frr(t) on [j-1, j] cross where diff crosses zero.
    t = -diff[j - 1] / (diff[j] - diff[j - 1])
    return float(far[j - 1] + t * (far[j] - far[j - 1]))


def eer(s: ScoreSet) -> float:
    """Equal error rate, interpolated on the DET polyline."""
    _, far, frr = det_curve(s)
    return _eer_from_curve(far, frr)


def min_dcf(s: ScoreSet, p: DcfParams = DcfParams()) -> float:
    """Minimum detection cost normalized by the best trivial system."""
    _, far, frr = det_curve(s)
    w_miss = p.c_miss * p.p_target
    w_fa = p.c_fa * (1.0 - p.p_target)
    cost = w_miss * frr + w_fa * far
    return float(np.min(cost) / min(w_miss, w_fa))


def evaluate(scores, labels, p: DcfParams = DcfParams()) -> dict:
    s = ScoreSet.from_labels(scores, labels)
    return {
        "eer": eer(s),
        "mindcf": min_dcf(s, p),
        "n_target": int(s.targets.size),
        "n_nontarget": int(s.nontargets.size),
    }
