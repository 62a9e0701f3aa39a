"""Trial scoring: cosine similarity, AS-Norm, phrase compensation and fusion."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateCohortError, DimensionMismatchError, ZeroNormError


class CohortSizeWarning(UserWarning):
    """Fewer cohort scores than ``top_n`` are available; all are used."""


@dataclass(frozen=True)
class AsNormConfig:
    top_n: int = 300

    def __post_init__(self):
        if self.top_n < 2:
            raise ValueError("top_n must be >= 2")


@dataclass(frozen=True)
class CompensationConfig:
    alpha: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError("alpha must be finite and >= 0")


@dataclass(frozen=True)
class ScoreTriple:
    spk_norm: float
    phr: float
    total: float


@dataclass(frozen=True)
class CohortSet:
    """Cohort embeddings, one row per (speaker, phrase) model."""

    ids: tuple
    embeddings: np.ndarray

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] == 0:
            raise ValueError("cohort must hold at least one embedding")
        if len(self.ids) != emb.shape[0]:
            raise ValueError("cohort ids and embeddings differ in length")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "embeddings", emb)

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatchError(f"cannot compare embeddings {a.shape} and {b.shape}")
    aa, bb = np.dot(a, a), np.dot(b, b)
    if aa == 0 or bb == 0:
        raise ZeroNormError("cosine similarity of an all-zero embedding")
    # Rounding can push |cos| a hair past 1.
    return float(min(1.0, max(-1.0, np.dot(a, b) / np.sqrt(aa * bb))))


def cohort_scores(e, cohort: CohortSet) -> np.ndarray:
    """Cosine of ``e`` against every cohort entry, in cohort order."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (cohort.dim,):
        raise DimensionMismatchError(f"embedding {e.shape} vs cohort dim {cohort.dim}")
    ne = np.linalg.norm(e)
    nc = np.linalg.norm(cohort.embeddings, axis=1)
    if ne == 0 or np.any(nc == 0):
        raise ZeroNormError("cohort scoring against an all-zero embedding")
    return np.clip(cohort.embeddings @ e / (nc * ne), -1.0, 1.0)


def top_n_stats(scores, top_n: int) -> tuple[float, float]:
    """Mean and population std of the ``top_n`` largest scores.

    Raises:
      DegenerateCohortError: fewer than two scores, or zero spread.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size < top_n:
        warnings.warn(
            f"cohort has {scores.size} scores, fewer than top_n={top_n}; using all",
            CohortSizeWarning,
            stacklevel=2,
        )
    selected = np.sort(scores)[::-1][:top_n]
    if selected.size < 2:
        raise DegenerateCohortError("need at least two cohort scores")
    mu = float(np.mean(selected))
    sigma = float(np.std(selected))
    # Equal scores can leave a rounding-level sigma; test the spread directly.
    if selected[0] == selected[-1] or sigma == 0:
        raise DegenerateCohortError("selected cohort scores have zero variance")
    return mu, sigma


def asnorm_from_stats(raw: float, enroll_stats, test_stats) -> float:
    mu_e, sd_e = enroll_stats
    mu_t, sd_t = test_stats
    return 0.5 * ((raw - mu_e) / sd_e + (raw - mu_t) / sd_t)


def asnorm(
    raw: float,
    enroll_cohort_scores,
    test_cohort_scores,
    cfg: AsNormConfig = AsNormConfig(),
) -> float:
    """Adaptive symmetric normalization of a raw trial score.

    Each side is z-normalized against the mean and population std of its
    ``top_n`` highest cohort scores, and the two z-scores are averaged.
    """
    return asnorm_from_stats(
        raw,
        top_n_stats(enroll_cohort_scores, cfg.top_n),
        top_n_stats(test_cohort_scores, cfg.top_n),
    )


def check_simplex(u, atol: float = 1e-6) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1 or u.size == 0:
        raise ValueError("phrase posterior must be a non-empty vector")
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise ValueError("phrase posterior entries must be finite and >= 0")
    if abs(u.sum() - 1.0) > atol:
        raise ValueError(f"phrase posterior sums to {u.sum()}, not 1")
    return u


def phrase_similarity(uX, uY) -> float:
    """Inner product of two phrase posteriors: the compensation factor."""
    uX = np.asarray(uX, dtype=np.float64)
    uY = np.asarray(uY, dtype=np.float64)
    if uX.shape != uY.shape:
        raise DimensionMismatchError(f"phrase posteriors of size {uX.size} and {uY.size}")
    return float(np.dot(uX, uY))


def total_score(spk_norm: float, phr: float, cfg: CompensationConfig = CompensationConfig()) -> float:
    return spk_norm + cfg.alpha * phr


def score_triple(spk_norm: float, phr: float, cfg: CompensationConfig = CompensationConfig()):
    return ScoreTriple(spk_norm, phr, total_score(spk_norm, phr, cfg))


def fuse(score_lists: Sequence[Sequence[float]]) -> list[float]:
    """Equal-weight sum of per-trial scores across systems.

    For EER/MinDCF this ranks identically to the mean.
    """
    if len(score_lists) == 0:
        raise ValueError("nothing to fuse")
    lengths = {len(s) for s in score_lists}
    if len(lengths) != 1:
        raise DimensionMismatchError(f"score lists differ in length: {sorted(lengths)}")
    fused = [float(x) for x in score_lists[0]]
    for scores in score_lists[1:]:
        fused = [a + float(b) for a, b in zip(fused, scores)]
    return fused


def grid_search_alpha(spk_norm, phr, labels, grid=None, objective=None) -> float:
    """Pick the compensation scale that minimizes ``objective`` (EER by default).

    Args:
      spk_norm: normalized speaker scores of a held-out trial set.
      phr: matching compensation factors.
      labels: boolean target labels.
      grid: candidate alphas; ties resolve to the smallest one.
      objective: callable ``(targets, nontargets) -> cost``.
    """
    from .metrics import ScoreSet, eer

    spk_norm = np.asarray(spk_norm, dtype=np.float64)
    phr = np.asarray(phr, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if grid is None:
        grid = np.concatenate([[0.0], np.geomspace(0.05, 50.0, 40)])
    if objective is None:
        objective = lambda tar, non: eer(ScoreSet(tar, non))  # noqa: E731
    best_alpha, best_cost = None, np.inf
    for alpha in grid:
        total = spk_norm + alpha * phr
        cost = objective(total[labels], total[~labels])
        if cost < best_cost:
            best_alpha, best_cost = float(alpha), cost
    return best_alpha


@dataclass
class TrialScores:
    """Per-trial diagnostics from :func:`score_trials`.

    ``spk_norm`` equals ``raw`` without a cohort; ``phr`` is NaN and
    ``total`` equals ``spk_norm`` without posteriors.
    """

    raw: np.ndarray
    spk_norm: np.ndarray
    phr: np.ndarray
    total: np.ndarray


def score_trials(
    pairs,
    model_embeddings,
    test_embeddings,
    cohort: CohortSet | None = None,
    model_posteriors=None,
    test_posteriors=None,
    asnorm_cfg: AsNormConfig = AsNormConfig(),
    comp_cfg: CompensationConfig = CompensationConfig(),
) -> TrialScores:
    """Score ``(model_id, test_id)`` pairs: cosine, then AS-Norm, then compensation.

    Every stage calls the same functions a caller would compose by hand, so
    results are bit-identical to ``total_score(asnorm(cosine(...)), ...)``.
    Cohort statistics are cached per id.

    Raises:
      KeyError: an id has no embedding or posterior.
    """
    stats_cache: dict[tuple, tuple] = {}

    def stats(side, key, emb):
        if (side, key) not in stats_cache:
            stats_cache[side, key] = top_n_stats(cohort_scores(emb, cohort), asnorm_cfg.top_n)
        return stats_cache[side, key]

    compensate = model_posteriors is not None and test_posteriors is not None
    n = len(pairs)
    raw = np.empty(n)
    spk = np.empty(n)
    phr = np.full(n, np.nan)
    total = np.empty(n)
    for i, (mid, tid) in enumerate(pairs):
        e_m, e_t = model_embeddings[mid], test_embeddings[tid]
        raw[i] = cosine(e_m, e_t)
        if cohort is not None:
            spk[i] = asnorm_from_stats(raw[i], stats("m", mid, e_m), stats("t", tid, e_t))
        else:
            spk[i] = raw[i]
        if compensate:
            phr[i] = phrase_similarity(model_posteriors[mid], test_posteriors[tid])
            total[i] = total_score(spk[i], phr[i], comp_cfg)
        else:
            total[i] = spk[i]
    return TrialScores(raw, spk, phr, total)
