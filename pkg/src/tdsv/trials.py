"""Text-dependent verification protocol and synthetic benchmarks.

A model is enrolled from three utterances of one speaker saying one phrase.
A trial pairs a model with a test utterance; only a matching speaker *and*
phrase (Target-Correct) counts as a target, the other three trial types are
impostors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import FrameMatrix
from .pooling import BLANK, CharPosteriorMatrix, CharsetSpec
from .scoring import CohortSet, check_simplex

N_ENROLL = 3


class TrialType(str, enum.Enum):
    TARGET_CORRECT = "TargetCorrect"
    TARGET_WRONG = "TargetWrong"
    IMPOSTOR_CORRECT = "ImpostorCorrect"
    IMPOSTOR_WRONG = "ImpostorWrong"
    UNKNOWN = "Unknown"

    @property
    def is_target(self) -> bool:
        return self is TrialType.TARGET_CORRECT

    @property
    def key_label(self) -> str:
        return "target" if self.is_target else "nontarget"


@dataclass(frozen=True)
class Utterance:
    id: str
    speaker: str
    phrase: str
    embedding: np.ndarray
    phrase_posterior: np.ndarray | None = None

    def __post_init__(self):
        if not (self.id and self.speaker and self.phrase):
            raise ValueError("utterance ids must be non-empty")
        emb = np.asarray(self.embedding, dtype=np.float64)
        if emb.ndim != 1 or not np.all(np.isfinite(emb)):
            raise ValueError(f"{self.id}: embedding must be a finite vector")
        object.__setattr__(self, "embedding", emb)
        if self.phrase_posterior is not None:
            object.__setattr__(self, "phrase_posterior", check_simplex(self.phrase_posterior))


@dataclass(frozen=True)
class EnrollmentModel:
    id: str
    speaker: str
    phrase: str
    utterance_ids: tuple
    embedding: np.ndarray
    phrase_posterior: np.ndarray | None = None


@dataclass(frozen=True)
class Trial:
    model_id: str
    test_id: str
    truth: TrialType = TrialType.UNKNOWN


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize an all-zero embedding")
    return v / n


def model_id_for(speaker: str, phrase: str) -> str:
    return f"{speaker}:{phrase}"


def combine_enrollment(embeddings, posteriors=None):
    """Mean embedding (L2-normalized) and mean posterior (renormalized)."""
    embedding = _unit(np.mean(embeddings, axis=0))
    posterior = None
    if posteriors is not None:
        posterior = np.mean(posteriors, axis=0)
        posterior = posterior / posterior.sum()
    return embedding, posterior


def build_enrollment(utts: Sequence[Utterance], model_id: str | None = None) -> EnrollmentModel:
    """Average three same-speaker, same-phrase utterances into a model.

    The embedding mean is L2-normalized; the posterior mean is renormalized
    onto the simplex (absent if any utterance lacks a posterior).
    """
    if len(utts) != N_ENROLL:
        raise ValueError(f"enrollment needs exactly {N_ENROLL} utterances, got {len(utts)}")
    speakers = {u.speaker for u in utts}
    phrases = {u.phrase for u in utts}
    if len(speakers) != 1 or len(phrases) != 1:
        raise ValueError(
            f"enrollment utterances mix speakers {sorted(speakers)} / phrases {sorted(phrases)}"
        )
    speaker, phrase = speakers.pop(), phrases.pop()
    # Sorting makes the float summation order independent of input order.
    utts = sorted(utts, key=lambda u: u.id)
    posteriors = None
    if all(u.phrase_posterior is not None for u in utts):
        posteriors = [u.phrase_posterior for u in utts]
    embedding, posterior = combine_enrollment([u.embedding for u in utts], posteriors)
    return EnrollmentModel(
        model_id or model_id_for(speaker, phrase),
        speaker,
        phrase,
        tuple(u.id for u in utts),
        embedding,
        posterior,
    )


def label_trial(model: EnrollmentModel, test: Utterance) -> TrialType:
    same_speaker = model.speaker == test.speaker
    same_phrase = model.phrase == test.phrase
    if same_speaker:
        return TrialType.TARGET_CORRECT if same_phrase else TrialType.TARGET_WRONG
    return TrialType.IMPOSTOR_CORRECT if same_phrase else TrialType.IMPOSTOR_WRONG


def build_cohort(utts: Sequence[Utterance]) -> CohortSet:
    """One unit-norm entry per (speaker, phrase) pair, in first-seen order."""
    if not utts:
        raise ValueError("cannot build a cohort from no utterances")
    groups: dict[tuple, list] = {}
    for u in utts:
        groups.setdefault((u.speaker, u.phrase), []).append(u.embedding)
    ids = [model_id_for(spk, phr) for spk, phr in groups]
    embeddings = np.stack([_unit(np.mean(v, axis=0)) for v in groups.values()])
    return CohortSet(tuple(ids), embeddings)


def cross_trials(models: Sequence[EnrollmentModel], tests: Sequence[Utterance]) -> list[Trial]:
    return [Trial(m.id, t.id, label_trial(m, t)) for m in models for t in tests]


def select_trials(trials: Sequence[Trial], counts: dict, seed: int = 0) -> list[Trial]:
    """Subsample trials by type, keeping input order.

    ``counts`` maps a :class:`TrialType` to the number of trials kept (types
    not listed are kept in full).
    """
    rng = np.random.default_rng(seed)
    keep = np.ones(len(trials), dtype=bool)
    for ttype, n in counts.items():
        idx = np.array([i for i, t in enumerate(trials) if t.truth == ttype], dtype=int)
        if idx.size > n:
            drop = rng.choice(idx, size=idx.size - n, replace=False)
            keep[drop] = False
    return [t for t, k in zip(trials, keep) if k]


# ---------------------------------------------------------------------------
# Embedding-level synthetic benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Embedding-level speaker x phrase benchmark.

    Each pair gets ``utts_per_pair`` utterances: the first three enroll the
    model and the rest are test utterances.  Cohort speakers are disjoint
    from evaluation speakers but say the same phrases.
    """

    n_speakers: int = 20
    n_phrases: int = 10
    utts_per_pair: int = 5
    embed_dim: int = 64
    speaker_scale: float = 1.0
    phrase_scale: float = 1.0
    noise_scale: float = 2.0
    phrase_leak: float = 0.0
    posterior_eps: float = 0.1
    n_cohort_speakers: int = 40
    seed: int = 0

    def __post_init__(self):
        if min(self.n_speakers, self.n_phrases, self.embed_dim, self.n_cohort_speakers) < 1:
            raise ValueError("counts must be >= 1")
        if self.utts_per_pair < N_ENROLL + 1:
            raise ValueError(f"utts_per_pair must be >= {N_ENROLL + 1} (enrollment + test)")
        if min(self.speaker_scale, self.phrase_scale, self.noise_scale) <= 0:
            raise ValueError("scales must be > 0")
        if not 0 <= self.phrase_leak <= 1:
            raise ValueError("phrase_leak must be in [0, 1]")
        if not 0 <= self.posterior_eps < 1:
            raise ValueError("posterior_eps must be in [0, 1)")


@dataclass
class SynthDataset:
    utterances: list
    models: list
    trials: list
    cohort_utterances: list
    enroll_map: dict = field(default_factory=dict)

    @property
    def test_utterances(self) -> list:
        enrolled = {uid for ids in self.enroll_map.values() for uid in ids}
        return [u for u in self.utterances if u.id not in enrolled]

    @property
    def key(self) -> list:
        return [(t.model_id, t.test_id, t.truth.key_label) for t in self.trials]


def phrase_posterior(true_index: int, n_phrases: int, eps: float) -> np.ndarray:
    """``1 - eps`` on the true phrase, ``eps`` spread evenly over the rest."""
    if n_phrases == 1:
        return np.ones(1)
    u = np.full(n_phrases, eps / (n_phrases - 1))
    u[true_index] = 1.0 - eps
    return u


def synth_generate(cfg: SynthConfig) -> SynthDataset:
    """Draw utterance embeddings ``speaker + leak * phrase + noise``."""
    rng = np.random.default_rng(cfg.seed)
    d = cfg.embed_dim
    n_total = cfg.n_speakers + cfg.n_cohort_speakers
    speaker_vecs = rng.standard_normal((n_total, d)) * cfg.speaker_scale
    phrase_vecs = rng.standard_normal((cfg.n_phrases, d)) * cfg.phrase_scale
    posteriors = [phrase_posterior(p, cfg.n_phrases, cfg.posterior_eps) for p in range(cfg.n_phrases)]

    def draw(s_idx, speaker):
        out = []
        for p in range(cfg.n_phrases):
            phrase = f"phr{p:02d}"
            for k in range(cfg.utts_per_pair):
                noise = rng.standard_normal(d) * cfg.noise_scale
                emb = speaker_vecs[s_idx] + cfg.phrase_leak * phrase_vecs[p] + noise
                out.append(Utterance(f"{speaker}-{phrase}-{k:02d}", speaker, phrase, emb, posteriors[p]))
        return out

    utterances, models, tests, enroll_map = [], [], [], {}
    for s in range(cfg.n_speakers):
        utts = draw(s, f"spk{s:03d}")
        utterances.extend(utts)
        for p in range(cfg.n_phrases):
            group = utts[p * cfg.utts_per_pair:(p + 1) * cfg.utts_per_pair]
            model = build_enrollment(group[:N_ENROLL])
            models.append(model)
            enroll_map[model.id] = model.utterance_ids
            tests.extend(group[N_ENROLL:])
    cohort_utts = []
    for c in range(cfg.n_cohort_speakers):
        cohort_utts.extend(draw(cfg.n_speakers + c, f"coh{c:03d}"))
    return SynthDataset(utterances, models, cross_trials(models, tests), cohort_utts, enroll_map)


# ---------------------------------------------------------------------------
# Frame-level synthetic benchmark (for pooling comparisons)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrameSynthConfig:
    """Frame sequences with aligned character posteriors.

    Each phrase is a random letter string.  A frame voicing character ``c``
    is ``speaker + phrase_leak * content[c] + noise``; blank frames carry no
    content.  Posteriors put a softmax bump of height ``posterior_sharpness``
    on the true symbol over Gaussian logit noise.
    """

    n_speakers: int = 10
    n_phrases: int = 10
    utts_per_pair: int = 5
    feat_dim: int = 16
    phrase_len: int = 8
    speaker_scale: float = 1.0
    phrase_leak: float = 1.0
    noise_scale: float = 1.0
    posterior_sharpness: float = 12.0
    min_char_frames: int = 2
    max_char_frames: int = 6
    max_blank_frames: int = 3
    seed: int = 0

    def __post_init__(self):
        if min(self.n_speakers, self.n_phrases, self.feat_dim, self.phrase_len) < 1:
            raise ValueError("counts must be >= 1")
        if self.utts_per_pair < N_ENROLL + 1:
            raise ValueError(f"utts_per_pair must be >= {N_ENROLL + 1}")
        if not 1 <= self.min_char_frames <= self.max_char_frames:
            raise ValueError("require 1 <= min_char_frames <= max_char_frames")


@dataclass(frozen=True)
class FrameUtterance:
    id: str
    speaker: str
    phrase: str
    text: str
    frames: FrameMatrix
    posteriors: CharPosteriorMatrix


def synth_frames(cfg: FrameSynthConfig, charset: CharsetSpec = CharsetSpec()) -> list[FrameUtterance]:
    rng = np.random.default_rng(cfg.seed)
    letters = [s for s in charset.symbols if s.isalpha() and len(s) == 1]
    blank = charset.index(BLANK)
    k = len(charset)
    content = rng.standard_normal((k, cfg.feat_dim))
    content[blank] = 0.0
    speakers = rng.standard_normal((cfg.n_speakers, cfg.feat_dim)) * cfg.speaker_scale
    texts = ["".join(rng.choice(letters, size=cfg.phrase_len)) for _ in range(cfg.n_phrases)]

    out = []
    for s in range(cfg.n_speakers):
        for p, text in enumerate(texts):
            for u in range(cfg.utts_per_pair):
                labels = []
                for ch in text:
                    labels += [blank] * int(rng.integers(0, cfg.max_blank_frames + 1))
                    labels += [charset.index(ch)] * int(
                        rng.integers(cfg.min_char_frames, cfg.max_char_frames + 1)
                    )
                labels = np.array(labels)
                t = labels.size
                h = (
                    speakers[s]
                    + cfg.phrase_leak * content[labels]
                    + cfg.noise_scale * rng.standard_normal((t, cfg.feat_dim))
                )
                logits = rng.standard_normal((t, k))
                logits[np.arange(t), labels] += cfg.posterior_sharpness
                logits -= logits.max(axis=1, keepdims=True)
                post = np.exp(logits)
                post /= post.sum(axis=1, keepdims=True)
                speaker, phrase = f"spk{s:03d}", f"phr{p:02d}"
                out.append(FrameUtterance(
                    f"{speaker}-{phrase}-{u:02d}", speaker, phrase, text,
                    FrameMatrix(h), CharPosteriorMatrix(post, charset),
                ))
    return out


def enroll_and_test(utts: Sequence[Utterance]):
    """Split per (speaker, phrase): first three enroll a model, the rest test."""
    groups: dict[tuple, list] = {}
    for u in utts:
        groups.setdefault((u.speaker, u.phrase), []).append(u)
    models, tests = [], []
    for group in groups.values():
        if len(group) < N_ENROLL:
            continue
        models.append(build_enrollment(group[:N_ENROLL]))
        tests.extend(group[N_ENROLL:])
    return models, tests
