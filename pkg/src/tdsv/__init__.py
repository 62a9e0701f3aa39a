"""Text-dependent speaker verification back-end.

Character-level pooling, cosine scoring with AS-Norm, phrase-posterior score
compensation, fusion, and EER/MinDCF evaluation.
"""

from .features import AudioClip, FeatureConfig, FrameMatrix, logmel_frames, stft_frames
from .metrics import DcfParams, ScoreSet, det_points, eer, min_dcf
from .pooling import (
    CharPosteriorMatrix,
    CharsetSpec,
    LocallyConnectedParams,
    PoolingConfig,
    clp_aggregate,
    locally_connected,
    pool,
    statistics_pool,
)
from .scoring import (
    AsNormConfig,
    CohortSet,
    CompensationConfig,
    asnorm,
    cosine,
    fuse,
    phrase_similarity,
    score_trials,
    total_score,
)

__version__ = "0.1.0"
