"""Utterance-level pooling of frame sequences.

Four methods are provided: statistics pooling (SP), self-attentive pooling
(SAP), GhostVLAD (GVP) and character-level pooling (CLP).  CLP weights the
frames by per-frame character posteriors from a CTC recogniser, producing one
representation per character, and then reduces each character block with its
own affine map (a locally-connected layer).
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, MissingInputError
from .features import FrameMatrix

POOLING_METHODS = ("SP", "SAP", "GVP", "CLP")
ACTIVATIONS = {
    "relu": lambda x: np.maximum(x, 0.0),
    "tanh": np.tanh,
    "identity": lambda x: x,
}

BLANK = "<blank>"
# Jasper/CTC English vocabulary: space, a-z, apostrophe, then the CTC blank.
DEFAULT_SYMBOLS = (" ",) + tuple(string.ascii_lowercase) + ("'", BLANK)


@dataclass(frozen=True)
class CharsetSpec:
    symbols: tuple = DEFAULT_SYMBOLS

    def __post_init__(self):
        symbols = tuple(self.symbols)
        if not symbols:
            raise ValueError("charset must not be empty")
        if len(set(symbols)) != len(symbols):
            raise ValueError("charset labels must be unique")
        object.__setattr__(self, "symbols", symbols)

    def __len__(self):
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        return self.symbols.index(symbol)


@dataclass(frozen=True)
class CharPosteriorMatrix:
    """Per-frame character posteriors, one simplex row per frame."""

    data: np.ndarray
    charset: CharsetSpec = field(default_factory=CharsetSpec)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValueError("posterior matrix must be T x K with T >= 1")
        if data.shape[1] != len(self.charset):
            raise DimensionMismatchError(
                f"posterior width {data.shape[1]} != charset size {len(self.charset)}"
            )
        if not np.all(np.isfinite(data)) or np.any(data < 0):
            raise ValueError("posteriors must be finite and non-negative")
        if not np.allclose(data.sum(axis=1), 1.0, rtol=0.0, atol=1e-5):
            raise ValueError("every posterior row must sum to 1")
        object.__setattr__(self, "data", data)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class PoolingConfig:
    tau: float = 1e-3
    method: str = "CLP"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.method not in POOLING_METHODS:
            raise ValueError(f"unknown pooling method {self.method!r}")


@dataclass(frozen=True)
class CharacterAggregate:
    per_char: np.ndarray  # K x D1

    @property
    def concatenated(self) -> np.ndarray:
        return self.per_char.reshape(-1)

    @property
    def n_chars(self) -> int:
        return self.per_char.shape[0]

    @property
    def dim(self) -> int:
        return self.per_char.shape[1]


def _finite(name, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{name} parameters must be finite")


@dataclass(frozen=True)
class LocallyConnectedParams:
    weights: np.ndarray  # K x D2 x D1
    biases: np.ndarray  # K x D2
    activation: str = "relu"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.biases, dtype=np.float64)
        if w.ndim != 3 or b.shape != w.shape[:2]:
            raise DimensionMismatchError(
                f"locally-connected weights {w.shape} and biases {b.shape} disagree"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        _finite("locally-connected", w, b)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def n_chars(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[2]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def random(cls, rng, n_chars: int, in_dim: int, out_dim: int = 20, activation="relu"):
        rng = np.random.default_rng(rng)
        w = rng.standard_normal((n_chars, out_dim, in_dim)) / np.sqrt(in_dim)
        return cls(w, np.zeros((n_chars, out_dim)), activation)


@dataclass(frozen=True)
class SapParams:
    """Self-attentive pooling: logits ``context . tanh(W h + b)``."""

    projection: np.ndarray  # A x D
    bias: np.ndarray  # A
    context: np.ndarray  # A

    def __post_init__(self):
        w = np.asarray(self.projection, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        u = np.asarray(self.context, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],) or u.shape != (w.shape[0],):
            raise DimensionMismatchError("SAP projection, bias and context disagree")
        _finite("SAP", w, b, u)
        object.__setattr__(self, "projection", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "context", u)

    @property
    def in_dim(self) -> int:
        return self.projection.shape[1]

    @classmethod
    def random(cls, rng, in_dim: int, attn_dim: int = 64):
        rng = np.random.default_rng(rng)
        return cls(
            rng.standard_normal((attn_dim, in_dim)) / np.sqrt(in_dim),
            np.zeros(attn_dim),
            rng.standard_normal(attn_dim) / np.sqrt(attn_dim),
        )


@dataclass(frozen=True)
class GvladParams:
    """GhostVLAD centres and soft-assignment weights.

    The last ``n_ghost`` rows of every array belong to ghost clusters, which
    absorb assignment mass but are dropped from the output.
    """

    centers: np.ndarray  # (C + G) x D
    assign_weights: np.ndarray  # (C + G) x D
    assign_bias: np.ndarray  # C + G
    n_ghost: int = 2

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        w = np.asarray(self.assign_weights, dtype=np.float64)
        b = np.asarray(self.assign_bias, dtype=np.float64)
        if c.ndim != 2 or w.shape != c.shape or b.shape != (c.shape[0],):
            raise DimensionMismatchError("GhostVLAD centers, weights and bias disagree")
        if not 0 <= int(self.n_ghost) < c.shape[0]:
            raise ValueError("n_ghost must leave at least one real cluster")
        _finite("GhostVLAD", c, w, b)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "assign_weights", w)
        object.__setattr__(self, "assign_bias", b)
        object.__setattr__(self, "n_ghost", int(self.n_ghost))

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[0] - self.n_ghost

    @property
    def in_dim(self) -> int:
        return self.centers.shape[1]

    @classmethod
    def random(cls, rng, in_dim: int, n_clusters: int = 8, n_ghost: int = 2):
        rng = np.random.default_rng(rng)
        n = n_clusters + n_ghost
        return cls(
            rng.standard_normal((n, in_dim)),
            rng.standard_normal((n, in_dim)) / np.sqrt(in_dim),
            np.zeros(n),
            n_ghost,
        )


def _softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def _l2_normalize(x, axis=-1):
    norm = np.linalg.norm(x, axis=axis, keepdims=True)
    return np.divide(x, norm, out=np.zeros_like(x), where=norm > 0)


def statistics_pool(fm: FrameMatrix) -> np.ndarray:
    """Mean and population standard deviation over frames, concatenated (2D)."""
    h = fm.data
    return np.concatenate([h.mean(axis=0), h.std(axis=0)])


def self_attentive_pool(fm: FrameMatrix, p: SapParams) -> np.ndarray:
    if fm.dim != p.in_dim:
        raise DimensionMismatchError(f"SAP expects D={p.in_dim}, got {fm.dim}")
    logits = np.tanh(fm.data @ p.projection.T + p.bias) @ p.context
    return _softmax(logits) @ fm.data


def ghostvlad_pool(fm: FrameMatrix, p: GvladParams) -> np.ndarray:
    if fm.dim != p.in_dim:
        raise DimensionMismatchError(f"GhostVLAD expects D={p.in_dim}, got {fm.dim}")
    h = fm.data
    assign = _softmax(h @ p.assign_weights.T + p.assign_bias, axis=1)  # T x (C+G)
    c = p.n_clusters
    assign, centers = assign[:, :c], p.centers[:c]
    # sum_i a_ic (h_i - mu_c) = A^T H - (sum_i a_ic) mu_c
    vlad = assign.T @ h - assign.sum(axis=0)[:, None] * centers
    vlad = _l2_normalize(vlad, axis=1)
    return _l2_normalize(vlad.reshape(-1))


def _clp_aggregate(h: np.ndarray, post: np.ndarray, tau: float) -> np.ndarray:
    # tau may be 0 here; only used directly by tests.
    numer = post.T @ h + tau
    denom = post.sum(axis=0) + tau
    return numer / denom[:, None]


def clp_aggregate(
    fm: FrameMatrix, post: CharPosteriorMatrix, cfg: PoolingConfig = PoolingConfig()
) -> CharacterAggregate:
    """Posterior-weighted average of frames for every character.

    ``tau`` is added to every numerator component and to the denominator, so
    a character with no posterior mass gets the all-ones vector.
    """
    if fm.n_frames != post.n_frames:
        raise DimensionMismatchError(
            f"frame count {fm.n_frames} != posterior frame count {post.n_frames}"
        )
    return CharacterAggregate(_clp_aggregate(fm.data, post.data, cfg.tau))


def locally_connected(agg: CharacterAggregate, p: LocallyConnectedParams) -> np.ndarray:
    """Apply ``f(W_k v_k + b_k)`` block by block and concatenate (D2 * K)."""
    if agg.n_chars != p.n_chars or agg.dim != p.in_dim:
        raise DimensionMismatchError(
            f"aggregate is {agg.n_chars} x {agg.dim}, params expect {p.n_chars} x {p.in_dim}"
        )
    f = ACTIVATIONS[p.activation]
    blocks = [f(p.weights[k] @ agg.per_char[k] + p.biases[k]) for k in range(agg.n_chars)]
    return np.concatenate(blocks)


def pool(
    fm: FrameMatrix,
    method: str,
    posteriors: CharPosteriorMatrix | None = None,
    params=None,
    cfg: PoolingConfig | None = None,
) -> np.ndarray:
    """Pool ``fm`` into a fixed-length embedding with the named method.

    ``params`` must be a :class:`SapParams`, :class:`GvladParams` or
    :class:`LocallyConnectedParams` matching the method; SP takes none.
    """
    if method not in POOLING_METHODS:
        raise ValueError(f"unknown pooling method {method!r}")
    if method == "SP":
        return statistics_pool(fm)

    if method == "CLP" and posteriors is None:
        raise MissingInputError("CLP pooling requires character posteriors")
    expected = {"SAP": SapParams, "GVP": GvladParams, "CLP": LocallyConnectedParams}[method]
    if not isinstance(params, expected):
        raise MissingInputError(f"{method} pooling requires {expected.__name__}")
    if method == "SAP":
        return self_attentive_pool(fm, params)
    if method == "GVP":
        return ghostvlad_pool(fm, params)

    cfg = cfg or PoolingConfig(method="CLP")
    return locally_connected(clp_aggregate(fm, posteriors, cfg), params)
