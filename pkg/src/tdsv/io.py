"""Readers and writers for the binary containers and text lists.

Binary containers are little-endian and start with a 4-byte magic:

* ``FMX1`` frame matrix: u32 T, u32 D, T*D f32 row-major.
* ``CPM1`` character posteriors: u32 T, u32 K, T*K f32 row-major.
* ``EMB1`` embeddings / ``PPO1`` phrase posteriors: u32 count, u32 dim, then
  per record u16 id length, UTF-8 id, dim f32.
* ``PRM1`` named parameter blocks: u32 count, then per block u16 name length,
  UTF-8 name, u8 kind (0 f32 array, 1 i64 array, 2 UTF-8 text) and either
  u8 ndim, ndim x u32 shape, data; or u32 length, text bytes.

Text files are tab-separated, one record per line.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FileFormatError
from .features import FrameMatrix
from .pooling import (
    CharPosteriorMatrix,
    CharsetSpec,
    GvladParams,
    LocallyConnectedParams,
    SapParams,
)

_F32 = np.dtype("<f4")
_I64 = np.dtype("<i8")


class _Reader:
    def __init__(self, data: bytes, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FileFormatError(f"{self.path}: truncated file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype, count: int) -> np.ndarray:
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype).astype(np.float64 if dtype == _F32 else np.int64)

    def text(self, fmt="<H") -> str:
        (n,) = self.unpack(fmt)
        return self.take(n).decode("utf-8")

    def magic(self, expected: bytes):
        got = self.take(4)
        if got != expected:
            raise FileFormatError(f"{self.path}: bad magic {got!r}, expected {expected!r}")

    def done(self):
        if self.pos != len(self.data):
            raise FileFormatError(f"{self.path}: {len(self.data) - self.pos} trailing bytes")


def _id_bytes(key: str) -> bytes:
    raw = key.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"id too long: {key[:40]}...")
    return struct.pack("<H", len(raw)) + raw


def _write_matrix(path, magic: bytes, data: np.ndarray) -> None:
    data = np.ascontiguousarray(data, dtype=_F32)
    Path(path).write_bytes(magic + struct.pack("<II", *data.shape) + data.tobytes())


def _read_matrix(path, magic: bytes) -> np.ndarray:
    r = _Reader(Path(path).read_bytes(), path)
    r.magic(magic)
    rows, cols = r.unpack("<II")
    data = r.array(_F32, rows * cols).reshape(rows, cols)
    r.done()
    return data


def write_fmx(path, fm: FrameMatrix) -> None:
    _write_matrix(path, b"FMX1", fm.data)


def read_fmx(path, frame_hop: float = 0.01, feature_kind: str = "generic") -> FrameMatrix:
    return FrameMatrix(_read_matrix(path, b"FMX1"), frame_hop, feature_kind)


def write_cpm(path, post: CharPosteriorMatrix) -> None:
    _write_matrix(path, b"CPM1", post.data)


def read_cpm(path, charset: CharsetSpec | None = None) -> CharPosteriorMatrix:
    data = _read_matrix(path, b"CPM1")
    if charset is None:
        charset = CharsetSpec() if data.shape[1] == len(CharsetSpec()) else CharsetSpec(
            tuple(str(i) for i in range(data.shape[1]))
        )
    # f32 storage perturbs row sums by ~1e-7; renormalize.
    data = data / data.sum(axis=1, keepdims=True)
    return CharPosteriorMatrix(data, charset)


def _write_records(path, magic: bytes, records: dict) -> None:
    records = {k: np.asarray(v, dtype=np.float64) for k, v in records.items()}
    dims = {v.shape for v in records.values()}
    if len(dims) > 1:
        raise ValueError(f"records have mixed shapes {sorted(dims)}")
    dim = dims.pop()[0] if dims else 0
    parts = [magic, struct.pack("<II", len(records), dim)]
    for key, vec in records.items():
        parts.append(_id_bytes(key))
        parts.append(np.ascontiguousarray(vec, dtype=_F32).tobytes())
    Path(path).write_bytes(b"".join(parts))


def _read_records(path, magic: bytes) -> dict:
    r = _Reader(Path(path).read_bytes(), path)
    r.magic(magic)
    count, dim = r.unpack("<II")
    out = {}
    for _ in range(count):
        key = r.text()
        if key in out:
            raise FileFormatError(f"{path}: duplicate id {key!r}")
        out[key] = r.array(_F32, dim)
    r.done()
    return out


def write_embeddings(path, embeddings: dict) -> None:
    _write_records(path, b"EMB1", embeddings)


def read_embeddings(path) -> dict:
    return _read_records(path, b"EMB1")


def write_phrase_posteriors(path, posteriors: dict) -> None:
    _write_records(path, b"PPO1", posteriors)


def read_phrase_posteriors(path) -> dict:
    """Read PPO1 records, renormalizing each onto the simplex after f32 storage."""
    return {k: v / v.sum() for k, v in _read_records(path, b"PPO1").items()}


def write_params(path, blocks: dict) -> None:
    parts = [b"PRM1", struct.pack("<I", len(blocks))]
    for name, value in blocks.items():
        parts.append(_id_bytes(name))
        if isinstance(value, str):
            raw = value.encode("utf-8")
            parts.append(struct.pack("<BI", 2, len(raw)) + raw)
            continue
        arr = np.asarray(value)
        kind, dtype = (1, _I64) if np.issubdtype(arr.dtype, np.integer) else (0, _F32)
        parts.append(struct.pack("<BB", kind, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=dtype).tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_params(path) -> dict:
    r = _Reader(Path(path).read_bytes(), path)
    r.magic(b"PRM1")
    (count,) = r.unpack("<I")
    blocks = {}
    for _ in range(count):
        name = r.text()
        (kind,) = r.unpack("<B")
        if kind == 2:
            blocks[name] = r.text("<I")
            continue
        if kind not in (0, 1):
            raise FileFormatError(f"{path}: block {name!r} has unknown kind {kind}")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        blocks[name] = r.array(_F32 if kind == 0 else _I64, int(np.prod(shape))).reshape(shape)
    r.done()
    return blocks


def params_to_blocks(params) -> dict:
    if isinstance(params, LocallyConnectedParams):
        return {"lc.weights": params.weights, "lc.biases": params.biases,
                "lc.activation": params.activation}
    if isinstance(params, SapParams):
        return {"sap.projection": params.projection, "sap.bias": params.bias,
                "sap.context": params.context}
    if isinstance(params, GvladParams):
        return {"gvp.centers": params.centers, "gvp.assign_weights": params.assign_weights,
                "gvp.assign_bias": params.assign_bias,
                "gvp.n_ghost": np.array([params.n_ghost], dtype=np.int64)}
    raise TypeError(f"cannot serialize {type(params).__name__}")


def params_from_blocks(blocks: dict, method: str):
    """Build the parameter object a pooling method needs from PRM1 blocks."""
    try:
        if method == "CLP":
            return LocallyConnectedParams(
                blocks["lc.weights"], blocks["lc.biases"], blocks.get("lc.activation", "relu")
            )
        if method == "SAP":
            return SapParams(blocks["sap.projection"], blocks["sap.bias"], blocks["sap.context"])
        if method == "GVP":
            return GvladParams(
                blocks["gvp.centers"], blocks["gvp.assign_weights"], blocks["gvp.assign_bias"],
                int(blocks["gvp.n_ghost"][0]),
            )
    except KeyError as exc:
        raise FileFormatError(f"parameter block {exc.args[0]!r} missing for {method}") from None
    raise ValueError(f"{method} pooling has no parameters")


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if line.strip() and not line.startswith("#"):
                yield n, line.split("\t")


def read_trials(path) -> list[tuple[str, str]]:
    out = []
    for n, cols in _lines(path):
        if len(cols) < 2:
            raise FileFormatError(f"{path}:{n}: expected model-id<TAB>test-id")
        out.append((cols[0], cols[1]))
    return out


def write_trials(path, pairs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for model_id, test_id in pairs:
            fh.write(f"{model_id}\t{test_id}\n")


def read_key(path) -> dict:
    """Map ``(model_id, test_id)`` to ``(is_target, four_way_label_or_None)``."""
    out = {}
    for n, cols in _lines(path):
        if len(cols) < 3 or cols[2] not in ("target", "nontarget"):
            raise FileFormatError(f"{path}:{n}: expected model<TAB>test<TAB>target|nontarget")
        out[cols[0], cols[1]] = (cols[2] == "target", cols[3] if len(cols) > 3 else None)
    return out


def write_key(path, rows) -> None:
    """``rows`` are ``(model_id, test_id, 'target'|'nontarget'[, four_way])``."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(row) + "\n")


def format_score(x: float) -> str:
    # repr round-trips float64 exactly.
    return repr(float(x))


def read_scores(path) -> list[tuple[str, str, float]]:
    out = []
    for n, cols in _lines(path):
        if len(cols) < 3:
            raise FileFormatError(f"{path}:{n}: expected model<TAB>test<TAB>score")
        if cols[0] == "model-id":
            continue
        try:
            out.append((cols[0], cols[1], float(cols[2])))
        except ValueError:
            raise FileFormatError(f"{path}:{n}: bad score {cols[2]!r}") from None
    return out


def write_scores(path_or_fh, rows, extra_header: tuple = ()) -> None:
    """Write ``(model, test, score, *extra)`` rows.

    If ``extra_header`` is given, a header line naming the columns is written
    first; readers skip it.
    """
    own = isinstance(path_or_fh, (str, Path))
    fh = open(path_or_fh, "w", encoding="utf-8") if own else path_or_fh
    try:
        if extra_header:
            fh.write("\t".join(("model-id", "test-id", "score") + tuple(extra_header)) + "\n")
        for model_id, test_id, *values in rows:
            fh.write("\t".join([model_id, test_id] + [format_score(v) for v in values]) + "\n")
    finally:
        if own:
            fh.close()


def read_enroll_map(path) -> dict:
    out = {}
    for n, cols in _lines(path):
        if len(cols) != 2:
            raise FileFormatError(f"{path}:{n}: expected model-id<TAB>utt1,utt2,utt3")
        out[cols[0]] = tuple(cols[1].split(","))
    return out


def write_enroll_map(path, enroll_map: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for model_id, utts in enroll_map.items():
            fh.write(f"{model_id}\t{','.join(utts)}\n")


def read_config(path) -> dict:
    """Parse a line-oriented ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FileFormatError(f"{path}:{n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out
