"""Binary checkpoint container.

Layout (all integers little-endian)::

    b"RRNN"                magic
    u32                    format version
    u32 + bytes            JSON header: model config, vocab digest, tensor count, extras
    per tensor:
        u32 + bytes        name (UTF-8)
        u32                rank
        u64 * rank         dims
        f64 * prod(dims)   values, row-major
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointVersionError, CorruptCheckpointError, VocabMismatchError
from .model import ModelConfig, QAModel

MAGIC = b"RRNN"
VERSION = 1


def encode(model: QAModel, vocab_digest: str, extra: dict | None = None) -> bytes:
    header = {
        "config": model.config.to_dict(),
        "vocab_digest": vocab_digest,
        "n_tensors": len(model.params),
        "extra": extra or {},
    }
    hdr = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(hdr)), hdr]
    for name, arr in model.params.items():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise CorruptCheckpointError(f"file ends inside {what} (offset {self.pos}, need {n} bytes)")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]


def decode(buf: bytes, expect_vocab_digest: str | None = None) -> tuple[QAModel, dict]:
    """Parse checkpoint bytes into ``(model, header)``."""
    r = _Reader(buf)
    if r.take(4, "magic") != MAGIC:
        raise CorruptCheckpointError("not a checkpoint file (bad magic)")
    version = r.u32("version")
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version}, this build reads {VERSION}")
    try:
        header = json.loads(r.take(r.u32("header length"), "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"unreadable header: {exc}") from None
    if expect_vocab_digest is not None and header.get("vocab_digest") != expect_vocab_digest:
        raise VocabMismatchError(
            f"checkpoint vocabulary {header.get('vocab_digest', '?')[:12]} "
            f"does not match data vocabulary {expect_vocab_digest[:12]}"
        )
    params = {}
    for _ in range(int(header["n_tensors"])):
        name = r.take(r.u32("tensor name length"), "tensor name").decode("utf-8")
        rank = r.u32(f"{name} rank")
        dims = struct.unpack(f"<{rank}Q", r.take(8 * rank, f"{name} dims"))
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        data = np.frombuffer(r.take(8 * count, f"{name} data"), dtype="<f8")
        params[name] = data.astype(np.float64).reshape(dims)
    if r.pos != len(buf):
        raise CorruptCheckpointError(f"{len(buf) - r.pos} trailing bytes after last tensor")
    model = QAModel(ModelConfig(**header["config"]), params)
    return model, header


def save_checkpoint(model: QAModel, path, vocab_digest: str, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode(model, vocab_digest, extra))
    tmp.replace(path)
    return path


def load_checkpoint(path, expect_vocab_digest: str | None = None) -> tuple[QAModel, dict]:
    return decode(Path(path).read_bytes(), expect_vocab_digest)
