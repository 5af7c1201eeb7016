"""
Binary checkpoint format.

    magic    b"DDVK"
    version  u32
    header   u32 length + UTF-8 JSON {"arch": {...}, "meta": {...}}
    params   u32 count, then per record:
                 u16 name length, name, u8 ndim, u32 dims..., little-endian float64 data
    ema      same layout as params

All integers are little-endian.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, BinaryIO, Dict, Optional, Tuple

import numpy as np

from ddvm.denoiser.arch import DenoiserArch
from ddvm.denoiser.model import DenoiserModel
from ddvm.errors import CheckpointError, FormatError

logger = logging.getLogger(__name__)

MAGIC = b"DDVK"
FORMAT_VERSION = 1


def _write_table(fh: BinaryIO, table: Dict[str, np.ndarray]) -> None:
    fh.write(struct.pack("<I", len(table)))
    for name in sorted(table):
        arr = np.ascontiguousarray(table[name], dtype="<f8")
        encoded = name.encode("utf-8")
        fh.write(struct.pack("<H", len(encoded)))
        fh.write(encoded)
        fh.write(struct.pack("<B", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated checkpoint at byte {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _read_table(reader: _Reader) -> Dict[str, np.ndarray]:
    (count,) = reader.unpack("<I")
    table: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I") if ndim else ()
        n_bytes = 8 * int(np.prod(shape, dtype=np.int64))
        table[name] = np.frombuffer(reader.take(n_bytes), dtype="<f8").reshape(shape).astype(np.float64)
    return table


def save_checkpoint(model: DenoiserModel, path: Path, meta: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps({"arch": model.arch.to_dict(), "meta": meta or {}}, sort_keys=True).encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        _write_table(fh, model.arrays())
        _write_table(fh, model.ema_params)
    tmp.replace(path)
    logger.info(f"Saved checkpoint to {path}")
    return path


def load_checkpoint(path: Path) -> Tuple[DenoiserModel, Dict[str, Any]]:
    """Read a checkpoint; returns the model and the stored metadata dict."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    reader = _Reader(path.read_bytes(), path)
    if reader.take(4) != MAGIC:
        raise FormatError(f"{path}: not a ddvm checkpoint (bad magic)")
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    (header_len,) = reader.unpack("<I")
    try:
        header = json.loads(reader.take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: corrupt checkpoint header: {e}") from e
    arch = DenoiserArch.from_dict(header.get("arch", {}))
    params = _read_table(reader)
    ema = _read_table(reader)
    if reader.pos != len(reader.data):
        raise FormatError(f"{path}: {len(reader.data) - reader.pos} trailing bytes")
    expected = DenoiserModel.create(arch, np.random.default_rng(0)).arrays()
    missing = sorted(set(expected) - set(params))
    extra = sorted(set(params) - set(expected))
    if missing or extra:
        raise CheckpointError(f"{path}: weights do not match the architecture (missing {missing}, extra {extra})")
    for name, value in params.items():
        if value.shape != expected[name].shape:
            raise CheckpointError(f"{path}: weight '{name}' has shape {value.shape}, expected {expected[name].shape}")
    return DenoiserModel(arch, params, ema), header.get("meta", {})
