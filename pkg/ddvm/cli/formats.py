"""
On-disk formats.

flow   .flo   "PIEH" magic (float 202021.25), int32 width, int32 height, then
              row-major interleaved (u, v) float32 in pixel units, little-endian.
              Unknown vectors hold UNKNOWN_FLOW.
depth  .png   16-bit grayscale, metres = value / 256, 0 = no measurement.
arrays .npy   images in [0, 1] and per-pixel variances.
"""

import errno
import logging
import os
import struct
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from PIL import Image

from ddvm.errors import FormatError, OutputError, ShapeError
from ddvm.sparse_data.target import SparseTarget

logger = logging.getLogger(__name__)

FLO_MAGIC = b"PIEH"
TAG_FLOAT = 202021.25
UNKNOWN_FLOW = 1e10
UNKNOWN_FLOW_THRESH = 1e9

DEPTH_SCALE = 256.0
MAX_PNG_DEPTH = 65535 / DEPTH_SCALE

LOCK_NAME = ".ddvm.lock"


def write_flo(path: Path, flow: np.ndarray, mask: Optional[np.ndarray] = None) -> Path:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[-1] != 2:
        raise ShapeError("flow must be (H, W, 2)", flow.shape)
    data = np.array(flow, dtype="<f4")
    if mask is not None:
        data[~np.asarray(mask, dtype=bool)] = UNKNOWN_FLOW
    h, w = data.shape[:2]
    with open(path, "wb") as f:
        f.write(FLO_MAGIC)
        f.write(struct.pack("<ii", w, h))
        f.write(data.tobytes(order="C"))
    return Path(path)


def read_flo(path: Path) -> np.ndarray:
    """(H, W, 2) float32 exactly as stored."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"flow file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != FLO_MAGIC:
        raise FormatError(f"{path}: magic number incorrect, not a .flo file")
    w, h = struct.unpack("<ii", raw[4:12])
    if w < 1 or h < 1:
        raise FormatError(f"{path}: invalid size {w}x{h}")
    expected = 12 + 8 * w * h
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {w}x{h}, found {len(raw)}")
    return np.frombuffer(raw, dtype="<f4", offset=12).reshape(h, w, 2).astype(np.float32)


def read_flo_target(path: Path) -> SparseTarget:
    flow = read_flo(path).astype(np.float64)
    valid = np.all(np.isfinite(flow) & (np.abs(flow) < UNKNOWN_FLOW_THRESH), axis=-1)
    return SparseTarget(np.where(valid[..., None], flow, 0.0), valid)


def write_depth_png(path: Path, depth: np.ndarray, mask: Optional[np.ndarray] = None) -> Path:
    """Valid depths are stored as round(d * 256), at least 1 so they stay distinguishable from holes."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim == 3 and depth.shape[-1] == 1:
        depth = depth[..., 0]
    if depth.ndim != 2:
        raise ShapeError("depth must be (H, W)", depth.shape)
    valid = np.ones(depth.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if np.any(depth[valid] > MAX_PNG_DEPTH) or not np.all(np.isfinite(depth[valid])):
        raise FormatError(f"depth beyond the 16-bit range (max {MAX_PNG_DEPTH:.2f} m) or non-finite")
    stored = np.clip(np.round(depth * DEPTH_SCALE), 1, 65535)
    stored = np.where(valid, stored, 0).astype(np.uint16)
    Image.fromarray(stored).save(path, format="PNG")
    return Path(path)


def read_depth_png(path: Path) -> SparseTarget:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"depth file not found: {path}")
    try:
        with Image.open(path) as img:
            stored = np.array(img).astype(np.int64)
    except OSError as e:
        raise FormatError(f"{path}: unreadable image: {e}") from e
    if stored.ndim != 2:
        raise FormatError(f"{path}: depth maps must be single-channel, got shape {stored.shape}")
    valid = stored > 0
    return SparseTarget(stored / DEPTH_SCALE, valid)


def save_array(path: Path, values: np.ndarray) -> Path:
    np.save(path, np.asarray(values), allow_pickle=False)
    return Path(path)


def load_array(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"array file not found: {path}")
    try:
        return np.load(path, allow_pickle=False)
    except ValueError as e:
        raise FormatError(f"{path}: not a .npy array: {e}") from e


def save_png(path: Path, rgb: np.ndarray) -> Path:
    """Write a uint8 (H, W, 3) or float [0, 1] image."""
    rgb = np.asarray(rgb)
    if rgb.dtype != np.uint8:
        rgb = np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(rgb).save(path, format="PNG")
    return Path(path)


def prepare_output_dir(path: Path, force: bool = False) -> Path:
    """Create the directory; a non-empty one is only reused with force."""
    path = Path(path)
    if path.exists() and any(p.name != LOCK_NAME for p in path.iterdir()) and not force:
        raise OutputError(f"output directory {path} is not empty; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)
    return path


@contextmanager
def output_lock(directory: Path) -> Iterator[Path]:
    """Exclusive lock file held while a command writes into directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except OSError as e:
        if e.errno == errno.EEXIST:
            raise OutputError(f"{directory} is locked by another ddvm process ({lock})") from e
        raise
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield directory
    finally:
        try:
            lock.unlink()
        except FileNotFoundError:
            logger.warning(f"Lock file {lock} vanished before release")
