"""Image loading, patch extraction, normalization and train/test splitting."""

from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from .core import SIGMA_FLOOR, DataMatrix, DimensionMismatch
from .formats import FormatError

log = logging.getLogger(__name__)

LUMA = np.array([0.299, 0.587, 0.114])
CIFAR_PIXELS = 3 * 32 * 32
CIFAR_LABEL_BYTES = {"cifar10": 1, "cifar100": 2}


class TruncatedFile(ValueError):
    pass


class PatchTooLarge(ValueError):
    pass


class NotEnoughPatches(ValueError):
    pass


@dataclass(frozen=True)
class ImageSet:
    images: List[np.ndarray]
    source_tag: str = ""

    def __post_init__(self):
        if self.images:
            shape = self.images[0].shape
            for img in self.images:
                if img.shape != shape:
                    raise DimensionMismatch(f"mixed image shapes {shape} and {img.shape}")

    def __len__(self) -> int:
        return len(self.images)

    def as_array(self) -> np.ndarray:
        return np.stack(self.images) if self.images else np.zeros((0, 0, 0))


@dataclass(frozen=True)
class PatchConfig:
    patch_size: int = 8
    stride: int = 8
    train_count: int = 20000
    test_count: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.patch_size < 1 or self.stride < 1:
            raise ValueError("patch_size and stride must be positive")
        if self.train_count < 1 or self.test_count < 0:
            raise ValueError("train_count must be >= 1 and test_count >= 0")

    @property
    def non_overlapping(self) -> bool:
        return self.stride == self.patch_size


def rgb_to_gray(planes: np.ndarray) -> np.ndarray:
    """BT.601 luma of a ``(..., 3, h, w)`` stack of R, G, B planes."""
    return np.tensordot(planes, LUMA, axes=([-3], [0]))


def load_cifar_binary(path, variant: str = "cifar100") -> ImageSet:
    """Read a CIFAR-10/100 binary batch as 32x32 grayscale images in [0, 1].

    Labels are skipped.  The pixel block of each record is 1024 R, 1024 G,
    1024 B bytes, each plane row-major.
    """
    if variant not in CIFAR_LABEL_BYTES:
        raise ValueError(f"variant must be cifar10 or cifar100, got {variant!r}")
    raw = np.fromfile(os.fspath(path), dtype=np.uint8)
    rec = CIFAR_LABEL_BYTES[variant] + CIFAR_PIXELS
    if raw.size == 0 or raw.size % rec:
        raise TruncatedFile(f"{path}: {raw.size} bytes is not a multiple of the {rec}-byte record")
    recs = raw.reshape(-1, rec)[:, CIFAR_LABEL_BYTES[variant]:]
    planes = recs.reshape(-1, 3, 32, 32).astype(np.float64) / 255.0
    gray = np.clip(rgb_to_gray(planes), 0.0, 1.0)
    return ImageSet(list(gray), source_tag=variant)


def _pgm_tokens(buf: bytes, count: int, name: str):
    # header: magic, width, height, maxval, separated by whitespace / comments
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError(f"{name}: truncated PGM header")
        tokens.append(buf[start:pos])
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    path = Path(path)
    buf = path.read_bytes()
    name = path.name
    if not buf.startswith(b"P5"):
        raise FormatError(f"{name}: not a binary P5 PGM")
    try:
        tokens, offset = _pgm_tokens(buf, 4, name)
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"{name}: bad PGM header ({exc})") from None
    if not 0 < maxval <= 65535 or w < 1 or h < 1:
        raise FormatError(f"{name}: unsupported PGM geometry {w}x{h} maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    need = w * h * dtype.itemsize
    body = buf[offset:offset + need]
    if len(body) != need:
        raise FormatError(f"{name}: pixel data truncated")
    return np.frombuffer(body, dtype=dtype).reshape(h, w).astype(np.float64) / maxval


def write_pgm(path, img: np.ndarray, maxval: int = 255) -> None:
    img = np.asarray(img)
    h, w = img.shape
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    data = np.clip(np.rint(img * maxval), 0, maxval).astype(dtype)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(data.tobytes())


def load_gray_images(directory, format: str = "pgm") -> ImageSet:
    """Load every ``*.pgm`` file of a directory in lexicographic order."""
    if format != "pgm":
        raise ValueError(f"unsupported image format {format!r}")
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory}: not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".pgm")
    if not files:
        raise FileNotFoundError(f"{directory}: no .pgm files")
    return ImageSet([read_pgm(p) for p in files], source_tag=str(directory))


def extract_patches(imgs: ImageSet, cfg: PatchConfig) -> DataMatrix:
    """Flatten patches row-major into columns, image by image, scanning each
    image top-left to bottom-right."""
    if not cfg.non_overlapping:
        warnings.warn("stride != patch_size: overlapping patches", stacklevel=2)
    stack = imgs.as_array()
    if stack.ndim != 3 or stack.shape[0] == 0:
        raise DimensionMismatch("no images to extract patches from")
    _, h, w = stack.shape
    p, s = cfg.patch_size, cfg.stride
    if p > min(h, w):
        raise PatchTooLarge(f"patch size {p} exceeds image size {h}x{w}")
    win = np.lib.stride_tricks.sliding_window_view(stack, (p, p), axis=(1, 2))[:, ::s, ::s]
    # win: (N, rows, cols, p, p) -> columns ordered image, row, col
    cols = win.reshape(-1, p * p).T
    return DataMatrix(np.ascontiguousarray(cols))


def normalize(X: DataMatrix, mode: str = "feature", noise_sigma: float = None) -> DataMatrix:
    """Center and scale the columns of ``X``.

    ``mode``:

    * ``"feature"`` -- per-feature population mean/std over the columns;
    * ``"global"`` -- one scalar mean/std shared by all features;
    * ``"noise"`` -- per-feature mean, every feature divided by the known
      noise level ``noise_sigma`` so the noise has unit variance.

    Scales below ``SIGMA_FLOOR`` are replaced by the floor.  Statistics are
    stored broadcast to length ``d`` in every mode.
    """
    x = X.values
    if x.shape[1] < 2:
        raise DimensionMismatch("normalization needs at least 2 samples")
    d = x.shape[0]
    if mode == "feature":
        mu, sigma = x.mean(axis=1), x.std(axis=1)
    elif mode == "global":
        mu, sigma = np.full(d, x.mean()), np.full(d, x.std())
    elif mode == "noise":
        if noise_sigma is None or not noise_sigma > 0:
            raise ValueError("noise mode needs a positive noise_sigma")
        mu, sigma = x.mean(axis=1), np.full(d, float(noise_sigma))
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    sigma = np.maximum(sigma, SIGMA_FLOOR)
    return apply_normalization(X, mu, sigma)


def apply_normalization(X: DataMatrix, mu, sigma) -> DataMatrix:
    """Normalize ``X`` with externally supplied (e.g. training) statistics."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if mu.shape != (X.d,) or sigma.shape != (X.d,):
        raise DimensionMismatch("normalization statistics do not match feature dimension")
    return DataMatrix((X.values - mu[:, None]) / sigma[:, None], mu, sigma)


def denormalize(X) -> np.ndarray:
    """Map normalized values back to the raw scale."""
    if isinstance(X, DataMatrix):
        if not X.is_normalized:
            return X.values.copy()
        return X.values * X.sigma[:, None] + X.mu[:, None]
    raise TypeError("denormalize expects a normalized DataMatrix")


def denormalize_array(values: np.ndarray, mu, sigma) -> np.ndarray:
    return np.asarray(values) * np.asarray(sigma)[:, None] + np.asarray(mu)[:, None]


def split(X: DataMatrix, cfg: PatchConfig):
    """Disjoint seeded random train/test column subsets."""
    need = cfg.train_count + cfg.test_count
    if X.m < need:
        raise NotEnoughPatches(f"need {need} patches, only {X.m} available")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    idx = rng.permutation(X.m)[:need]
    return X.columns(idx[: cfg.train_count]), X.columns(idx[cfg.train_count:])


def prepare(X_raw: DataMatrix, cfg: PatchConfig, mode: str = "feature", noise_sigma: float = None):
    """Split raw patches, fit normalization on train, apply it to both."""
    train, test = split(X_raw, cfg)
    train_n = normalize(train, mode=mode, noise_sigma=noise_sigma)
    return train_n, apply_normalization(test, train_n.mu, train_n.sigma) if test.m else None
