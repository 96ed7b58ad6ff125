"""Binary and text file formats.

PDL1 patch cache::

    b"PDL1" | u32le d | u32le m | d*m float64le, column-major

PDLM model::

    b"PDLM" | u32le d | u32le n | D (d*n float64le, column-major)
    | mu (d float64le) | sigma (d float64le) | UTF-8 key=value trailer
"""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .core import HyperParams

CACHE_MAGIC = b"PDL1"
MODEL_MAGIC = b"PDLM"
_HDR = struct.Struct("<4sII")


class FormatError(ValueError):
    pass


@contextmanager
def atomic_open(path, mode: str = "w", **kw):
    """Write to a temp file next to ``path`` and rename on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        with open(tmp, mode, **kw) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pack_matrix(M: np.ndarray) -> bytes:
    return np.asarray(M, dtype="<f8").tobytes(order="F")


def write_cache(path, M) -> None:
    M = np.asarray(getattr(M, "values", M), dtype=np.float64)
    d, m = M.shape
    with atomic_open(path, "wb") as fh:
        fh.write(_HDR.pack(CACHE_MAGIC, d, m))
        fh.write(_pack_matrix(M))


def read_cache(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if len(buf) < _HDR.size:
        raise FormatError(f"{path}: file too short for PDL1 header")
    magic, d, m = _HDR.unpack_from(buf)
    if magic != CACHE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {CACHE_MAGIC!r}")
    need = _HDR.size + 8 * d * m
    if len(buf) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(buf)}")
    return np.frombuffer(buf, dtype="<f8", offset=_HDR.size).reshape((d, m), order="F").astype(np.float64)


def write_model(path, D, mu=None, sigma=None, hp: HyperParams = None, extra: dict = None) -> None:
    D = np.asarray(getattr(D, "atoms", D), dtype=np.float64)
    d, n = D.shape
    mu = np.zeros(d) if mu is None else np.asarray(mu, dtype=np.float64)
    sigma = np.ones(d) if sigma is None else np.asarray(sigma, dtype=np.float64)
    meta = dict(hp.to_dict()) if hp is not None else {}
    meta.update(extra or {})
    trailer = "".join(f"{k}={v}\n" for k, v in meta.items())
    with atomic_open(path, "wb") as fh:
        fh.write(_HDR.pack(MODEL_MAGIC, d, n))
        fh.write(_pack_matrix(D))
        fh.write(np.asarray(mu, dtype="<f8").tobytes())
        fh.write(np.asarray(sigma, dtype="<f8").tobytes())
        fh.write(trailer.encode("utf-8"))


def read_model(path):
    """Return ``(D, mu, sigma, meta)``; ``meta`` is the raw key=value dict."""
    buf = Path(path).read_bytes()
    if len(buf) < _HDR.size:
        raise FormatError(f"{path}: file too short for PDLM header")
    magic, d, n = _HDR.unpack_from(buf)
    if magic != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    off = _HDR.size
    body = 8 * (d * n + 2 * d)
    if len(buf) < off + body:
        raise FormatError(f"{path}: truncated model body")
    D = np.frombuffer(buf, "<f8", d * n, off).reshape((d, n), order="F").astype(np.float64)
    off += 8 * d * n
    mu = np.frombuffer(buf, "<f8", d, off).astype(np.float64)
    sigma = np.frombuffer(buf, "<f8", d, off + 8 * d).astype(np.float64)
    try:
        text = buf[off + 16 * d:].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: trailer is not UTF-8") from exc
    meta = parse_key_values(text, str(path))
    return D, mu, sigma, meta


def parse_key_values(text: str, source: str = "<config>") -> dict:
    """Parse flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{source}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def hp_from_meta(meta: dict) -> HyperParams:
    known = set(HyperParams().to_dict())
    return HyperParams.from_dict({k: v for k, v in meta.items() if k in known})


def write_csv(path, header, rows) -> None:
    with atomic_open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_trace(path, trace) -> None:
    write_csv(path, ["iter", "total", "fit", "l1", "linf", "active_atoms"],
              [[t, repr(a), repr(b), repr(c), repr(d), n] for t, a, b, c, d, n in trace.rows()])


def write_usage(path, usage) -> None:
    """``(atom_index, frequency)`` sorted by decreasing frequency."""
    usage = np.asarray(usage)
    order = np.argsort(-usage, kind="stable")
    write_csv(path, ["atom_index", "frequency"], [[int(i), repr(float(usage[i]))] for i in order])


def write_ground_truth(prefix, D_true, R_true, z) -> None:
    """Sidecar for synthetic sets: ``<prefix>.D.pdl``, ``<prefix>.R.pdl``, ``<prefix>.z.bin``."""
    prefix = str(prefix)
    write_cache(prefix + ".D.pdl", D_true)
    write_cache(prefix + ".R.pdl", R_true)
    with atomic_open(prefix + ".z.bin", "wb") as fh:
        fh.write(np.asarray(z, dtype=np.uint8).tobytes())


def read_ground_truth(prefix):
    prefix = str(prefix)
    z = np.frombuffer(Path(prefix + ".z.bin").read_bytes(), dtype=np.uint8).copy()
    return read_cache(prefix + ".D.pdl"), read_cache(prefix + ".R.pdl"), z
