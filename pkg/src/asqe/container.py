"""Binary result container and the on-disk operator cache.

Layout: magic "ASQE", u32 version, u64 header length, UTF-8 JSON header
{"arrays": [{"name", "dtype": "f64le", "shape"}], "meta": {...}}, the raw
little-endian float64 payloads in declared order, then a trailing CRC32 of
everything before it. All integers little-endian. Files are bit-identical
for identical inputs: the header is serialized with sorted keys and arrays
are written contiguously.
"""

import hashlib
import json
import os
import struct
import warnings
import zlib

import numpy as np

from .anderson import AndersonOperator, ball_modes, build_operator
from .errors import ValidationError
from .grid import Field, TorusGrid
from .noise import RngSpec, sample_spatial_white_noise

MAGIC = b"ASQE"
VERSION = 1


def write_container(path, arrays, meta) -> None:
    """arrays is an ordered mapping name -> real float array."""
    entries = []
    payload = []
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": str(name), "dtype": "f64le",
                        "shape": list(a.shape)})
        payload.append(a.tobytes())
    header = json.dumps({"arrays": entries, "meta": meta},
                        sort_keys=True).encode("utf-8")
    buf = b"".join([MAGIC, struct.pack("<I", VERSION),
                    struct.pack("<Q", len(header)), header] + payload)
    buf += struct.pack("<I", zlib.crc32(buf) & 0xFFFFFFFF)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(buf)
    os.replace(tmp, path)


def read_container(path):
    """Returns (arrays dict, meta dict); raises ValidationError on any
    structural defect, including a checksum mismatch."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 20 or buf[:4] != MAGIC:
        raise ValidationError("not a result container: %s" % path)
    (stored,) = struct.unpack("<I", buf[-4:])
    if zlib.crc32(buf[:-4]) & 0xFFFFFFFF != stored:
        raise ValidationError("container checksum mismatch: %s" % path)
    (version,) = struct.unpack("<I", buf[4:8])
    if version > VERSION:
        raise ValidationError("container version %d is newer than supported %d"
                              % (version, VERSION))
    (hlen,) = struct.unpack("<Q", buf[8:16])
    header = json.loads(buf[16:16 + hlen].decode("utf-8"))
    offset = 16 + hlen
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if offset + nbytes > len(buf) - 4:
            raise ValidationError("container payload truncated: %s" % path)
        arrays[entry["name"]] = np.frombuffer(
            buf[offset:offset + nbytes], dtype="<f8").reshape(shape).copy()
        offset += nbytes
    if offset != len(buf) - 4:
        raise ValidationError("container payload has trailing bytes: %s" % path)
    return arrays, header["meta"]


def cache_dir() -> str:
    env = os.environ.get("ASQE_CACHE_DIR")
    if env:
        return env
    return os.path.join(os.path.expanduser("~"), ".cache", "asqe")


def _counterterm_tag(counterterm):
    if counterterm == "auto":
        return "auto"
    return "%.17g" % float(counterterm)


def operator_key(seed, stream_id, cutoff_K, n_per_dim, counterterm):
    return {"seed": int(seed), "stream_id": int(stream_id),
            "cutoff_K": int(cutoff_K), "n_per_dim": int(n_per_dim),
            "counterterm": _counterterm_tag(counterterm)}


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def _cache_path(key) -> str:
    return os.path.join(cache_dir(), "op_%s.asqe" % config_hash(key))


def save_operator(op, seed, stream_id, counterterm) -> str:
    key = operator_key(seed, stream_id, op.cutoff_K, op.grid.n, counterterm)
    path = _cache_path(key)
    os.makedirs(cache_dir(), exist_ok=True)
    arrays = {
        "eigenvalues": op.eigenvalues,
        "vectors_re": op.vectors.real,
        "vectors_im": op.vectors.imag,
        "xi": op.xi.values,
        "shift": np.array([op.shift]),
        "counterterm_value": np.array([op.counterterm]),
    }
    meta = {"config_hash": config_hash(key), "key": key,
            "seeds": {"seed": int(seed), "stream_id": int(stream_id)}}
    write_container(path, arrays, meta)
    return path


def load_operator(seed, stream_id, cutoff_K, n_per_dim, counterterm):
    """Cached operator for the key, or None on miss or corruption."""
    key = operator_key(seed, stream_id, cutoff_K, n_per_dim, counterterm)
    path = _cache_path(key)
    if not os.path.exists(path):
        return None
    try:
        arrays, meta = read_container(path)
    except ValidationError as exc:
        warnings.warn("ignoring bad operator cache (%s); recomputing" % exc)
        return None
    if meta.get("key") != key:
        warnings.warn("operator cache key mismatch; recomputing")
        return None
    grid = TorusGrid(n_per_dim)
    xi = Field(grid, arrays["xi"], check=False)
    vectors = arrays["vectors_re"] + 1j * arrays["vectors_im"]
    return AndersonOperator(grid, cutoff_K, ball_modes(cutoff_K),
                            arrays["eigenvalues"], vectors,
                            float(arrays["counterterm_value"][0]),
                            float(arrays["shift"][0]), xi)


def get_operator(seed, stream_id, cutoff_K, n_per_dim, counterterm="auto",
                 use_cache=True):
    """Build (or fetch) the operator for a (seed, stream, K, n) key.

    The sampled noise is a pure function of the seed pair, so cache hits
    and rebuilds are bit-identical; the cache only skips the eigensolve.
    """
    if use_cache:
        op = load_operator(seed, stream_id, cutoff_K, n_per_dim, counterterm)
        if op is not None:
            return op
    grid = TorusGrid(n_per_dim)
    xi = sample_spatial_white_noise(grid, RngSpec(seed, stream_id))
    op = build_operator(grid, xi, cutoff_K, counterterm)
    if use_cache:
        save_operator(op, seed, stream_id, counterterm)
    return op
