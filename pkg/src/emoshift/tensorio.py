"""Raw binary tensor containers.

Two formats live here:

* single-tensor files (``frames.bin``, ``audio.bin``): little-endian
  float32, C-order, with a fixed header ``RT32 | version | ndim | dims``.
* multi-array container (checkpoints): a JSON index of named arrays
  followed by their raw bytes. Serialization is fully deterministic so a
  save -> load -> save round trip is byte-identical.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import DataError

TENSOR_MAGIC = b"RT32"
CONTAINER_MAGIC = b"ESCK"
FORMAT_VERSION = 1

_DTYPES = {"f4": "<f4", "f8": "<f8", "i8": "<i8"}


def write_tensor(path, array) -> None:
    """Write a float32 tensor with the RT32 header."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def read_tensor(path) -> np.ndarray:
    """Read a tensor written by :func:`write_tensor`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != TENSOR_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {TENSOR_MAGIC!r}")
        version, ndim = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported tensor format version {version}")
        shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        data = fh.read()
    expected = int(np.prod(shape)) * 4
    if len(data) != expected:
        raise DataError(f"{path}: payload is {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype="<f4").reshape(shape).copy()


def _dtype_tag(arr: np.ndarray) -> str:
    for tag, np_dtype in _DTYPES.items():
        if arr.dtype == np.dtype(np_dtype):
            return tag
    raise DataError(f"unsupported container dtype {arr.dtype}")


def write_container(path, arrays: dict[str, np.ndarray]) -> None:
    """Write named arrays (float32/float64/int64) to one binary container.

    The index is sorted by name; bytes are a pure function of the input.
    """
    entries = []
    offset = 0
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype == np.float32:
            arr = arr.astype("<f4")
        elif arr.dtype == np.float64:
            arr = arr.astype("<f8")
        elif arr.dtype == np.int64:
            arr = arr.astype("<i8")
        raw = arr.tobytes()
        entries.append(
            {
                "name": name,
                "dtype": _dtype_tag(arr),
                "shape": list(arr.shape),
                "offset": offset,
                "length": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    index = json.dumps(entries, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(CONTAINER_MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(index)))
        fh.write(index)
        for raw in blobs:
            fh.write(raw)


def read_container(path) -> dict[str, np.ndarray]:
    """Read a container written by :func:`write_container`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CONTAINER_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {CONTAINER_MAGIC!r}")
        version, index_len = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported container version {version}")
        index = json.loads(fh.read(index_len).decode())
        payload = fh.read()
    out = {}
    for entry in index:
        raw = payload[entry["offset"] : entry["offset"] + entry["length"]]
        arr = np.frombuffer(raw, dtype=_DTYPES[entry["dtype"]]).reshape(entry["shape"])
        out[entry["name"]] = arr.copy()
    return out
