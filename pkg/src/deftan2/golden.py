"""Golden tensor dump: the cross-implementation exchange format.

Layout: magic b"DFT2", u8 rank, rank little-endian u32 dims, then
row-major little-endian float32 values. Every weight export and attention
map dump uses this format.
"""

import struct

import numpy as np

MAGIC = b"DFT2"


class GoldenFormatError(Exception):
    pass


def write_tensor(fh, array):
    array = np.asarray(array, dtype="<f4")
    if array.ndim == 0:
        array = array.reshape(1)
    if array.ndim > 255:
        raise GoldenFormatError("rank exceeds u8")
    fh.write(MAGIC)
    fh.write(struct.pack("<B", array.ndim))
    for dim in array.shape:
        if dim <= 0 or dim > 0xFFFFFFFF:
            raise GoldenFormatError(f"dimension {dim} not a positive u32")
        fh.write(struct.pack("<I", dim))
    fh.write(np.ascontiguousarray(array).tobytes())


def read_tensor(fh):
    magic = fh.read(4)
    if magic != MAGIC:
        raise GoldenFormatError(f"bad magic {magic!r}")
    raw = fh.read(1)
    if len(raw) != 1:
        raise GoldenFormatError("truncated header")
    rank = raw[0]
    dims = []
    for _ in range(rank):
        raw = fh.read(4)
        if len(raw) != 4:
            raise GoldenFormatError("truncated dims")
        dims.append(struct.unpack("<I", raw)[0])
    count = int(np.prod(dims)) if dims else 1
    payload = fh.read(4 * count)
    if len(payload) != 4 * count:
        raise GoldenFormatError("truncated payload")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def save_tensor(path, array):
    with open(path, "wb") as fh:
        write_tensor(fh, array)


def load_tensor(path):
    with open(path, "rb") as fh:
        return read_tensor(fh)
