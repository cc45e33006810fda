"""Binary checkpoint serialization for parameter dicts.

Wire format (all integers little-endian uint32, floats little-endian
IEEE-754 binary64, arrays row-major):

    magic  b"MBDL1"
    count  uint32                    number of parameters
    repeat count times:
        name_len uint32
        name     name_len bytes of UTF-8
        rank     uint32
        dims     rank * uint32
        data     prod(dims) * float64

Parameters are written sorted by name so files are byte-reproducible.
"""

import struct

import numpy as np

MAGIC = b"MBDL1"


def save_checkpoint(path, params):
    """Write {name: array} to ``path`` in the format above."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            arr = np.asarray(params[name], dtype=np.float64, order="C")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint written by save_checkpoint; returns {name: array}."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: bad magic, not a checkpoint file")
    off = len(MAGIC)

    def take(n):
        nonlocal off
        if off + n > len(blob):
            raise ValueError(f"{path}: truncated checkpoint")
        chunk = blob[off: off + n]
        off += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    params = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
        size = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(take(8 * size), dtype="<f8")
        params[name] = data.reshape(dims).astype(np.float64)
    if off != len(blob):
        raise ValueError(f"{path}: trailing bytes after last parameter")
    return params
