# Copyright (c) the UGICM Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Reader/writer for the ugicm tensor archive format (see include/ugicm/archive.h)."""
import json
import struct

import numpy as np

MAGIC = b"UGTA"
VERSION = 1


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _shape4(shape):
    shape = tuple(int(d) for d in shape)
    if len(shape) > 4:
        raise ValueError(f"rank {len(shape)} not supported")
    return (1,) * (4 - len(shape)) + shape


def write_archive(path, tensors, metadata=None, float32=False):
    """tensors: iterable of (name, array-like); 1-D/2-D arrays are left-padded to 4-D."""
    out = bytearray(MAGIC)
    meta = json.dumps(metadata or {}, sort_keys=True).encode()
    out += struct.pack("<IQ", VERSION, len(meta)) + meta
    tensors = list(tensors)
    out += struct.pack("<Q", len(tensors))
    for name, value in tensors:
        arr = np.asarray(value, dtype=np.float32 if float32 else np.float64)
        key = name.encode()
        out += struct.pack("<I", len(key)) + key
        out += struct.pack("<B", 1 if float32 else 0)
        out += struct.pack("<4i", *_shape4(arr.shape))
        out += arr.astype("<f4" if float32 else "<f8").tobytes(order="C")
    out += struct.pack("<Q", fnv1a64(bytes(out)))
    with open(path, "wb") as f:
        f.write(out)


def read_archive(path):
    data = open(path, "rb").read()
    if data[:4] != MAGIC:
        raise ValueError("bad magic")
    body, (digest,) = data[:-8], struct.unpack("<Q", data[-8:])
    if fnv1a64(body) != digest:
        raise ValueError("digest mismatch")
    pos = 4
    version, meta_len = struct.unpack_from("<IQ", body, pos)
    pos += 12
    metadata = json.loads(body[pos:pos + meta_len] or b"{}")
    pos += meta_len
    (count,) = struct.unpack_from("<Q", body, pos)
    pos += 8
    tensors = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<I", body, pos)
        pos += 4
        name = body[pos:pos + n].decode()
        pos += n
        (dtype,) = struct.unpack_from("<B", body, pos)
        pos += 1
        shape = struct.unpack_from("<4i", body, pos)
        pos += 16
        fmt = "<f4" if dtype == 1 else "<f8"
        size = int(np.prod(shape))
        arr = np.frombuffer(body, dtype=fmt, count=size, offset=pos).reshape(shape)
        pos += size * np.dtype(fmt).itemsize
        tensors[name] = arr.astype(np.float64)
    return metadata, tensors
