import struct
from pathlib import Path

import numpy as np

from ..error import DataIOError, FormatError


def read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as ex:
        raise DataIOError(f'cannot read {str(path)!r}: {ex.strerror}') from ex


def write_bytes(path, data):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as ex:
        raise DataIOError(f'cannot write {str(path)!r}: {ex.strerror}') from ex


class ByteReader:
    """Sequential little-endian reader that reports the offset of failures"""

    def __init__(self, raw, path):
        self.raw = raw
        self.path = path
        self.offset = 0

    def fail(self, message, offset=None):
        raise FormatError(
            self.path, message, self.offset if offset is None else offset)

    @property
    def remaining(self):
        return len(self.raw) - self.offset

    def take(self, n, what):
        if self.remaining < n:
            self.fail(f'truncated {what}: expected {n} bytes, '
                      f'got {self.remaining}', len(self.raw))
        chunk = self.raw[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def magic(self, expected):
        if self.raw[:len(expected)] != expected:
            self.fail(f'bad magic, expected {expected!r}', 0)
        self.offset = len(expected)

    def unpack(self, fmt, what):
        s = struct.Struct('<' + fmt)
        start = self.offset
        values = s.unpack(self.take(s.size, what))
        return start, values

    def u32(self, what):
        return self.unpack('I', what)[1][0]

    def version(self, supported):
        start, (version,) = self.unpack('I', 'version')
        if version != supported:
            self.fail(f'unsupported version {version}, expected {supported}',
                      start)
        return version

    def floats(self, count, dtype, what):
        dtype = np.dtype(dtype)
        start = self.offset
        chunk = self.take(count * dtype.itemsize, what)
        values = np.frombuffer(chunk, dtype=dtype).astype(np.float64)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            self.fail(f'non-finite value in {what}',
                      start + int(bad[0]) * dtype.itemsize)
        return values

    def finish(self):
        if self.remaining:
            self.fail(f'{self.remaining} trailing bytes after payload')
