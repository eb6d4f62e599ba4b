"""Time-tag streams and their on-disk formats.

TTB1 binary layout (little-endian)::

    b"TTB1"             4 bytes magic
    u32 channel_count   channels are numbered 0 .. channel_count - 1
    repeated records:   u64 timestamp_ps, u8 channel

Records must be non-decreasing in timestamp. The CSV form has the header
``timestamp_ps,channel``.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fileio import atomic_write_bytes, atomic_write_text

MAGIC = b"TTB1"
HEADER_SIZE = 8
RECORD_DTYPE = np.dtype([("t", "<u8"), ("ch", "u1")])
RECORD_SIZE = RECORD_DTYPE.itemsize  # 9, packed

CH_SYNC = 0
CH_1A, CH_1B = 1, 2
CH_2A, CH_2B = 3, 4
N_CHANNELS = 5


class TimeTagFormatError(ValueError):
    """Malformed time-tag data; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


@dataclass(eq=False)
class TimeTagStream:
    timestamps: np.ndarray  # int64 picoseconds
    channels: np.ndarray  # uint8
    n_channels: int = N_CHANNELS

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.channels = np.asarray(self.channels, dtype=np.uint8)
        if self.timestamps.shape != self.channels.shape or self.timestamps.ndim != 1:
            raise ValueError("timestamps and channels must be 1-D arrays of equal length")
        if self.timestamps.size and self.timestamps[0] < 0:
            raise ValueError("timestamps must be non-negative")
        bad = np.flatnonzero(np.diff(self.timestamps) < 0)
        if bad.size:
            raise ValueError(f"timestamps decrease at record {bad[0] + 1}")
        if self.channels.size and int(self.channels.max()) >= self.n_channels:
            raise ValueError(f"channel id {int(self.channels.max())} outside declared set")

    def __len__(self):
        return self.timestamps.size

    def __eq__(self, other):
        if not isinstance(other, TimeTagStream):
            return NotImplemented
        return (
            self.n_channels == other.n_channels
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.channels, other.channels)
        )

    @classmethod
    def empty(cls, n_channels: int = N_CHANNELS) -> "TimeTagStream":
        return cls(np.empty(0, np.int64), np.empty(0, np.uint8), n_channels)

    def to_bytes(self) -> bytes:
        rec = np.empty(len(self), dtype=RECORD_DTYPE)
        rec["t"] = self.timestamps
        rec["ch"] = self.channels
        return MAGIC + struct.pack("<I", self.n_channels) + rec.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "TimeTagStream":
        if len(data) < HEADER_SIZE:
            raise TimeTagFormatError("file shorter than the TTB1 header", len(data))
        if data[:4] != MAGIC:
            raise TimeTagFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", 0)
        (n_channels,) = struct.unpack_from("<I", data, 4)
        body = len(data) - HEADER_SIZE
        if body % RECORD_SIZE:
            last = HEADER_SIZE + (body // RECORD_SIZE) * RECORD_SIZE
            raise TimeTagFormatError("truncated record", last)
        rec = np.frombuffer(data, dtype=RECORD_DTYPE, offset=HEADER_SIZE)
        ts = rec["t"]
        if ts.size and ts.max() > np.iinfo(np.int64).max:
            i = int(np.argmax(ts > np.iinfo(np.int64).max))
            raise TimeTagFormatError("timestamp overflows int64", HEADER_SIZE + i * RECORD_SIZE)
        bad = np.flatnonzero(ts[1:] < ts[:-1])
        if bad.size:
            i = int(bad[0]) + 1
            raise TimeTagFormatError("non-monotone timestamp", HEADER_SIZE + i * RECORD_SIZE)
        ch = rec["ch"]
        over = np.flatnonzero(ch >= n_channels)
        if over.size:
            i = int(over[0])
            raise TimeTagFormatError(
                f"channel {int(ch[i])} not in declared set of {n_channels}",
                HEADER_SIZE + i * RECORD_SIZE + 8,
            )
        return cls(ts.astype(np.int64), ch.copy(), int(n_channels))

    def write_ttb1(self, path) -> Path:
        return atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def read_ttb1(cls, path) -> "TimeTagStream":
        return cls.from_bytes(Path(path).read_bytes())

    def write_csv(self, path) -> Path:
        lines = ["timestamp_ps,channel"]
        lines += [f"{int(t)},{int(c)}" for t, c in zip(self.timestamps, self.channels)]
        return atomic_write_text(path, "\n".join(lines) + "\n")

    @classmethod
    def read_csv(cls, path, n_channels: int = N_CHANNELS) -> "TimeTagStream":
        with open(path) as fh:
            header = fh.readline().strip()
            if header != "timestamp_ps,channel":
                raise TimeTagFormatError(f"unexpected CSV header {header!r}", 0)
            body = fh.read()
        if not body.strip():
            return cls.empty(n_channels)
        try:
            data = np.loadtxt(io.StringIO(body), delimiter=",", dtype=np.int64, ndmin=2)
        except ValueError as exc:
            raise TimeTagFormatError(f"malformed CSV record: {exc}") from None
        return cls(data[:, 0], data[:, 1], n_channels)

    def select(self, channels) -> "TimeTagStream":
        mask = np.isin(self.channels, list(channels))
        return TimeTagStream(self.timestamps[mask], self.channels[mask], self.n_channels)


def merge_streams(*streams: TimeTagStream) -> TimeTagStream:
    """Merge streams into one time-ordered stream (stable on ties)."""
    ts = np.concatenate([s.timestamps for s in streams])
    ch = np.concatenate([s.channels for s in streams])
    order = np.lexsort((ch, ts))
    return TimeTagStream(ts[order], ch[order], max(s.n_channels for s in streams))
