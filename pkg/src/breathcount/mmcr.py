"""Reader/writer for .mmcr IQ recordings.

Layout:
    8 bytes   magic  MMCR\\x00\\x01\\x00\\x00
    4 bytes   little-endian uint32 header length
    N bytes   UTF-8 JSON header (radar config, scene hash, dimension order,
              simulator warnings)
    payload   little-endian float32 interleaved I,Q in (frame, chirp,
              antenna, sample) index order, frame-contiguous

Frames are written and read one at a time so a full-preset recording never
has to be resident in memory.
"""

from __future__ import annotations

import json
import struct
from typing import Iterator

import numpy as np

from .config import RadarConfig

MAGIC = b"MMCR\x00\x01\x00\x00"
DIMENSION_ORDER = ("frame", "chirp", "antenna", "sample")


class CorruptRecordingError(IOError):
    """File is not a well-formed .mmcr recording."""


def _frame_shape(config: RadarConfig) -> tuple[int, int, int]:
    return (config.chirps_per_frame, config.virtual_antennas, config.adc_samples_per_chirp)


def _frame_bytes(config: RadarConfig) -> int:
    n = config.chirps_per_frame * config.virtual_antennas * config.adc_samples_per_chirp
    return n * 8  # float32 I + float32 Q


class MmcrWriter:
    """Streaming writer; frames must arrive in order and match the config."""

    def __init__(self, path, config: RadarConfig, scene_hash: str = "", metadata: dict | None = None):
        self.path = path
        self.config = config
        self._expected = config.frame_count
        self._written = 0
        header = {
            "config": config.to_dict(),
            "scene_hash": scene_hash,
            "dimension_order": list(DIMENSION_ORDER),
            "metadata": metadata or {},
        }
        payload = json.dumps(header, sort_keys=True).encode("utf-8")
        self._fh = open(path, "wb")
        self._fh.write(MAGIC)
        self._fh.write(struct.pack("<I", len(payload)))
        self._fh.write(payload)

    def write_frame(self, frame: np.ndarray) -> None:
        if frame.shape != _frame_shape(self.config):
            raise ValueError(
                f"frame shape {frame.shape} does not match config {_frame_shape(self.config)}"
            )
        if self._written >= self._expected:
            raise ValueError("recording already has all frames")
        interleaved = np.empty(frame.size * 2, dtype="<f4")
        flat = frame.reshape(-1)
        interleaved[0::2] = flat.real.astype(np.float32, copy=False)
        interleaved[1::2] = flat.imag.astype(np.float32, copy=False)
        self._fh.write(interleaved.tobytes())
        self._written += 1

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()
        if self._written != self._expected:
            raise ValueError(
                f"recording truncated: wrote {self._written} of {self._expected} frames"
            )

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self._fh.close()
        return False


class MmcrReader:
    def __init__(self, path):
        self.path = path
        self._fh = open(path, "rb")
        magic = self._fh.read(len(MAGIC))
        if magic != MAGIC:
            self._fh.close()
            raise CorruptRecordingError(f"{path}: bad magic bytes {magic!r}")
        raw_len = self._fh.read(4)
        if len(raw_len) != 4:
            self._fh.close()
            raise CorruptRecordingError(f"{path}: truncated header length")
        (header_len,) = struct.unpack("<I", raw_len)
        payload = self._fh.read(header_len)
        if len(payload) != header_len:
            self._fh.close()
            raise CorruptRecordingError(f"{path}: truncated header")
        try:
            self.header = json.loads(payload.decode("utf-8"))
            self.config = RadarConfig.from_dict(self.header["config"])
        except (ValueError, KeyError) as exc:
            self._fh.close()
            raise CorruptRecordingError(f"{path}: unreadable header: {exc}") from exc
        self._data_offset = len(MAGIC) + 4 + header_len
        self._fh.seek(0, 2)
        size = self._fh.tell() - self._data_offset
        if size != self.config.frame_count * _frame_bytes(self.config):
            self._fh.close()
            raise CorruptRecordingError(
                f"{path}: payload is {size} bytes, expected "
                f"{self.config.frame_count * _frame_bytes(self.config)}"
            )

    @property
    def scene_hash(self) -> str:
        return self.header.get("scene_hash", "")

    def read_frame(self, index: int) -> np.ndarray:
        if not 0 <= index < self.config.frame_count:
            raise IndexError(f"frame {index} out of range")
        self._fh.seek(self._data_offset + index * _frame_bytes(self.config))
        raw = self._fh.read(_frame_bytes(self.config))
        if len(raw) != _frame_bytes(self.config):
            raise CorruptRecordingError(f"{self.path}: truncated frame {index}")
        flat = np.frombuffer(raw, dtype="<f4")
        frame = (flat[0::2] + 1j * flat[1::2]).astype(np.complex64)
        return frame.reshape(_frame_shape(self.config))

    def iter_frames(self) -> Iterator[np.ndarray]:
        for i in range(self.config.frame_count):
            yield self.read_frame(i)

    def read_cube(self) -> np.ndarray:
        """Full (frame, chirp, antenna, sample) cube; use only for small presets."""
        return np.stack(list(self.iter_frames()))

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False


def write_recording(path, config: RadarConfig, frames, scene_hash: str = "", metadata: dict | None = None) -> None:
    with MmcrWriter(path, config, scene_hash=scene_hash, metadata=metadata) as writer:
        for frame in frames:
            writer.write_frame(frame)
