"""Decoding, resampling and conditioning of raw recordings.

Recordings enter the pipeline as RIFF/WAVE bytes and leave this module as
mono, silence-trimmed, peak-normalised :class:`AudioClip` objects.  The
conditioning order used by the extractor is ``trim_silence`` followed by
``normalize_amplitude``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AllSilentError,
    EmptyInputError,
    FormatError,
    ParameterError,
    UnsupportedError,
)

PEAK_EPS = 1e-6
TRIM_FRAME = 2048
TRIM_HOP = 512

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform with its sample rate.

    ``samples`` is stored as a read-only float64 array so a clip can be
    shared freely between threads and processes.
    """

    samples: np.ndarray
    sample_rate_hz: int
    source_id: str = field(default="")

    def __post_init__(self):
        if int(self.sample_rate_hz) != self.sample_rate_hz or self.sample_rate_hz <= 0:
            raise ParameterError(f"sample rate must be a positive integer, got {self.sample_rate_hz!r}")
        samples = np.array(self.samples, dtype=np.float64).reshape(-1)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self):
        return len(self) / self.sample_rate_hz

    def with_samples(self, samples, sample_rate_hz=None):
        return AudioClip(samples, sample_rate_hz or self.sample_rate_hz, self.source_id)


# ---------------------------------------------------------------------------
# WAV container


def _iter_chunks(data):
    pos = 12
    while pos < len(data):
        if pos + 8 > len(data):
            raise FormatError("truncated chunk header")
        chunk_id, size = struct.unpack_from("<4sI", data, pos)
        body_start = pos + 8
        body_end = body_start + size
        if body_end > len(data):
            raise FormatError(f"chunk {chunk_id!r} declares {size} bytes but only "
                              f"{len(data) - body_start} remain")
        yield chunk_id, data[body_start:body_end]
        pos = body_end + (size & 1)


def _parse_fmt(body):
    if len(body) < 16:
        raise FormatError("fmt chunk shorter than 16 bytes")
    fmt_code, channels, rate, _byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", body, 0)
    if fmt_code == _WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise FormatError("WAVE_FORMAT_EXTENSIBLE fmt chunk shorter than 40 bytes")
        fmt_code = struct.unpack_from("<H", body, 24)[0]
    return fmt_code, channels, rate, block_align, bits


def decode_wav(data, source_id=""):
    """Decode RIFF/WAVE bytes into a mono :class:`AudioClip`.

    Integer PCM (16, 24 or 32 bit) is scaled by ``1 / 2**(bits - 1)``;
    32-bit IEEE float is taken as is.  Stereo is mixed down by the
    per-sample channel mean.
    """
    data = bytes(data)
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError("not a RIFF/WAVE stream")
    fmt = None
    payload = None
    for chunk_id, body in _iter_chunks(data):
        if chunk_id == b"fmt ":
            fmt = _parse_fmt(body)
        elif chunk_id == b"data":
            payload = body
    if fmt is None:
        raise FormatError("missing fmt chunk")
    if payload is None:
        raise FormatError("missing data chunk")

    fmt_code, channels, rate, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedError(f"{channels} channels (only mono or stereo)")
    if rate <= 0:
        raise FormatError("sample rate of zero")
    if fmt_code == _WAVE_FORMAT_PCM and bits in (16, 24, 32):
        kind = "int"
    elif fmt_code == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        kind = "float"
    else:
        raise UnsupportedError(f"format code {fmt_code:#06x} with {bits} bits per sample")
    width = bits // 8
    if block_align != width * channels:
        raise FormatError(f"block_align {block_align} inconsistent with {channels}x{bits} bit samples")
    if len(payload) % block_align:
        raise FormatError("data chunk ends inside a sample frame")

    if kind == "float":
        samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    elif bits == 24:
        raw = np.frombuffer(payload, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        ints = np.where(ints & 0x800000, ints - (1 << 24), ints)
        samples = ints / float(1 << 23)
    else:
        samples = np.frombuffer(payload, dtype=f"<i{width}").astype(np.float64) / float(1 << (bits - 1))

    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioClip(samples, rate, source_id)


def encode_wav(clip, bits=16):
    """Serialise a clip as mono RIFF/WAVE bytes (16-bit PCM or 32-bit float)."""
    if bits == 16:
        ints = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
        payload, fmt_code = ints.tobytes(), _WAVE_FORMAT_PCM
    elif bits == 32:
        payload, fmt_code = clip.samples.astype("<f4").tobytes(), _WAVE_FORMAT_IEEE_FLOAT
    else:
        raise UnsupportedError(f"cannot encode {bits}-bit samples")
    width = bits // 8
    fmt = struct.pack("<HHIIHH", fmt_code, 1, clip.sample_rate_hz,
                      clip.sample_rate_hz * width, width, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", len(body)) + body


def read_wav(path):
    path = Path(path)
    return decode_wav(path.read_bytes(), source_id=str(path))


def write_wav(path, clip, bits=16):
    Path(path).write_bytes(encode_wav(clip, bits=bits))


# ---------------------------------------------------------------------------
# conditioning


def resample(clip, target_rate_hz):
    """Linear-interpolation resampler.

    Output sample ``i`` sits at time ``i / target_rate_hz``; positions past
    the final input sample hold its value.  Same-rate calls return the
    samples untouched.
    """
    if target_rate_hz <= 0 or int(target_rate_hz) != target_rate_hz:
        raise ParameterError(f"target rate must be a positive integer, got {target_rate_hz!r}")
    n = len(clip)
    if n == 0:
        raise EmptyInputError("cannot resample an empty clip")
    if target_rate_hz == clip.sample_rate_hz:
        return clip
    n_out = max(1, int(round(n * target_rate_hz / clip.sample_rate_hz)))
    positions = np.arange(n_out) * (clip.sample_rate_hz / target_rate_hz)
    out = np.interp(positions, np.arange(n), clip.samples)
    return clip.with_samples(out, int(target_rate_hz))


def normalize_amplitude(clip, eps=PEAK_EPS):
    peak = np.max(np.abs(clip.samples)) if len(clip) else 0.0
    if peak == 0:
        return clip
    return clip.with_samples(clip.samples * ((1.0 - eps) / peak))


def frame_power(samples, frame_len=TRIM_FRAME, hop_len=TRIM_HOP):
    """Mean-square power of each frame on the zero-padded frame grid."""
    n = samples.shape[0]
    n_frames = 1 if n <= frame_len else 1 + -(-(n - frame_len) // hop_len)
    padded = np.zeros((n_frames - 1) * hop_len + frame_len)
    padded[:n] = samples
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame_len)[::hop_len]
    return np.einsum("ij,ij->i", frames, frames) / frame_len


def _trim_once(samples, threshold_db, frame_len, hop_len):
    power = frame_power(samples, frame_len, hop_len)
    ref = power.max()
    if not ref > 0:
        return None
    floor = ref * 10.0 ** (-threshold_db / 10.0)
    loud = np.flatnonzero(power >= floor)
    lo = loud[0] * hop_len
    hi = min(samples.shape[0], loud[-1] * hop_len + frame_len)
    # refine the frame-level span down to sample resolution
    above = np.flatnonzero(samples[lo:hi] ** 2 >= floor)
    return lo + above[0], lo + above[-1] + 1


def trim_silence(clip, threshold_db=60.0, frame_len=TRIM_FRAME, hop_len=TRIM_HOP):
    """Strip leading and trailing silence.

    Frames whose mean-square power lies more than ``threshold_db`` below the
    loudest frame are dropped from both ends, then the cut is tightened to
    the first/last sample whose power clears the same floor.  The procedure
    repeats until nothing more is removed, which makes it idempotent.
    """
    if threshold_db < 0:
        raise ParameterError("threshold_db must be non-negative")
    samples = clip.samples
    if samples.shape[0] == 0:
        raise EmptyInputError(f"empty clip {clip.source_id!r}")
    while True:
        span = _trim_once(samples, threshold_db, frame_len, hop_len)
        if span is None:
            raise AllSilentError(f"clip {clip.source_id!r} is silent", clip.source_id)
        lo, hi = span
        if lo == 0 and hi == samples.shape[0]:
            break
        samples = samples[lo:hi]
    if samples is clip.samples:
        return clip
    return clip.with_samples(samples)


def condition(clip, sample_rate_hz=22050, trim_db=60.0):
    """Resample, trim and peak-normalise: the extractor's pre-processing chain."""
    clip = resample(clip, sample_rate_hz)
    clip = trim_silence(clip, trim_db)
    return normalize_amplitude(clip)
