"""Framing and the shared transforms (FFT, STFT, mel filterbank, DCT-II, CQT)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EmptyInputError, ParameterError

FRAME_LEN = 2048
HOP_LEN = 512


@dataclass(frozen=True)
class FrameMatrix:
    frames: np.ndarray  # (n_frames, frame_len)
    frame_len: int
    hop_len: int
    sample_rate_hz: int

    @property
    def n_frames(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class Spectrogram:
    """Frame-by-bin spectrum.

    ``kind`` is one of ``magnitude``, ``power``, ``log-power`` or ``mel``.
    """

    values: np.ndarray  # (n_frames, n_bins)
    bin_freqs_hz: np.ndarray
    kind: str = "magnitude"

    @property
    def n_frames(self):
        return self.values.shape[0]

    def to_power(self):
        if self.kind == "power":
            return self
        if self.kind != "magnitude":
            raise ParameterError(f"cannot convert {self.kind} spectrogram to power")
        return Spectrogram(self.values ** 2, self.bin_freqs_hz, "power")


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray  # (n_mels, n_bins)
    mel_freqs_hz: np.ndarray  # band centres


def n_frames_for(n_samples, frame_len, hop_len):
    if n_samples <= frame_len:
        return 1
    return 1 + -(-(n_samples - frame_len) // hop_len)


def frame_signal(clip, frame_len=FRAME_LEN, hop_len=HOP_LEN):
    """Cut a clip into overlapping frames.

    A final partial window is zero-padded rather than dropped, so any clip
    with at least one sample yields at least one frame.
    """
    if frame_len < 1 or hop_len < 1:
        raise ParameterError("frame_len and hop_len must be >= 1")
    x = clip.samples
    if x.shape[0] < 1:
        raise EmptyInputError(f"clip {clip.source_id!r} has no samples")
    n_frames = n_frames_for(x.shape[0], frame_len, hop_len)
    padded = np.zeros((n_frames - 1) * hop_len + frame_len)
    padded[: x.shape[0]] = x
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame_len)[::hop_len].copy()
    return FrameMatrix(frames, frame_len, hop_len, clip.sample_rate_hz)


def hann(n):
    """Periodic Hann window (the DFT-even form used for spectral analysis)."""
    if n == 1:
        return np.ones(1)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


# ---------------------------------------------------------------------------
# Fourier transforms


@lru_cache(maxsize=32)
def _bit_reverse(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=64)
def _twiddles(m):
    return np.exp(-2j * np.pi * np.arange(m // 2) / m)


def fft(x):
    """Radix-2 decimation-in-time FFT over the last axis.

    The length must be a power of two.  Leading axes are transformed in one
    vectorised pass.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    if n < 1 or n & (n - 1):
        raise ParameterError(f"fft length must be a power of two, got {n}")
    lead = x.shape[:-1]
    y = x[..., _bit_reverse(n)].astype(np.complex128)
    out = np.empty_like(y)
    m = 2
    while m <= n:
        half = m // 2
        src = y.reshape(lead + (n // m, 2, half))
        dst = out.reshape(lead + (n // m, 2, half))
        odd = src[..., 1, :]
        odd *= _twiddles(m)
        np.add(src[..., 0, :], odd, out=dst[..., 0, :])
        np.subtract(src[..., 0, :], odd, out=dst[..., 1, :])
        y, out = out, y
        m *= 2
    return y


def _rfft_rows(x):
    # Two real rows ride in one complex FFT (real and imaginary parts), then
    # are separated through conjugate symmetry.
    n = x.shape[-1]
    rows = x.shape[0]
    if rows % 2:
        x = np.vstack([x, np.zeros((1, n))])
    z = fft(x[0::2] + 1j * x[1::2])
    zc = np.conj(z[:, (-np.arange(n // 2 + 1)) % n])
    z = z[:, : n // 2 + 1]
    out = np.empty((x.shape[0], n // 2 + 1), dtype=np.complex128)
    out[0::2] = 0.5 * (z + zc)
    out[1::2] = -0.5j * (z - zc)
    return out[:rows]


@lru_cache(maxsize=8)
def _dft_matrix(n):
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    return np.exp(-2j * np.pi * ((k * t) % n) / n)


def dft(frame):
    """Unnormalised forward DFT of real input, first ``N//2 + 1`` bins.

    Power-of-two lengths take the FFT path; other lengths use the direct
    matrix product, which is exact but quadratic.
    """
    frame = np.asarray(frame, dtype=np.float64)
    n = frame.shape[-1]
    if n < 1:
        raise EmptyInputError("dft of an empty frame")
    if n & (n - 1) == 0:
        if frame.ndim == 2 and frame.shape[0] > 1:
            return _rfft_rows(frame)
        return fft(frame)[..., : n // 2 + 1]
    return frame @ _dft_matrix(n).T


def stft(frames, window="hann"):
    """Magnitude spectrogram of Hann-windowed frames."""
    if window != "hann":
        raise ParameterError(f"unsupported window {window!r}")
    win = hann(frames.frame_len)
    mags = np.abs(dft(frames.frames * win))
    freqs = np.arange(frames.frame_len // 2 + 1) * (frames.sample_rate_hz / frames.frame_len)
    return Spectrogram(mags, freqs, "magnitude")


# ---------------------------------------------------------------------------
# mel scale and cepstrum


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels, n_bins, sr, fmin=0.0, fmax=None):
    """Triangular filters with centres equally spaced on the mel scale.

    Filter ``i`` rises from edge ``i`` to a peak of 1 at edge ``i + 1`` and
    falls to zero at edge ``i + 2``; the ``n_mels + 2`` edges are uniform in
    mel between ``fmin`` and ``fmax``.  Bins sit at ``k * sr / n_fft`` with
    ``n_fft = 2 * (n_bins - 1)``.
    """
    fmax = sr / 2.0 if fmax is None else float(fmax)
    if n_mels < 1 or n_bins < 2:
        raise ParameterError("need n_mels >= 1 and n_bins >= 2")
    if not 0 <= fmin < fmax <= sr / 2.0:
        raise ParameterError(f"need 0 <= fmin < fmax <= sr/2, got fmin={fmin}, fmax={fmax}, sr={sr}")
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    bins = np.linspace(0.0, sr / 2.0, n_bins)
    lower = (bins[None, :] - edges[:-2, None]) / (edges[1:-1] - edges[:-2])[:, None]
    upper = (edges[2:, None] - bins[None, :]) / (edges[2:] - edges[1:-1])[:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    empty = np.flatnonzero(weights.sum(axis=1) == 0)
    if empty.size:
        raise ParameterError(f"{empty.size} mel bands fall between FFT bins; "
                             f"lower n_mels or raise the FFT size")
    return MelFilterbank(weights, edges[1:-1])


@lru_cache(maxsize=32)
def dct_matrix(k, n_out=None):
    """Orthonormal DCT-II basis, rows are output coefficients."""
    n_out = k if n_out is None else n_out
    n = np.arange(n_out)[:, None]
    kk = np.arange(1, k + 1)[None, :]
    g = np.cos(np.pi * n * (kk - 0.5) / k) * np.sqrt(2.0 / k)
    g[0] /= np.sqrt(2.0)
    g.setflags(write=False)
    return g


def dct_ii(values, n_out=None):
    """Orthonormal DCT-II along the last axis, keeping ``n_out`` coefficients."""
    values = np.asarray(values, dtype=np.float64)
    k = values.shape[-1]
    n_out = k if n_out is None else n_out
    if not 1 <= n_out <= k:
        raise ParameterError(f"n_out must lie in [1, {k}], got {n_out}")
    return values @ dct_matrix(k, n_out).T


# ---------------------------------------------------------------------------
# constant-Q transform


def cqt_frequencies(bins_per_octave=12, n_octaves=7, fmin=32.703):
    return fmin * 2.0 ** (np.arange(bins_per_octave * n_octaves) / bins_per_octave)


def cqt_q(bins_per_octave=12):
    return 1.0 / (2.0 ** (1.0 / bins_per_octave) - 1.0)


@lru_cache(maxsize=8)
def cqt_kernels(sr, bins_per_octave=12, n_octaves=7, fmin=32.703):
    """Per-bin complex analysis kernels ``w[n] exp(-2 pi i f_j n / sr)``.

    Kernel ``j`` spans ``ceil(Q sr / f_j)`` samples of a symmetric Hann
    window scaled to unit sum, so a unit sinusoid at ``f_j`` reads 0.5.
    """
    freqs = cqt_frequencies(bins_per_octave, n_octaves, fmin)
    q = cqt_q(bins_per_octave)
    kernels = []
    for f in freqs:
        n = int(np.ceil(q * sr / f))
        w = np.hanning(n) if n > 2 else np.ones(n)
        t = np.arange(n) - n // 2
        kernels.append((w / w.sum()) * np.exp(-2j * np.pi * f * t / sr))
    return freqs, tuple(kernels)


def _check_cqt_range(sr, bins_per_octave, n_octaves, fmin):
    if bins_per_octave < 1 or n_octaves < 1 or fmin <= 0:
        raise ParameterError("bins_per_octave, n_octaves and fmin must be positive")
    if fmin * 2.0 ** n_octaves > sr / 2.0:
        raise ParameterError(f"CQT top edge {fmin * 2.0 ** n_octaves:.1f} Hz exceeds Nyquist {sr / 2.0} Hz")


@lru_cache(maxsize=8)
def _blocked_kernels(sr, bins_per_octave, n_octaves, fmin, frame_len, hop_len):
    # Each kernel is shifted onto the hop grid and cut into hop-sized blocks so
    # the correlation for every frame becomes one matrix product followed by
    # diagonal sums.
    freqs, kernels = cqt_kernels(sr, bins_per_octave, n_octaves, fmin)
    longest = max(k.shape[0] for k in kernels)
    front = hop_len * (-(-(longest // 2) // hop_len))
    columns, layout = [], []
    for k in kernels:
        base = front + frame_len // 2 - k.shape[0] // 2
        block0, lead = divmod(base, hop_len)
        n_blocks = -(-(lead + k.shape[0]) // hop_len)
        padded = np.zeros(n_blocks * hop_len, dtype=np.complex128)
        padded[lead: lead + k.shape[0]] = k
        layout.append((len(columns), n_blocks, block0))
        columns.extend(padded.reshape(n_blocks, hop_len))
    stacked = np.array(columns).T  # (hop_len, total_blocks)
    mat = np.ascontiguousarray(np.concatenate([stacked.real, stacked.imag], axis=1))
    return freqs, front, mat, tuple(layout)


def cqt(clip, bins_per_octave=12, n_octaves=7, fmin=32.703, frame_len=FRAME_LEN, hop_len=HOP_LEN):
    """Constant-Q magnitudes on the STFT frame grid.

    Frame ``t`` is centred on sample ``t * hop_len + frame_len // 2`` (the
    centre of STFT frame ``t``) and each bin is the direct correlation of the
    signal with that bin's kernel.  The correlation is evaluated by blocks of
    ``hop_len`` samples; summation order differs from a per-frame loop but the
    arithmetic is the same.
    """
    sr = clip.sample_rate_hz
    _check_cqt_range(sr, bins_per_octave, n_octaves, fmin)
    x = clip.samples
    if x.shape[0] < 1:
        raise EmptyInputError(f"clip {clip.source_id!r} has no samples")
    freqs, front, mat, layout = _blocked_kernels(sr, bins_per_octave, n_octaves, fmin, frame_len, hop_len)
    n_frames = n_frames_for(x.shape[0], frame_len, hop_len)
    need_blocks = max(n_frames - 1 + b0 + nb for _, nb, b0 in layout)
    padded = np.zeros(need_blocks * hop_len)
    padded[front: front + x.shape[0]] = x
    blocks = padded.reshape(need_blocks, hop_len)
    prod = blocks @ mat
    total = mat.shape[1] // 2
    partial = prod[:, :total] + 1j * prod[:, total:]
    out = np.empty((n_frames, len(layout)))
    t = np.arange(n_frames)[:, None]
    for j, (col0, n_blocks, block0) in enumerate(layout):
        c = np.arange(n_blocks)[None, :]
        out[:, j] = np.abs(partial[t + block0 + c, col0 + c].sum(axis=1))
    return Spectrogram(out, freqs, "magnitude")


def cqt_direct(clip, bins_per_octave=12, n_octaves=7, fmin=32.703, frame_len=FRAME_LEN, hop_len=HOP_LEN):
    """Reference CQT: an explicit per-frame, per-bin correlation loop.

    Slow; kept as the plain statement of what :func:`cqt` computes.
    """
    sr = clip.sample_rate_hz
    _check_cqt_range(sr, bins_per_octave, n_octaves, fmin)
    freqs, kernels = cqt_kernels(sr, bins_per_octave, n_octaves, fmin)
    x = clip.samples
    n_frames = n_frames_for(x.shape[0], frame_len, hop_len)
    out = np.zeros((n_frames, len(kernels)))
    for t in range(n_frames):
        centre = t * hop_len + frame_len // 2
        for j, k in enumerate(kernels):
            start = centre - k.shape[0] // 2
            lo, hi = max(start, 0), min(start + k.shape[0], x.shape[0])
            if hi > lo:
                out[t, j] = abs(np.dot(x[lo:hi], k[lo - start: hi - start]))
    return Spectrogram(out, freqs, "magnitude")
