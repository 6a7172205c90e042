"""Cepstral (MFCC and its deltas) and tonal (chroma, tonnetz) features.

The public functions take an :class:`~respire.audio_io.AudioClip`; the
``*_from_*`` helpers accept an already computed spectrogram so a vector
build can share one STFT and one CQT between several features.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import dsp
from .descriptors import LOG_FLOOR, FeatureSeries
from .errors import ParameterError

N_MFCC = 20
N_MELS = 40
N_CHROMA = 12
CHROMA_FMIN_HZ = 27.5
A4_HZ = 440.0
CENS_STEPS = (0.4, 0.2, 0.1, 0.05)

# fifths, minor thirds, major thirds
TONNETZ_ANGLES = (7.0 * np.pi / 6.0, 3.0 * np.pi / 2.0, 2.0 * np.pi / 3.0)
TONNETZ_RADII = (1.0, 1.0, 1.0)


def _stft(clip, frame_len=dsp.FRAME_LEN, hop_len=dsp.HOP_LEN):
    return dsp.stft(dsp.frame_signal(clip, frame_len, hop_len))


# ---------------------------------------------------------------------------
# cepstral


@lru_cache(maxsize=8)
def _mel_weights(n_mels, n_bins, sr):
    return dsp.mel_filterbank(n_mels, n_bins, sr).weights


def log_mel_energies(spec, sr, n_mels=N_MELS):
    """Natural log of mel-band power, floored at ``LOG_FLOOR``."""
    power = spec.to_power().values
    mel = power @ _mel_weights(n_mels, power.shape[1], sr).T
    return np.log(np.maximum(mel, LOG_FLOOR))


def mfcc_from_spectrogram(spec, sr, n_mfcc=N_MFCC, n_mels=N_MELS):
    if n_mfcc > n_mels:
        raise ParameterError(f"n_mfcc ({n_mfcc}) cannot exceed n_mels ({n_mels})")
    return FeatureSeries("MFCC", dsp.dct_ii(log_mel_energies(spec, sr, n_mels), n_mfcc))


def mfcc(clip, n_mfcc=N_MFCC, n_mels=N_MELS, frame_len=dsp.FRAME_LEN, hop_len=dsp.HOP_LEN):
    """Mel-frequency cepstral coefficients, one row of ``n_mfcc`` per frame.

    Power STFT, triangular mel filterbank over 0 to Nyquist, floored natural
    log, then an orthonormal DCT-II truncated to the first ``n_mfcc``
    coefficients.
    """
    return mfcc_from_spectrogram(_stft(clip, frame_len, hop_len), clip.sample_rate_hz, n_mfcc, n_mels)


def _delta_once(c, half_width):
    n = c.shape[0]
    m = max(1, min(half_width, (n - 1) // 2))
    padded = np.concatenate([np.repeat(c[:1], m, axis=0), c, np.repeat(c[-1:], m, axis=0)])
    out = np.zeros_like(c)
    for k in range(1, m + 1):
        out += k * (padded[m + k: m + k + n] - padded[m - k: m - k + n])
    return out / (2.0 * sum(k * k for k in range(1, m + 1)))


def delta(series, order=1, half_width=4):
    """Regression delta over ``2 * half_width + 1`` frames, edges replicated.

    Short series shrink the half width to ``(n_frames - 1) // 2`` (never
    below 1).  ``order=2`` applies the first-order delta twice.
    """
    if order not in (1, 2):
        raise ParameterError(f"delta order must be 1 or 2, got {order}")
    values = series.values if isinstance(series, FeatureSeries) else np.asarray(series, dtype=np.float64)
    out = values
    for _ in range(order):
        out = _delta_once(out, half_width)
    name = getattr(series, "name", "MFCC")
    return FeatureSeries(f"{name}-D" if order == 1 else f"{name}-D2", out)


# ---------------------------------------------------------------------------
# tonal


def _values(x):
    return x.values if isinstance(x, FeatureSeries) else np.asarray(x, dtype=np.float64)


def _l2_rows(x):
    norm = np.sqrt((x * x).sum(axis=1, keepdims=True))
    return np.where(norm > 0, x / np.where(norm > 0, norm, 1.0), 0.0)


def _l1_rows(x):
    norm = np.abs(x).sum(axis=1, keepdims=True)
    return np.where(norm > 0, x / np.where(norm > 0, norm, 1.0), 0.0)


def pitch_class(freq_hz):
    """Nearest equal-tempered pitch class of a frequency, C = 0 ... B = 11."""
    return (np.round(12.0 * np.log2(np.asarray(freq_hz) / A4_HZ)).astype(int) + 9) % 12


@lru_cache(maxsize=8)
def _stft_chroma_map(n_bins, sr):
    freqs = np.linspace(0.0, sr / 2.0, n_bins)
    mapping = np.zeros((n_bins, N_CHROMA))
    keep = np.flatnonzero(freqs >= CHROMA_FMIN_HZ)
    mapping[keep, pitch_class(freqs[keep])] = 1.0
    return mapping


def chroma_stft_from_spectrogram(spec, sr):
    power = spec.to_power().values
    return FeatureSeries("C-STFT", _l2_rows(power @ _stft_chroma_map(power.shape[1], sr)))


def chroma_stft(clip, frame_len=dsp.FRAME_LEN, hop_len=dsp.HOP_LEN):
    """STFT chromagram: bin power summed by nearest pitch class, L2 per frame.

    Bins below 27.5 Hz (A0) are ignored.
    """
    return chroma_stft_from_spectrogram(_stft(clip, frame_len, hop_len), clip.sample_rate_hz)


def chroma_cqt_from_spectrogram(cq, bins_per_octave=12):
    if bins_per_octave % N_CHROMA:
        raise ParameterError("bins_per_octave must be a multiple of 12 for chroma folding")
    per_class = bins_per_octave // N_CHROMA
    mags = cq.values
    n_bins = mags.shape[1]
    folded = np.zeros((mags.shape[0], N_CHROMA))
    for j in range(n_bins):
        folded[:, (j // per_class) % N_CHROMA] += mags[:, j]
    return FeatureSeries("C-CQT", _l2_rows(folded))


def chroma_cqt(clip, bins_per_octave=12, n_octaves=7, fmin=32.703,
               frame_len=dsp.FRAME_LEN, hop_len=dsp.HOP_LEN):
    """Constant-Q chromagram: CQT magnitudes folded by octave, L2 per frame.

    With the default ``fmin`` of C1 the first bin is pitch class C.
    """
    cq = dsp.cqt(clip, bins_per_octave, n_octaves, fmin, frame_len, hop_len)
    return chroma_cqt_from_spectrogram(cq, bins_per_octave)


def _quantise(c):
    q = np.zeros_like(c)
    for step in CENS_STEPS:
        q += c > step
    return q


def _smooth_columns(x, length):
    win = np.hanning(length + 2)[1:-1]
    win /= win.sum()
    start = (length - 1) // 2
    return np.stack([np.convolve(col, win)[start: start + x.shape[0]] for col in x.T], axis=1)


def cens_from_chroma(chroma, smooth_len=41):
    """CENS from a chromagram: L1, step quantisation, Hann smoothing, L2."""
    q = _quantise(_l1_rows(_values(chroma)))
    if smooth_len > 1:
        q = _smooth_columns(q, smooth_len)
    return FeatureSeries("C-ENS", _l2_rows(q))


def chroma_cens(clip, smooth_len=41, bins_per_octave=12, n_octaves=7, fmin=32.703,
                frame_len=dsp.FRAME_LEN, hop_len=dsp.HOP_LEN):
    """Chroma energy normalised statistics at the native frame rate.

    Each frame's CQT chroma is L1-normalised and quantised (shares above
    0.05, 0.1, 0.2 and 0.4 add one level each), smoothed over time with a
    ``smooth_len``-frame Hann window and L2-normalised.  The L1 step makes
    the output independent of the clip's overall gain.
    """
    return cens_from_chroma(chroma_cqt(clip, bins_per_octave, n_octaves, fmin, frame_len, hop_len), smooth_len)


@lru_cache(maxsize=1)
def tonnetz_basis():
    """(6, 12) projection matrix; rows are sin/cos pairs per interval circle."""
    p = np.arange(N_CHROMA)
    rows = []
    for angle, radius in zip(TONNETZ_ANGLES, TONNETZ_RADII):
        rows.append(radius * np.sin(angle * p))
        rows.append(radius * np.cos(angle * p))
    basis = np.array(rows)
    basis.setflags(write=False)
    return basis


def tonnetz(chroma):
    """Project L1-normalised chroma onto the fifths/minor-third/major-third circles."""
    c = _l1_rows(_values(chroma))
    if c.shape[1] != N_CHROMA:
        raise ParameterError(f"tonnetz expects 12 chroma bins, got {c.shape[1]}")
    return FeatureSeries("TN", c @ tonnetz_basis().T)
