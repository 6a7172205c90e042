"""Per-frame time-domain and spectral descriptors.

Every function returns a :class:`FeatureSeries` with one row per frame.
Frames with no energy map to fixed fallbacks (0 for centroid, bandwidth,
rolloff and contrast, 1 for flatness) so downstream vectors never hold NaN.

Two of the textbook formulas are read in their standard form rather than the
literal typeset one:

* bandwidth is the energy-weighted standard deviation of frequency around
  the centroid, ``sqrt(sum(p_k * (f_k - centroid)**2))`` with ``p`` the
  normalised spectrum (the typeset ``sqrt(sum(f_k - E**2 * P_k))`` mixes
  units);
* flux is the squared difference between consecutive L1-normalised
  spectra, ``sum((E[n, k] - E[n-1, k])**2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class FeatureSeries:
    name: str
    values: np.ndarray  # (n_frames, feature_dim)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "values", values)

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def n_frames(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class SpectralParams:
    rolloff_fraction: float = 0.85
    n_contrast_bands: int = 6
    contrast_fmin: float = 200.0
    contrast_quantile: float = 0.02

    def __post_init__(self):
        if not 0 < self.rolloff_fraction <= 1:
            raise ParameterError(f"rolloff fraction must lie in (0, 1], got {self.rolloff_fraction}")
        if self.n_contrast_bands < 1 or self.contrast_fmin <= 0:
            raise ParameterError("contrast needs >= 1 band and a positive fmin")
        if not 0 < self.contrast_quantile <= 0.5:
            raise ParameterError("contrast quantile must lie in (0, 0.5]")


def _require(spec, *kinds):
    if spec.kind not in kinds:
        raise ParameterError(f"expected a {' or '.join(kinds)} spectrogram, got {spec.kind}")


def _normalised(values):
    total = values.sum(axis=1, keepdims=True)
    safe = np.where(total > 0, total, 1.0)
    return values / safe, total[:, 0]


# ---------------------------------------------------------------------------
# time domain


def rmse(frames):
    """Root mean square amplitude of each frame."""
    x = frames.frames
    return FeatureSeries("RMSE", np.sqrt(np.einsum("ij,ij->i", x, x) / x.shape[1]))


def zcr(frames):
    """Zero-crossing rate per frame, in [0, 1].

    Counts ``0.5 * |sign(x[n]) - sign(x[n-1])|`` over adjacent pairs with
    ``sign(0) = 0``, so a step through an exact zero contributes two halves.
    The count is divided by the number of pairs.
    """
    s = np.sign(frames.frames)
    pairs = max(frames.frame_len - 1, 1)
    count = 0.5 * np.abs(np.diff(s, axis=1)).sum(axis=1)
    return FeatureSeries("ZCR", count / pairs)


# ---------------------------------------------------------------------------
# spectral shape


def spectral_centroid(spec):
    _require(spec, "magnitude", "power")
    p, total = _normalised(spec.values)
    return FeatureSeries("S-CENT", p @ spec.bin_freqs_hz)


def spectral_bandwidth(spec):
    _require(spec, "magnitude", "power")
    p, _ = _normalised(spec.values)
    f = spec.bin_freqs_hz
    centroid = p @ f
    dev = f[None, :] - centroid[:, None]
    var = np.einsum("ij,ij->i", p, dev * dev)
    return FeatureSeries("S-BW", np.sqrt(np.maximum(var, 0.0)))


def contrast_band_edges(bin_freqs_hz, params=SpectralParams()):
    """Bin index ranges of the contrast sub-bands.

    Band 0 covers ``[0, fmin)``; bands ``1..n`` are octaves starting at
    ``fmin``, the last one closed at Nyquist.  A band without any bin is a
    configuration error.
    """
    f = np.asarray(bin_freqs_hz)
    edges = np.concatenate(([0.0], params.contrast_fmin * 2.0 ** np.arange(params.n_contrast_bands + 1)))
    bands = []
    for i in range(params.n_contrast_bands + 1):
        lo, hi = edges[i], edges[i + 1]
        last = i == params.n_contrast_bands
        mask = (f >= lo) & ((f <= hi) if last else (f < hi))
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            raise ParameterError(f"contrast band {i} [{lo:.0f}, {hi:.0f}) Hz contains no bins")
        bands.append((idx[0], idx[-1] + 1))
    return bands


def spectral_contrast(spec, params=SpectralParams()):
    """Log peak-to-valley difference in each sub-band.

    Within a band the magnitudes are sorted; the peak is the mean of the top
    ``contrast_quantile`` share of bins and the valley the mean of the bottom
    share (at least one bin each).  Output width is ``n_contrast_bands + 1``.
    """
    _require(spec, "magnitude")
    bands = contrast_band_edges(spec.bin_freqs_hz, params)
    out = np.empty((spec.n_frames, len(bands)))
    for i, (lo, hi) in enumerate(bands):
        sub = np.sort(spec.values[:, lo:hi], axis=1)
        k = max(1, int(round(params.contrast_quantile * (hi - lo))))
        valley = sub[:, :k].mean(axis=1)
        peak = sub[:, -k:].mean(axis=1)
        out[:, i] = np.log(np.maximum(peak, LOG_FLOOR)) - np.log(np.maximum(valley, LOG_FLOOR))
    return FeatureSeries("S-CONT", out)


def spectral_flatness(spec):
    """Geometric over arithmetic mean of the power spectrum, per frame."""
    if spec.kind == "magnitude":
        spec = spec.to_power()
    _require(spec, "power")
    p = np.maximum(spec.values, LOG_FLOOR)
    geo = np.exp(np.log(p).mean(axis=1))
    arith = p.mean(axis=1)
    flat = np.where(spec.values.max(axis=1) > 0, geo / arith, 1.0)
    return FeatureSeries("S-FLAT", np.clip(flat, 0.0, 1.0))


def spectral_flux(spec):
    """Squared change between consecutive L1-normalised spectra; frame 0 is 0."""
    _require(spec, "magnitude", "power")
    p, _ = _normalised(spec.values)
    out = np.zeros(spec.n_frames)
    if spec.n_frames > 1:
        d = np.diff(p, axis=0)
        out[1:] = np.einsum("ij,ij->i", d, d)
    return FeatureSeries("S-FLUX", out)


def spectral_rolloff(spec, params=SpectralParams()):
    """Lowest bin frequency whose cumulative energy reaches the rolloff share."""
    _require(spec, "magnitude", "power")
    cum = np.cumsum(spec.values, axis=1)
    total = cum[:, -1:]
    reached = cum >= params.rolloff_fraction * total
    idx = reached.argmax(axis=1)
    out = np.where(total[:, 0] > 0, spec.bin_freqs_hz[idx], 0.0)
    return FeatureSeries("S-ROLL", out)
