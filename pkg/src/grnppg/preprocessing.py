"""PPG preprocessing: band-pass filtering, pulse segmentation, resampling, scaling.

Pipeline for one recording::

    filtered = bandpass_filtfilt(signal)
    for start, stop in segment_pulses(filtered):
        pulse = normalize(resample_linear(filtered.samples[start:stop]))
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps
from scipy import stats

PULSE_LEN = 256
ARTIFACT = 1
NON_ARTIFACT = 0
UNLABELED = -1


class DegeneratePulseError(ValueError):
    """A pulse has zero variance and cannot be z-scored."""


@dataclass
class RawSignal:
    samples: np.ndarray
    sample_rate_hz: float = 128.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth band-pass; ``order`` is the order of the band-pass filter itself.

    A band-pass of order ``n`` comes from an ``n / 2`` order low-pass
    prototype; forward-backward application squares its magnitude response.
    """

    low_cut_hz: float = 0.5
    high_cut_hz: float = 5.0
    order: int = 4

    def __post_init__(self):
        if self.order < 2 or self.order % 2:
            raise ValueError("band-pass order must be an even positive integer")
        if not 0 < self.low_cut_hz < self.high_cut_hz:
            raise ValueError("need 0 < low_cut_hz < high_cut_hz")

    def validate(self, sample_rate_hz: float) -> None:
        if self.high_cut_hz >= sample_rate_hz / 2:
            raise ValueError(f"high cut {self.high_cut_hz} Hz is not below Nyquist "
                             f"({sample_rate_hz / 2} Hz)")

    @property
    def padlen(self) -> int:
        return 3 * (self.order + 1)


@dataclass
class PulseSegment:
    samples: np.ndarray
    label: int = UNLABELED
    offset: int = 0
    original_length: int = PULSE_LEN


@dataclass(frozen=True)
class SegmentationConfig:
    min_separation_s: float = 0.33
    prominence_factor: float = 0.25


def butter_sos(spec: FilterSpec, sample_rate_hz: float) -> np.ndarray:
    spec.validate(sample_rate_hz)
    return sps.butter(spec.order // 2, [spec.low_cut_hz, spec.high_cut_hz], btype="bandpass",
                      fs=sample_rate_hz, output="sos")


def analytic_gain(freq_hz, spec: FilterSpec, sample_rate_hz: float) -> np.ndarray:
    """One-pass magnitude ``|H(f)|`` of the bilinear-transform Butterworth band-pass."""
    f = np.asarray(freq_hz, dtype=np.float64)
    w = np.tan(np.pi * f / sample_rate_hz)
    wl = np.tan(np.pi * spec.low_cut_hz / sample_rate_hz)
    wh = np.tan(np.pi * spec.high_cut_hz / sample_rate_hz)
    with np.errstate(divide="ignore"):
        x = (w * w - wl * wh) / (w * (wh - wl))
    n = spec.order // 2
    return 1.0 / np.sqrt(1.0 + x ** (2 * n))


def bandpass_filtfilt(sig: RawSignal, spec: FilterSpec = FilterSpec()) -> RawSignal:
    """Zero-phase band-pass (second-order sections, odd-reflection padding)."""
    sos = butter_sos(spec, sig.sample_rate_hz)
    if len(sig.samples) <= spec.padlen:
        raise ValueError(f"signal of {len(sig.samples)} samples is too short for "
                         f"{spec.padlen}-sample edge padding")
    out = sps.sosfiltfilt(sos, sig.samples, padtype="odd", padlen=spec.padlen)
    return RawSignal(out, sig.sample_rate_hz)


def segment_pulses(sig: RawSignal, cfg: SegmentationConfig = SegmentationConfig()
                   ) -> list[tuple[int, int]]:
    """Split at pulse feet; returns ``(start, stop)`` sample ranges of complete cycles.

    Candidate feet are local minima at least ``min_separation_s`` apart whose
    prominence reaches ``prominence_factor`` times the median peak-to-trough
    amplitude (the median prominence of the local maxima).  Each segment runs
    from one foot to the next, so partial cycles at either end are dropped.
    """
    x = np.asarray(sig.samples, dtype=np.float64)
    if x.size < 3:
        return []
    distance = max(1, int(np.ceil(cfg.min_separation_s * sig.sample_rate_hz)))
    peaks, props = sps.find_peaks(x, distance=distance, prominence=0.0)
    if peaks.size == 0:
        return []
    amplitude = float(np.median(props["prominences"]))
    if amplitude <= 0:
        return []
    feet, _ = sps.find_peaks(-x, distance=distance,
                             prominence=cfg.prominence_factor * amplitude)
    return [(int(a), int(b)) for a, b in zip(feet[:-1], feet[1:])]


def resample_linear(segment, target: int = PULSE_LEN) -> np.ndarray:
    """Linear interpolation onto ``target`` evenly spaced points spanning the segment."""
    seg = np.asarray(segment, dtype=np.float64)
    if seg.size < 2:
        raise ValueError("cannot resample a segment shorter than 2 samples")
    if seg.size == target:
        return seg.copy()
    src = np.linspace(0.0, 1.0, seg.size)
    dst = np.linspace(0.0, 1.0, target)
    out = np.interp(dst, src, seg)
    out[0], out[-1] = seg[0], seg[-1]
    return out


def normalize(segment) -> np.ndarray:
    """Per-pulse z-score (population standard deviation)."""
    seg = np.asarray(segment, dtype=np.float64)
    sd = seg.std()
    if not np.isfinite(sd) or sd <= 1e-12 * max(1.0, np.abs(seg).max()):
        raise DegeneratePulseError("constant pulse cannot be normalized")
    z = (seg - seg.mean()) / sd
    # a second pass removes the last ulp-level drift in mean and scale
    z -= z.mean()
    return z / z.std()


def extract_pulses(sig: RawSignal, spec: FilterSpec = FilterSpec(),
                   seg_cfg: SegmentationConfig = SegmentationConfig(),
                   filtered: bool = False) -> list[PulseSegment]:
    """Run the whole pipeline; degenerate pulses are skipped."""
    filt = sig if filtered else bandpass_filtfilt(sig, spec)
    out = []
    for start, stop in segment_pulses(filt, seg_cfg):
        raw = filt.samples[start:stop]
        try:
            z = normalize(resample_linear(raw))
        except DegeneratePulseError:
            continue
        out.append(PulseSegment(z, UNLABELED, start, stop - start))
    return out


# ---------------------------------------------------------------- statistics

STAT_FIELDS = ("count", "mean", "std", "min", "p25", "p50", "p75", "max", "skewness", "kurtosis")


@dataclass
class StatsSummary:
    count: int
    mean: float
    std: float
    min: float
    p25: float
    p50: float
    p75: float
    max: float
    skewness: float
    kurtosis: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in STAT_FIELDS}


def _summary(values: np.ndarray, count: int) -> StatsSummary:
    v = values.ravel()
    p25, p50, p75 = np.percentile(v, [25, 50, 75])
    return StatsSummary(
        count=int(count), mean=float(v.mean()), std=float(v.std(ddof=1)) if v.size > 1 else 0.0,
        min=float(v.min()), p25=float(p25), p50=float(p50), p75=float(p75), max=float(v.max()),
        skewness=float(stats.skew(v)), kurtosis=float(stats.kurtosis(v, fisher=False)))


def summarize_stats(pulses, labels=None) -> dict[str, StatsSummary]:
    """Distribution summary over all pulse samples: overall and per class.

    ``count`` is the number of pulses; the moments and percentiles pool every
    sample.  Kurtosis is non-excess (3 for a normal distribution).
    """
    X = np.asarray(pulses, dtype=np.float64)
    if X.size == 0:
        raise ValueError("cannot summarize an empty dataset")
    if X.ndim == 1:
        X = X[None, :]
    out = {"overall": _summary(X, len(X))}
    if labels is not None:
        y = np.asarray(labels)
        for name, cls in (("non_artifact", NON_ARTIFACT), ("artifact", ARTIFACT)):
            sel = X[y == cls]
            if len(sel):
                out[name] = _summary(sel, len(sel))
    return out
