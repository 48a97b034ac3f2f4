"""Synthetic PPG recordings with injected artifacts, and labelled pulse datasets.

Each cardiac cycle is the sum of two Gaussian bumps, a systolic wave and a
later, smaller dicrotic wave, placed relative to the cycle onset.  Cycle
length and amplitude jitter slightly from beat to beat.

Artifacts are added as random events (Poisson in time) of fixed duration per
kind; a per-sample mask records which samples were touched.  After
preprocessing, a pulse is labelled artifact when more than
``mask_threshold`` of its samples are masked.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import preprocessing as pp

ARTIFACT_KINDS = ("motion_spike", "baseline_wander", "flatline", "noise_burst")

# event durations in seconds, per artifact kind
EVENT_DURATION_S = {"motion_spike": 0.3, "baseline_wander": 6.0, "flatline": 1.5,
                    "noise_burst": 2.0}


class CapacityError(RuntimeError):
    """The generator could not reach the requested class counts within budget."""


@dataclass(frozen=True)
class PulseModelParams:
    heart_rate_bpm: float = 75.0
    systolic_amplitude: float = 1.0
    systolic_width: float = 0.09
    systolic_position: float = 0.28
    dicrotic_amplitude: float = 0.45
    dicrotic_width: float = 0.12
    dicrotic_position: float = 0.6
    baseline: float = 0.0
    sample_rate_hz: float = 128.0
    period_jitter: float = 0.02
    amplitude_jitter: float = 0.05

    def __post_init__(self):
        if not 30.0 <= self.heart_rate_bpm <= 220.0:
            raise ValueError("heart rate must lie in [30, 220] bpm")
        if self.systolic_width <= 0 or self.dicrotic_width <= 0:
            raise ValueError("pulse widths must be positive")
        if self.dicrotic_position <= self.systolic_position:
            raise ValueError("the dicrotic wave must follow the systolic wave")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")


@dataclass(frozen=True)
class ArtifactSpec:
    kind: str
    severity: float = 0.8
    rate: float = 6.0  # expected events per minute

    def __post_init__(self):
        if self.kind not in ARTIFACT_KINDS:
            raise ValueError(f"unknown artifact kind {self.kind!r}; valid: {ARTIFACT_KINDS}")
        if not 0.0 <= self.severity <= 1.0:
            raise ValueError("severity must lie in [0, 1]")
        if self.rate < 0:
            raise ValueError("rate must be non-negative")

    @property
    def event_duration_s(self) -> float:
        return EVENT_DURATION_S[self.kind]


DEFAULT_ARTIFACTS = (
    ArtifactSpec("motion_spike", 0.8, 6.0),
    ArtifactSpec("noise_burst", 0.6, 4.0),
    ArtifactSpec("flatline", 1.0, 3.0),
)


@dataclass
class CleanRecording:
    signal: pp.RawSignal
    cycles: np.ndarray  # [n, 2] start/stop sample of every complete cycle

    @property
    def boundaries(self) -> np.ndarray:
        return np.unique(self.cycles.ravel())


def generate_clean_ppg(params: PulseModelParams = PulseModelParams(), duration_s: float = 30.0,
                       seed: int = 0) -> CleanRecording:
    """Periodic two-Gaussian pulse train with seeded beat-to-beat jitter.

    ``cycles`` holds the ground-truth ``(start, stop)`` sample range of every
    cycle lying wholly inside the recording.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    fs = params.sample_rate_hz
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    base_period = 60.0 / params.heart_rate_bpm
    x = np.full(n, params.baseline, dtype=np.float64)
    cycles = []
    start = 0.0
    # one extra cycle on each side so the edges look like the interior
    start -= base_period
    while start < duration_s + base_period:
        period = base_period * (1.0 + params.period_jitter * rng.uniform(-1.0, 1.0))
        amp = 1.0 + params.amplitude_jitter * rng.uniform(-1.0, 1.0)
        for a, w, pos in ((params.systolic_amplitude, params.systolic_width,
                           params.systolic_position),
                          (params.dicrotic_amplitude, params.dicrotic_width,
                           params.dicrotic_position)):
            centre = start + pos * period
            sigma = w * period
            lo = max(0, int((centre - 5 * sigma) * fs))
            hi = min(n, int((centre + 5 * sigma) * fs) + 1)
            if lo < hi:
                x[lo:hi] += amp * a * np.exp(-0.5 * ((t[lo:hi] - centre) / sigma) ** 2)
        if start >= 0.0 and start + period <= duration_s:
            cycles.append((int(round(start * fs)), int(round((start + period) * fs))))
        start += period
    return CleanRecording(pp.RawSignal(x, fs), np.asarray(cycles, dtype=np.int64).reshape(-1, 2))


def inject_artifacts(sig: pp.RawSignal, spec: ArtifactSpec, seed: int = 0
                     ) -> tuple[pp.RawSignal, np.ndarray]:
    """Corrupt a copy of ``sig``; returns it with a boolean per-sample mask.

    The event count is Poisson with mean ``rate * duration / 60``; event
    starts are uniform over the recording.  Amplitudes scale with
    ``severity`` times the signal's peak-to-peak range.
    """
    x = sig.samples.copy()
    mask = np.zeros(x.size, dtype=bool)
    if spec.severity == 0.0 or spec.rate == 0.0 or x.size == 0:
        return pp.RawSignal(x, sig.sample_rate_hz), mask
    rng = np.random.Generator(np.random.PCG64(seed))
    fs = sig.sample_rate_hz
    span = float(np.ptp(sig.samples)) or 1.0
    n_events = rng.poisson(spec.rate * sig.duration_s / 60.0)
    length = max(1, int(round(spec.event_duration_s * fs)))
    for _ in range(n_events):
        s = int(rng.integers(0, max(1, x.size - length + 1)))
        e = min(x.size, s + length)
        seg = slice(s, e)
        m = e - s
        if spec.kind == "motion_spike":
            # a sharp bipolar impulse shaped by a Hann window
            sign = rng.choice((-1.0, 1.0))
            win = np.hanning(m + 2)[1:-1]
            x[seg] += sign * spec.severity * 3.0 * span * win * np.sin(
                np.linspace(0, 2 * np.pi * rng.uniform(0.5, 1.5), m))
        elif spec.kind == "baseline_wander":
            f = rng.uniform(0.1, 0.3)
            ph = rng.uniform(0, 2 * np.pi)
            x[seg] += spec.severity * 2.0 * span * np.sin(2 * np.pi * f * np.arange(m) / fs + ph)
        elif spec.kind == "flatline":
            x[seg] = x[s]
        else:  # noise_burst
            x[seg] += rng.normal(0.0, spec.severity * span, size=m)
        mask[seg] = True
    return pp.RawSignal(x, fs), mask


def label_pulse(mask: np.ndarray, start: int, stop: int, threshold: float = 0.2) -> int:
    frac = float(mask[start:stop].mean()) if stop > start else 0.0
    return pp.ARTIFACT if frac > threshold else pp.NON_ARTIFACT


@dataclass
class DatasetConfig:
    n_non_artifact: int = 6753
    n_artifact: int = 1437
    params: PulseModelParams = field(default_factory=PulseModelParams)
    artifacts: tuple[ArtifactSpec, ...] = DEFAULT_ARTIFACTS
    filter: pp.FilterSpec = field(default_factory=pp.FilterSpec)
    segmentation: pp.SegmentationConfig = field(default_factory=pp.SegmentationConfig)
    window_s: float = 30.0
    heart_rate_range: tuple[float, float] = (60.0, 140.0)
    artifact_window_fraction: float = 0.6
    mask_threshold: float = 0.2
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        d = dict(d)
        if "params" in d:
            d["params"] = PulseModelParams(**d["params"])
        if "artifacts" in d:
            d["artifacts"] = tuple(ArtifactSpec(**a) for a in d["artifacts"])
        if "filter" in d:
            d["filter"] = pp.FilterSpec(**d["filter"])
        if "segmentation" in d:
            d["segmentation"] = pp.SegmentationConfig(**d["segmentation"])
        for key in ("heart_rate_range",):
            if key in d:
                d[key] = tuple(d[key])
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class LabeledDataset:
    pulses: np.ndarray  # [n, 256]
    labels: np.ndarray  # 0 = non-artifact, 1 = artifact
    offsets: np.ndarray  # start sample within the source window
    lengths: np.ndarray  # pulse length before resampling
    windows: np.ndarray  # index of the source window
    manifest: dict

    @property
    def counts(self) -> dict[str, int]:
        return {"non_artifact": int(np.sum(self.labels == pp.NON_ARTIFACT)),
                "artifact": int(np.sum(self.labels == pp.ARTIFACT))}

    def __len__(self) -> int:
        return len(self.labels)

    def segments(self) -> list[pp.PulseSegment]:
        return [pp.PulseSegment(p, int(l), int(o), int(n))
                for p, l, o, n in zip(self.pulses, self.labels, self.offsets, self.lengths)]


def _window(cfg: DatasetConfig, rng: np.random.Generator):
    hr = float(rng.uniform(*cfg.heart_rate_range))
    params = dataclasses.replace(cfg.params, heart_rate_bpm=hr)
    base_seed = int(rng.integers(2**63))
    rec = generate_clean_ppg(params, cfg.window_s, base_seed)
    sig = rec.signal
    mask = np.zeros(len(sig.samples), dtype=bool)
    if rng.random() < cfg.artifact_window_fraction:
        for spec in cfg.artifacts:
            sig, m = inject_artifacts(sig, spec, int(rng.integers(2**63)))
            mask |= m
    return sig, mask


def build_dataset(cfg: DatasetConfig | None = None, *, n_non_artifact: int | None = None,
                  n_artifact: int | None = None, params: PulseModelParams | None = None,
                  specs: tuple[ArtifactSpec, ...] | None = None,
                  seed: int | None = None) -> LabeledDataset:
    """Generate windows until both class quotas are filled.

    Windows are filtered, segmented, resampled and normalized with the
    preprocessing pipeline; surplus pulses of an already-full class are
    rejected.  Raises :class:`CapacityError` once more than ten times the
    requested number of pulses has been produced without filling the quotas.
    Keyword arguments override the matching ``cfg`` fields.
    """
    cfg = cfg or DatasetConfig()
    overrides = {"n_non_artifact": n_non_artifact, "n_artifact": n_artifact, "params": params,
                 "artifacts": None if specs is None else tuple(specs), "seed": seed}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    if cfg.n_non_artifact < 1 or cfg.n_artifact < 1:
        raise ValueError("both class counts must be at least 1")
    need = {pp.NON_ARTIFACT: cfg.n_non_artifact, pp.ARTIFACT: cfg.n_artifact}
    budget = 10 * (cfg.n_non_artifact + cfg.n_artifact)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    rows = {pp.NON_ARTIFACT: [], pp.ARTIFACT: []}
    produced = 0
    k = 0
    while any(len(rows[c]) < need[c] for c in need):
        if produced > budget:
            raise CapacityError(
                f"generated {produced} pulses without reaching {need[0]} non-artifact / "
                f"{need[1]} artifact (have {len(rows[0])} / {len(rows[1])})")
        sig, mask = _window(cfg, rng)
        filt = pp.bandpass_filtfilt(sig, cfg.filter)
        for start, stop in pp.segment_pulses(filt, cfg.segmentation):
            produced += 1
            label = label_pulse(mask, start, stop, cfg.mask_threshold)
            if len(rows[label]) >= need[label]:
                continue
            try:
                z = pp.normalize(pp.resample_linear(filt.samples[start:stop]))
            except pp.DegeneratePulseError:
                continue
            rows[label].append((z, label, start, stop - start, k))
        k += 1

    ordered = rows[pp.NON_ARTIFACT] + rows[pp.ARTIFACT]
    ordered.sort(key=lambda r: (r[4], r[2]))
    manifest = {"generator": "grnppg.datagen", "config": cfg.to_dict(), "windows": k,
                "pulses_examined": produced}
    return LabeledDataset(
        pulses=np.array([r[0] for r in ordered]),
        labels=np.array([r[1] for r in ordered], dtype=np.int64),
        offsets=np.array([r[2] for r in ordered], dtype=np.int64),
        lengths=np.array([r[3] for r in ordered], dtype=np.int64),
        windows=np.array([r[4] for r in ordered], dtype=np.int64),
        manifest=manifest,
    )
