"""EMG processing chain: bandpass filtering, RMS envelopes, MVC
normalization, and activity-reduction statistics.

The chain mirrors standard surface-EMG practice: zero-phase Butterworth
bandpass (20-450 Hz), full-wave rectification, 200 ms trailing RMS window,
normalization to the peak of an MVC recording processed the same way, then
mean/peak activity compared between exoskeleton and no-exoskeleton
conditions as percentage reductions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import signal as sps

from .errors import (
    InsufficientDataError,
    InvalidParameterError,
    SchemaError,
    SpanRangeError,
)

BACK_MUSCLES = ("ESI-L", "ESI-R", "ESL-L", "ESL-R")
LEG_MUSCLES = ("BF", "RF")
ALL_MUSCLES = BACK_MUSCLES + LEG_MUSCLES

MUSCLE_GROUPS = {
    "back": BACK_MUSCLES,
    "legs": LEG_MUSCLES,
    "all": ALL_MUSCLES,
}

DEFAULT_RATE_HZ = 2150.0
DEFAULT_BAND_HZ = (20.0, 450.0)
DEFAULT_RMS_WINDOW_MS = 200.0
# 4th order per band edge; forward-backward application keeps zero phase.
DEFAULT_FILTER_ORDER = 4


@dataclass(frozen=True)
class EmgTrace:
    """Raw voltage series for one muscle channel."""

    samples: np.ndarray
    rate: float
    muscle_id: str = ""
    side: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidParameterError("EmgTrace.samples must be a nonempty 1-D series")
        if not self.rate > 0:
            raise InvalidParameterError(f"EmgTrace.rate must be positive, got {self.rate}")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.rate


@dataclass(frozen=True)
class Envelope:
    """RMS envelope; values are volts until MVC normalization, %MVC after."""

    values: np.ndarray
    rate: float
    window_ms: float
    exceeds_mvc: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise InvalidParameterError("Envelope.values must be a nonempty 1-D series")
        if not self.window_ms > 0:
            raise InvalidParameterError(f"Envelope.window_ms must be positive, got {self.window_ms}")
        object.__setattr__(self, "values", values)

    @property
    def duration_s(self) -> float:
        return self.values.size / self.rate


@dataclass(frozen=True)
class LiftCycleSpan:
    """One lifting cycle, [start, end) in seconds."""

    start: float
    end: float

    def __post_init__(self):
        if not self.end > self.start:
            raise InvalidParameterError(f"span end {self.end} must exceed start {self.start}")


def metronome_spans(n_cycles: int = 7, bpm: float = 35.0, offset_s: float = 0.0) -> list[LiftCycleSpan]:
    """Lift spans implied by a metronome schedule (one cycle per beat)."""
    period = 60.0 / bpm
    return [
        LiftCycleSpan(offset_s + i * period, offset_s + (i + 1) * period)
        for i in range(n_cycles)
    ]


def design_bandpass(
    low_hz: float,
    high_hz: float,
    rate: float,
    order: int = DEFAULT_FILTER_ORDER,
) -> np.ndarray:
    """Butterworth bandpass as second-order sections (single-pass design).

    The -3 dB points of this design sit exactly at low_hz and high_hz;
    zero-phase application (see bandpass_filter) squares the magnitude
    response, so cutoff attenuation doubles in dB there.
    """
    if not (0 < low_hz < high_hz):
        raise InvalidParameterError(f"need 0 < low_hz < high_hz, got ({low_hz}, {high_hz})")
    if not high_hz < rate / 2:
        raise InvalidParameterError(
            f"high cutoff {high_hz} Hz must stay below Nyquist {rate / 2} Hz"
        )
    return sps.butter(order, [low_hz, high_hz], btype="bandpass", fs=rate, output="sos")


def bandpass_filter(
    trace: EmgTrace,
    low_hz: float = DEFAULT_BAND_HZ[0],
    high_hz: float = DEFAULT_BAND_HZ[1],
    order: int = DEFAULT_FILTER_ORDER,
) -> EmgTrace:
    """Zero-phase (forward-backward) Butterworth bandpass of a raw trace."""
    sos = design_bandpass(low_hz, high_hz, trace.rate, order)
    try:
        filtered = sps.sosfiltfilt(sos, trace.samples)
    except ValueError as exc:
        # scipy rejects inputs shorter than its edge-padding length
        raise InsufficientDataError(
            f"trace of {trace.samples.size} samples is too short for zero-phase filtering"
        ) from exc
    return replace(trace, samples=filtered)


def window_samples(window_ms: float, rate: float) -> int:
    """RMS window length in samples: round(window_ms / 1000 * rate)."""
    n = int(round(window_ms / 1000.0 * rate))
    if n < 1:
        raise InvalidParameterError(
            f"window of {window_ms} ms is shorter than one sample at {rate} Hz"
        )
    return n


def rectify_rms(trace: EmgTrace, window_ms: float = DEFAULT_RMS_WINDOW_MS) -> Envelope:
    """Full-wave rectification followed by a trailing RMS window.

    values[i] is the RMS over samples (i - n + 1 .. i); the first n - 1
    entries use the partial (growing) window that is actually available.
    """
    n = window_samples(window_ms, trace.rate)
    squared = trace.samples * trace.samples
    csum = np.cumsum(squared)
    sums = csum.copy()
    sums[n:] = csum[n:] - csum[:-n]
    counts = np.minimum(np.arange(1, trace.samples.size + 1), n)
    # cumsum differences can dip below zero from rounding
    values = np.sqrt(np.maximum(sums, 0.0) / counts)
    return Envelope(values=values, rate=trace.rate, window_ms=window_ms)


def normalize_mvc(env: Envelope, mvc_peak: float) -> Envelope:
    """Express an envelope as a percentage of the MVC reference peak.

    Values above 100 %MVC are kept (dynamic tasks legitimately exceed the
    isometric reference) but the returned envelope carries exceeds_mvc=True.
    """
    if not mvc_peak > 0:
        raise InvalidParameterError(f"mvc_peak must be positive, got {mvc_peak}")
    values = env.values / mvc_peak * 100.0
    return Envelope(
        values=values,
        rate=env.rate,
        window_ms=env.window_ms,
        exceeds_mvc=bool(np.any(values > 100.0)),
    )


def mvc_peak(
    trace: EmgTrace,
    low_hz: float = DEFAULT_BAND_HZ[0],
    high_hz: float = DEFAULT_BAND_HZ[1],
    window_ms: float = DEFAULT_RMS_WINDOW_MS,
) -> float:
    """MVC reference: peak of the RMS envelope of the MVC recording
    processed by the same filter/RMS pipeline."""
    env = rectify_rms(bandpass_filter(trace, low_hz, high_hz), window_ms)
    return float(env.values.max())


def _span_slice(env: Envelope, span: LiftCycleSpan) -> slice:
    # sample i sits at time i / rate; [start, end) selects
    # ceil(start * rate) <= i < ceil(end * rate). The 1e-9 guard keeps
    # exact tiling boundaries from double-counting under float noise.
    i0 = math.ceil(span.start * env.rate - 1e-9)
    i1 = math.ceil(span.end * env.rate - 1e-9)
    if i0 < 0 or i1 > env.values.size:
        raise SpanRangeError(
            f"span [{span.start}, {span.end}) s outside envelope of {env.duration_s:.6f} s"
        )
    return slice(i0, i1)


def activity_stats(
    env: Envelope,
    spans: list[LiftCycleSpan] | None = None,
    per_cycle: bool = False,
) -> tuple[float, float]:
    """(mean, peak) activity over the selected samples.

    With spans, statistics run over the concatenation of all span samples;
    per_cycle=True instead computes them per span and averages across
    spans. Without spans the whole envelope is used.
    """
    if spans is None:
        selected = [env.values]
    else:
        selected = [env.values[_span_slice(env, s)] for s in spans]
        selected = [s for s in selected if s.size > 0]
        if not selected:
            raise InsufficientDataError("no envelope samples fall inside the given spans")
    if per_cycle:
        means = [float(np.mean(s)) for s in selected]
        peaks = [float(np.max(s)) for s in selected]
        return float(np.mean(means)), float(np.mean(peaks))
    data = np.concatenate(selected)
    return float(np.mean(data)), float(np.max(data))


def reduction_percent(noexo: float, exo: float) -> float:
    """Percentage reduction of the exo condition relative to no-exo.

    Negative when wearing the exoskeleton increases activity.
    """
    if not noexo > 0:
        raise InvalidParameterError(f"no-exo reference must be positive, got {noexo}")
    return 100.0 * (noexo - exo) / noexo


def group_aggregate(reductions: dict[str, float], group: str) -> float:
    """Unweighted mean of per-muscle reduction percentages over a group."""
    if group not in MUSCLE_GROUPS:
        raise InvalidParameterError(f"unknown muscle group {group!r}; use back|legs|all")
    unknown = set(reductions) - set(ALL_MUSCLES)
    if unknown:
        raise SchemaError(f"unknown muscle label(s): {sorted(unknown)}")
    members = [m for m in MUSCLE_GROUPS[group] if m in reductions]
    if not members:
        raise InsufficientDataError(f"no muscles of group {group!r} present in stats")
    return float(np.mean([reductions[m] for m in members]))
