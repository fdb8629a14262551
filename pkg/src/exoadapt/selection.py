"""Candidate selection: score detections by pick-up likelihood and lock.

Each detection gets a raw factor alpha = 10 * exp(-l_theta*|theta|) *
exp(-l_d*d): objects near the view center and close to the user score
high. Softmax over the alphas yields pick-up probabilities; the winner is
locked once it comes within the lock distance, freezing the pipeline for
the upcoming lifting cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidCropError, InvalidParameterError, NoCandidatesError

LAMBDA_THETA = 0.1   # per degree
LAMBDA_DISTANCE = 0.5  # per meter
ALPHA_SCALE = 10.0
LOCK_THRESHOLD_M = 2.0  # inclusive


@dataclass(frozen=True)
class Detection:
    """One detected object in a frame."""

    bbox: tuple  # (x, y, w, h) pixels
    theta_deg: float
    distance_m: float
    label: str = "box"

    def __post_init__(self):
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise InvalidParameterError(f"bbox w/h must be positive, got {self.bbox}")
        if self.distance_m < 0:
            raise InvalidParameterError(f"distance {self.distance_m} m is negative")
        object.__setattr__(self, "bbox", (float(x), float(y), float(w), float(h)))


@dataclass(frozen=True)
class CandidateScore:
    index: int
    alpha: float
    probability: float


@dataclass(frozen=True)
class LockedCandidate:
    detection: Detection
    t: float

    @property
    def crop_bbox(self) -> tuple:
        return self.detection.bbox


def softmax(values) -> np.ndarray:
    """Numerically stable softmax (invariant to adding a constant)."""
    v = np.asarray(values, dtype=float)
    e = np.exp(v - v.max())
    return e / e.sum()


def pickup_scores(
    detections,
    lambda_theta: float = LAMBDA_THETA,
    lambda_d: float = LAMBDA_DISTANCE,
    scale: float = ALPHA_SCALE,
    temperature: float = 1.0,
    theta_unit: str = "deg",
) -> list[CandidateScore]:
    """Raw factors and softmax-normalized pick-up probabilities.

    Angles are treated as degrees; pass theta_unit="rad" when a log
    stores radians. temperature divides the factors before the softmax
    (1.0 uses them directly); neither knob moves the argmax.
    """
    detections = list(detections)
    if not detections:
        raise NoCandidatesError("no detections to score")
    if theta_unit not in ("deg", "rad"):
        raise InvalidParameterError(f"theta_unit must be deg|rad, got {theta_unit!r}")
    if temperature <= 0:
        raise InvalidParameterError(f"temperature must be positive, got {temperature}")
    theta = np.array([abs(d.theta_deg) for d in detections])
    if theta_unit == "rad":
        theta = np.degrees(theta)
    dist = np.array([d.distance_m for d in detections])
    alpha = scale * np.exp(-lambda_theta * theta) * np.exp(-lambda_d * dist)
    prob = softmax(alpha / temperature)
    return [
        CandidateScore(index=i, alpha=float(a), probability=float(p))
        for i, (a, p) in enumerate(zip(alpha, prob))
    ]


def select_candidate(
    scores,
    detections,
    lock_threshold_m: float = LOCK_THRESHOLD_M,
    t: float = 0.0,
) -> LockedCandidate | None:
    """Lock the most probable detection if it is within the threshold.

    Selection is by probability first; a winner standing farther than the
    threshold yields no lock even when another detection is nearer.
    Ties break by smaller distance, then smaller |theta|, then lower index.
    """
    scores = list(scores)
    detections = list(detections)
    if len(scores) != len(detections):
        raise InvalidParameterError("scores and detections are misaligned")
    if not scores:
        return None
    best = min(
        scores,
        key=lambda s: (
            -s.probability,
            detections[s.index].distance_m,
            abs(detections[s.index].theta_deg),
            s.index,
        ),
    )
    det = detections[best.index]
    if det.distance_m <= lock_threshold_m:
        return LockedCandidate(detection=det, t=t)
    return None


def distance_from_tof(tof_map, bbox) -> float:
    """Median distance over the bbox footprint of a per-pixel range map."""
    tof = np.asarray(tof_map, dtype=float)
    h, w = tof.shape
    crop = crop_region(w, h, bbox)
    x, y, cw, ch = (int(round(v)) for v in crop)
    return float(np.median(tof[y : y + ch, x : x + cw]))


def crop_region(frame_w: int, frame_h: int, bbox) -> tuple:
    """Intersect a bbox with the frame; empty intersection is an error."""
    if frame_w <= 0 or frame_h <= 0:
        raise InvalidParameterError(f"frame dims must be positive, got ({frame_w}, {frame_h})")
    x, y, w, h = (float(v) for v in bbox)
    x0 = max(x, 0.0)
    y0 = max(y, 0.0)
    x1 = min(x + w, float(frame_w))
    y1 = min(y + h, float(frame_h))
    if x1 <= x0 or y1 <= y0:
        raise InvalidCropError(f"bbox {bbox} does not intersect {frame_w}x{frame_h} frame")
    return (x0, y0, x1 - x0, y1 - y0)
