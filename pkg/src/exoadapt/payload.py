"""Three-class payload estimation behind pluggable backends, plus the
validation metrics (timely accuracy, confusion matrix, per-class precision).

Backends only ever see the cropped candidate image and its physical
features; ground truth stays in the session log. The explicit oracle
backend is the one sanctioned exception, used to validate plumbing.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import BackendError, InsufficientDataError, InvalidParameterError, SchemaError

PROB_SUM_TOL = 1e-6
HTTP_TIMEOUT_S = 0.150  # inference budget is ~100 ms round trip


class PayloadClass(Enum):
    LIGHT = 0
    MEDIUM = 1
    HEAVY = 2

    @property
    def reference_kg(self) -> float:
        return {PayloadClass.LIGHT: 5.0, PayloadClass.MEDIUM: 10.0, PayloadClass.HEAVY: 15.0}[self]

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "PayloadClass":
        try:
            return cls[label.upper()]
        except KeyError:
            raise SchemaError(f"unknown payload class {label!r}; use light|medium|heavy") from None


@dataclass(frozen=True)
class PhysicalFeatures:
    """Bounding-box size and distance of the locked candidate."""

    bbox_w: float
    bbox_h: float
    distance_m: float

    def __post_init__(self):
        if self.bbox_w <= 0 or self.bbox_h <= 0:
            raise InvalidParameterError("bbox dimensions must be positive")
        if self.distance_m < 0:
            raise InvalidParameterError("distance must be nonnegative")

    def to_json(self) -> str:
        return json.dumps(
            {"bbox_w": self.bbox_w, "bbox_h": self.bbox_h, "distance_m": self.distance_m}
        )


def _validate_probs(probs) -> tuple:
    p = tuple(float(v) for v in probs)
    if len(p) != 3:
        raise BackendError(f"backend returned {len(p)} probabilities, expected 3")
    if any(v < 0 for v in p) or abs(sum(p) - 1.0) > PROB_SUM_TOL:
        raise BackendError(f"backend probabilities invalid: {p}")
    return p


def argmax_class(probs) -> PayloadClass:
    """Most probable class; exact ties break toward the heavier class."""
    p = tuple(float(v) for v in probs)
    best = max(range(3), key=lambda i: (p[i], i))
    return PayloadClass(best)


def oracle_probs(truth: PayloadClass) -> tuple:
    p = [0.0, 0.0, 0.0]
    p[truth.value] = 1.0
    return tuple(p)


class ClassifierBackend(ABC):
    """Maps a candidate crop + physical features to class probabilities."""

    @abstractmethod
    def classify(self, crop, features: PhysicalFeatures) -> tuple:
        """Return (p_light, p_medium, p_heavy)."""


class StaticBackend(ClassifierBackend):
    """Always answers the same distribution (test stub)."""

    def __init__(self, probs):
        self.probs = _validate_probs(probs)

    def classify(self, crop, features):
        return self.probs


class SequenceBackend(ClassifierBackend):
    """Replays a recorded sequence of probability triples in order."""

    def __init__(self, prob_sequence):
        self._seq = [_validate_probs(p) for p in prob_sequence]
        self._i = 0

    def classify(self, crop, features):
        if self._i >= len(self._seq):
            raise BackendError("recorded sequence exhausted")
        probs = self._seq[self._i]
        self._i += 1
        return probs


class HttpBackend(ClassifierBackend):
    """Client for a remote inference service.

    Wire contract: POST multipart with a "crop" part (PNG bytes) and a
    "features" part (JSON {bbox_w,bbox_h,distance_m}); the service answers
    JSON {"p": [pl, pm, ph], "model": "...", "latency_ms": ...}.
    """

    def __init__(self, url: str, timeout_s: float = HTTP_TIMEOUT_S, client=None):
        import httpx

        self.url = url
        self.timeout_s = timeout_s
        self._client = client or httpx.Client(timeout=timeout_s)
        self.last_model = None
        self.last_latency_ms = None

    def classify(self, crop, features):
        import httpx

        try:
            resp = self._client.post(
                self.url,
                files={"crop": ("crop.png", crop or b"", "image/png")},
                data={"features": features.to_json()},
            )
            resp.raise_for_status()
            payload = resp.json()
        except httpx.TimeoutException as exc:
            raise BackendError(f"inference service timed out after {self.timeout_s}s") from exc
        except (httpx.HTTPError, ValueError) as exc:
            raise BackendError(f"inference service failed: {exc}") from exc
        if "p" not in payload:
            raise BackendError(f"malformed service response: {payload}")
        self.last_model = payload.get("model")
        self.last_latency_ms = payload.get("latency_ms")
        return _validate_probs(payload["p"])


def classify(backend: ClassifierBackend, crop, features: PhysicalFeatures):
    """(argmax class, full distribution) from a backend call."""
    probs = _validate_probs(backend.classify(crop, features))
    return argmax_class(probs), probs


def fallback_policy(locked: bool, default: PayloadClass = PayloadClass.LIGHT) -> PayloadClass | None:
    """Class to assume when the backend fails or the lock expires silently.

    Returns None (no-op) when no lock is active; otherwise the configured
    default, Light unless overridden (lowest assistance is the safe bet).
    """
    if not locked:
        return None
    return default


# ---------------------------------------------------------------------------
# validation metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassificationRecord:
    """Outcome of one lift: what was predicted, when, and the truth."""

    t: float
    predicted: PayloadClass
    truth: PayloadClass
    lift_onset: float
    subject: str | None = None
    timely: bool = field(init=False, default=False)

    def __post_init__(self):
        object.__setattr__(self, "timely", self.t < self.lift_onset)


@dataclass
class MetricsReport:
    """Confusion matrix (rows truth, columns predicted), accuracy, and
    per-class precision; late records sit in a separate per-truth column."""

    confusion: np.ndarray
    late: np.ndarray
    accuracy: float
    precision: tuple
    n_records: int
    timeliness_required: bool
    per_subject: dict

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "late": self.late.tolist(),
            "accuracy": self.accuracy,
            "precision": [None if p is None else p for p in self.precision],
            "n_records": self.n_records,
            "timeliness_required": self.timeliness_required,
            "per_subject": dict(sorted(self.per_subject.items())),
        }


def evaluate(records, timeliness_required: bool = True) -> MetricsReport:
    """Fold classification records into the validation metrics.

    With timeliness_required, only timely records enter the 3x3 matrix;
    late records are tallied per truth class in the late column and count
    against accuracy. Without it, every record enters the matrix.
    """
    records = list(records)
    if not records:
        raise InsufficientDataError("no classification records to evaluate")
    confusion = np.zeros((3, 3), dtype=int)
    late = np.zeros(3, dtype=int)
    for r in records:
        if timeliness_required and not r.timely:
            late[r.truth.value] += 1
        else:
            confusion[r.truth.value, r.predicted.value] += 1
    accuracy = float(np.trace(confusion) / len(records))
    precision = []
    for j in range(3):
        col = int(confusion[:, j].sum())
        precision.append(None if col == 0 else float(confusion[j, j] / col))
    subjects = sorted({r.subject for r in records if r.subject is not None})
    per_subject = {}
    for s in subjects:
        sub = [r for r in records if r.subject == s]
        correct = sum(
            1
            for r in sub
            if r.predicted == r.truth and (r.timely or not timeliness_required)
        )
        per_subject[s] = correct / len(sub)
    return MetricsReport(
        confusion=confusion,
        late=late,
        accuracy=accuracy,
        precision=tuple(precision),
        n_records=len(records),
        timeliness_required=timeliness_required,
        per_subject=per_subject,
    )
