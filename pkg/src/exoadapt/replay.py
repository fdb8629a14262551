"""Discrete-event replay of lifting sessions through the full pipeline.

A session log is an ordered event stream (frames with detections,
distance readings, classifier outputs, lift onsets/ends). Replay drives
selection -> classification -> control deterministically and scores each
lift, producing a serializable report; cohorts of reports aggregate into
pooled metrics. A seeded generator builds synthetic 3-box sessions for
testing and benchmarking.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .control import (
    ClassificationEvent,
    ControlState,
    ControlStateMachine,
    KpylRange,
    LiftEndEvent,
    LiftOnsetEvent,
    LockEvent,
)
from .errors import InsufficientDataError, SchemaError
from .payload import ClassificationRecord, MetricsReport, PayloadClass, evaluate, oracle_probs
from .selection import Detection, pickup_scores, select_candidate

TIME_QUANTUM_S = 0.001
# simultaneous events (same millisecond) settle in this order
EVENT_PRIORITY = {
    "distance": 0,
    "frame": 1,
    "classification": 2,
    "lift_end": 3,
    "lift_onset": 4,
}
EVENT_TYPES = tuple(EVENT_PRIORITY)

LIFT_CYCLE_S = round(60.0 / 35.0, 3)  # one metronome cycle at 35 bpm


def validate_event(obj: dict, where: str) -> dict:
    """Check one event object against the session schema."""
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: event must be an object, got {type(obj).__name__}")
    etype = obj.get("type")
    if etype not in EVENT_TYPES:
        raise SchemaError(f"{where}: unknown event type {etype!r}")
    if not isinstance(obj.get("t"), (int, float)):
        raise SchemaError(f"{where}: missing numeric timestamp 't'")
    if etype == "frame":
        dets = obj.get("detections")
        if not isinstance(dets, list):
            raise SchemaError(f"{where}: frame event needs a 'detections' list")
        for d in dets:
            bbox = d.get("bbox")
            if not (isinstance(bbox, list) and len(bbox) == 4):
                raise SchemaError(f"{where}: detection bbox must be [x, y, w, h]")
            for key in ("theta_deg", "distance_m"):
                if not isinstance(d.get(key), (int, float)):
                    raise SchemaError(f"{where}: detection missing numeric {key!r}")
    elif etype == "distance":
        if not isinstance(obj.get("distance_m"), (int, float)):
            raise SchemaError(f"{where}: distance event missing 'distance_m'")
    elif etype == "classification":
        p = obj.get("p")
        if not (isinstance(p, list) and len(p) == 3 and all(isinstance(v, (int, float)) for v in p)):
            raise SchemaError(f"{where}: classification event needs 'p' with 3 numbers")
    elif etype == "lift_onset":
        truth = obj.get("truth")
        if truth not in ("light", "medium", "heavy"):
            raise SchemaError(f"{where}: lift_onset needs truth light|medium|heavy, got {truth!r}")
    return obj


@dataclass
class SessionLog:
    """One subject's recorded (or synthesized) event stream."""

    subject: str
    events: list = field(default_factory=list)

    def validate(self) -> "SessionLog":
        last_t = -np.inf
        open_lift = False
        for i, ev in enumerate(self.events):
            where = f"event {i}"
            validate_event(ev, where)
            if ev["t"] < last_t:
                raise SchemaError(f"{where}: timestamp {ev['t']} decreases (prev {last_t})")
            last_t = ev["t"]
            if ev["type"] == "lift_onset":
                if open_lift:
                    raise SchemaError(f"{where}: lift_onset while previous lift still open")
                open_lift = True
            elif ev["type"] == "lift_end":
                if not open_lift:
                    raise SchemaError(f"{where}: lift_end without matching onset")
                open_lift = False
        if open_lift:
            raise SchemaError("log ends with an unclosed lift")
        return self

    @property
    def n_lifts(self) -> int:
        return sum(1 for ev in self.events if ev["type"] == "lift_onset")


def _ordered(events):
    return sorted(
        enumerate(events),
        key=lambda pair: (
            int(round(pair[1]["t"] / TIME_QUANTUM_S)),
            EVENT_PRIORITY[pair[1]["type"]],
            pair[0],
        ),
    )


@dataclass
class SessionReport:
    subject: str
    seed: int
    backend: str
    commands: list
    records: list
    latency_margins: list
    metrics: MetricsReport
    raw_accuracy: float

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "seed": self.seed,
            "backend": self.backend,
            "n_lifts": len(self.records),
            "commands": [
                {"t": c.t, "k_pyl": c.k_pyl, "class": c.source_class.label, "state": c.state}
                for c in self.commands
            ],
            "records": [
                {
                    "t": r.t,
                    "predicted": r.predicted.label,
                    "truth": r.truth.label,
                    "lift_onset": r.lift_onset,
                    "timely": r.timely,
                }
                for r in self.records
            ],
            "latency_margins": list(self.latency_margins),
            "metrics": self.metrics.to_dict(),
            "raw_accuracy": self.raw_accuracy,
        }


def run_session(log: SessionLog, config=None) -> SessionReport:
    """Replay one session deterministically and score every lift.

    The recognition pipeline only runs while idle (locking blocks it);
    each lift yields exactly one classification record, scored from the
    last pre-onset prediction, else the first late one, else the fallback.
    """
    from .config import Config

    cfg = config or Config()
    log.validate()
    if log.n_lifts == 0:
        raise InsufficientDataError(f"session {log.subject!r} contains no lifts to score")
    ordered = _ordered(log.events)

    machine = ControlStateMachine(
        KpylRange(cfg.control.k_min, cfg.control.k_max, cfg.control.medium_fraction),
        fallback=PayloadClass.from_label(cfg.control.fallback_class),
        cooldown_s=cfg.control.cooldown_s,
    )

    # oracle backend answers with the truth of the lift each prediction precedes
    next_truth = [None] * len(ordered)
    upcoming = None
    for pos in range(len(ordered) - 1, -1, -1):
        ev = ordered[pos][1]
        if ev["type"] == "lift_onset":
            upcoming = PayloadClass.from_label(ev["truth"])
        next_truth[pos] = upcoming

    records = []
    margins = []
    current_onset = None
    current_truth = None

    for pos, (_, ev) in enumerate(ordered):
        # events collapse onto the 1 ms quantum; priority settled ordering
        t = round(float(ev["t"]), 3)
        etype = ev["type"]
        if etype == "frame":
            machine.advance(t)
            if machine.state is not ControlState.IDLE or not ev["detections"]:
                continue
            dets = [
                Detection(
                    bbox=tuple(d["bbox"]),
                    theta_deg=float(d["theta_deg"]),
                    distance_m=float(d["distance_m"]),
                    label=d.get("label", "box"),
                )
                for d in ev["detections"]
            ]
            scores = pickup_scores(
                dets,
                cfg.selection.lambda_theta,
                cfg.selection.lambda_d,
                temperature=cfg.selection.softmax_temperature,
                theta_unit=cfg.selection.theta_unit,
            )
            lock = select_candidate(scores, dets, cfg.selection.lock_threshold_m, t=t)
            if lock is not None:
                machine.step(LockEvent(t=t, candidate=lock))
        elif etype == "distance":
            machine.advance(t)
            continue  # ranging telemetry; selection uses per-detection distances
        elif etype == "classification":
            if cfg.replay.backend == "oracle":
                if next_truth[pos] is None:
                    continue  # no upcoming lift to inform
                probs = oracle_probs(next_truth[pos])
            else:
                probs = tuple(float(v) for v in ev["p"])
            machine.step(ClassificationEvent(t=t, probs=probs))
        elif etype == "lift_onset":
            current_onset = t
            current_truth = PayloadClass.from_label(ev["truth"])
            machine.step(LiftOnsetEvent(t=t, truth=current_truth))
        elif etype == "lift_end":
            machine.step(LiftEndEvent(t=t))
            latched = machine.command_log[-1]
            late = machine.late_by_lift[-1]
            if latched.source == "classified":
                predicted, t_pred = latched.source_class, latched.t
            elif late:
                predicted, t_pred = late[0].predicted, late[0].t
            else:
                predicted, t_pred = machine.fallback, current_onset
            records.append(
                ClassificationRecord(
                    t=t_pred,
                    predicted=predicted,
                    truth=current_truth,
                    lift_onset=current_onset,
                    subject=log.subject,
                )
            )
            margins.append(round(current_onset - t_pred, 9))

    metrics = evaluate(records, timeliness_required=cfg.replay.timeliness_required)
    raw = evaluate(records, timeliness_required=False)
    return SessionReport(
        subject=log.subject,
        seed=cfg.seed,
        backend=cfg.replay.backend,
        commands=list(machine.command_log),
        records=records,
        latency_margins=margins,
        metrics=metrics,
        raw_accuracy=raw.accuracy,
    )


@dataclass
class CohortReport:
    n_sessions: int
    mean_accuracy: float
    pooled_accuracy: float
    pooled_confusion: np.ndarray
    pooled_late: np.ndarray
    pooled_precision: tuple
    per_subject: dict

    def to_dict(self) -> dict:
        return {
            "n_sessions": self.n_sessions,
            "mean_accuracy": self.mean_accuracy,
            "pooled_accuracy": self.pooled_accuracy,
            "pooled_confusion": self.pooled_confusion.tolist(),
            "pooled_late": self.pooled_late.tolist(),
            "pooled_precision": [None if p is None else p for p in self.pooled_precision],
            "per_subject": dict(sorted(self.per_subject.items())),
        }


def aggregate(reports) -> CohortReport:
    """Pool session reports: per-subject accuracies, summed confusion."""
    reports = list(reports)
    if not reports:
        raise SchemaError("no session reports to aggregate")
    confusion = sum(r.metrics.confusion for r in reports)
    late = sum(r.metrics.late for r in reports)
    total = sum(r.metrics.n_records for r in reports)
    per_subject = {r.subject: r.metrics.accuracy for r in reports}
    precision = []
    for j in range(3):
        col = int(confusion[:, j].sum())
        precision.append(None if col == 0 else float(confusion[j, j] / col))
    return CohortReport(
        n_sessions=len(reports),
        mean_accuracy=float(np.mean([r.metrics.accuracy for r in reports])),
        pooled_accuracy=float(np.trace(confusion) / total),
        pooled_confusion=confusion,
        pooled_late=late,
        pooled_precision=tuple(precision),
        per_subject=per_subject,
    )


# ---------------------------------------------------------------------------
# synthetic sessions
# ---------------------------------------------------------------------------

_SYNTH_TRUTHS = (PayloadClass.LIGHT, PayloadClass.MEDIUM, PayloadClass.HEAVY)


def _quant(t: float) -> float:
    return round(t, 3)


def synth_session(
    subject: str = "S01",
    seed: int = 0,
    flip_prob: float = 0.0,
    n_rounds: int = 3,
    late_lifts: tuple = (),
    flip_lifts: tuple = (),
) -> SessionLog:
    """Seeded 3-box, 3-round session: walk up, lock, classify, lift.

    Box positions and contents reshuffle every round. flip_prob corrupts
    each classification to a uniformly-chosen wrong class with that
    probability; lift indices in flip_lifts are misclassified
    deterministically instead. Indices in late_lifts get their classifier
    output delayed past the lift onset.
    """
    rng = random.Random(seed)
    events = []
    t = 0.5
    lift_idx = 0
    for _ in range(n_rounds):
        order = rng.sample(range(3), 3)
        for box in order:
            truth = _SYNTH_TRUTHS[box]
            distractors = [b for b in range(3) if b != box]
            n_frames = rng.randint(5, 7)
            target_d = np.linspace(3.2, 1.4, n_frames)
            target_th = np.linspace(12.0, 2.0, n_frames)
            lock_t = None
            for i in range(n_frames):
                ft = _quant(t + 0.2 * i)
                d_t = round(target_d[i] + rng.uniform(-0.05, 0.05), 3)
                th_t = round(target_th[i] + rng.uniform(-1.0, 1.0), 2)
                dets = [_synth_detection(rng, th_t, d_t)]
                for _d in distractors:
                    dets.append(
                        _synth_detection(
                            rng,
                            rng.choice([-1, 1]) * rng.uniform(25.0, 40.0),
                            rng.uniform(2.6, 4.0),
                        )
                    )
                events.append({"type": "frame", "t": ft, "detections": dets})
                events.append({"type": "distance", "t": ft, "distance_m": d_t})
                if lock_t is None and d_t <= 2.0:
                    lock_t = ft
                    break
            assert lock_t is not None, "approach never crossed the lock threshold"
            onset_t = _quant(lock_t + rng.uniform(0.8, 1.1))
            if lift_idx in late_lifts:
                cls_t = _quant(onset_t + rng.uniform(0.1, 0.3))
            else:
                cls_t = _quant(lock_t + rng.uniform(0.15, 0.35))
            predicted = truth
            if lift_idx in flip_lifts:
                predicted = _SYNTH_TRUTHS[(truth.value + 1) % 3]
            elif flip_prob > 0 and rng.random() < flip_prob:
                predicted = _SYNTH_TRUTHS[rng.choice([b for b in range(3) if b != truth.value])]
            probs = [0.1, 0.1, 0.1]
            probs[predicted.value] = 0.8
            events.append({"type": "classification", "t": cls_t, "p": probs})
            events.append({"type": "lift_onset", "t": onset_t, "truth": truth.label})
            end_t = _quant(onset_t + LIFT_CYCLE_S)
            events.append({"type": "lift_end", "t": end_t})
            t = _quant(end_t + rng.uniform(1.5, 2.0))
            lift_idx += 1
    events.sort(key=lambda ev: (int(round(ev["t"] / TIME_QUANTUM_S)), EVENT_PRIORITY[ev["type"]]))
    return SessionLog(subject=subject, events=events).validate()


def _synth_detection(rng, theta_deg: float, distance_m: float) -> dict:
    # apparent size shrinks with distance
    w = round(max(30.0, 260.0 / max(distance_m, 0.5)) + rng.uniform(-8, 8), 1)
    h = round(w * rng.uniform(0.7, 0.9), 1)
    x = round(320 + theta_deg * 8.0 - w / 2, 1)
    y = round(200 + rng.uniform(-15, 15), 1)
    return {
        "bbox": [x, y, w, h],
        "theta_deg": round(theta_deg, 2),
        "distance_m": round(distance_m, 3),
        "label": "box",
    }


def synth_cohort(n_subjects: int = 12, seed: int = 42, flip_prob: float = 0.0) -> list:
    """Independent synthetic sessions for a cohort of subjects."""
    return [
        synth_session(subject=f"S{i + 1:02d}", seed=seed * 1000 + i, flip_prob=flip_prob)
        for i in range(n_subjects)
    ]
