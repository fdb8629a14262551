"""File formats: EMG CSV + sidecar metadata, sample/questionnaire/vote
inputs, session JSONL, and atomic output writing."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .control import TorqueProfile
from .emg import EmgTrace, LiftCycleSpan
from .errors import SchemaError
from .replay import SessionLog, validate_event
from .surfaces import PerfSample, QuestionnaireResponse

SAMPLE_KINDS = ("emg", "discomfort", "preference")


def atomic_write_text(path, text: str):
    """Write via temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# EMG inputs / outputs
# ---------------------------------------------------------------------------


def read_emg_meta(path) -> dict:
    """Sidecar metadata: {"rate_hz": ..., "subject": ..., "condition": ...}."""
    with open(path, encoding="utf-8") as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(meta, dict) or not isinstance(meta.get("rate_hz"), (int, float)):
        raise SchemaError(f"{path}: metadata must carry numeric 'rate_hz'")
    if meta["rate_hz"] <= 0:
        raise SchemaError(f"{path}: rate_hz must be positive")
    return meta


def read_emg_csv(csv_path, meta_path) -> tuple[dict, dict]:
    """Multi-muscle EMG recording: header time_s,<muscle>..., volts.

    Returns ({muscle_id: EmgTrace}, metadata). The declared rate must
    match the time column within 1%.
    """
    meta = read_emg_meta(meta_path)
    rate = float(meta["rate_hz"])
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{csv_path}: empty file") from None
        if not header or header[0] != "time_s" or len(header) < 2:
            raise SchemaError(f"{csv_path}: header must be time_s,<muscle_id>,...")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{csv_path}: line {lineno}: expected {len(header)} columns")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise SchemaError(f"{csv_path}: line {lineno}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{csv_path}: no data rows")
    data = np.asarray(rows)
    times = data[:, 0]
    if times.size >= 2:
        implied = 1.0 / float(np.median(np.diff(times)))
        if abs(implied - rate) / rate > 0.01:
            raise SchemaError(
                f"{meta_path}: declares rate_hz={rate} but {csv_path} implies {implied:.1f} Hz"
            )
    traces = {}
    for j, muscle in enumerate(header[1:], start=1):
        traces[muscle] = EmgTrace(samples=data[:, j], rate=rate, muscle_id=muscle)
    return traces, meta


def read_spans_csv(path) -> list:
    """Lift-cycle spans: header start_s,end_s."""
    spans = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["start_s", "end_s"]:
            raise SchemaError(f"{path}: header must be start_s,end_s")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                spans.append(LiftCycleSpan(float(row[0]), float(row[1])))
            except (ValueError, IndexError) as exc:
                raise SchemaError(f"{path}: line {lineno}: {exc}") from exc
    return spans


def envelope_csv_text(env, muscle: str = "") -> str:
    lines = ["time_s,value_pct_mvc"]
    for i, v in enumerate(env.values):
        lines.append(f"{i / env.rate:.6f},{v:.6f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# surface inputs / outputs
# ---------------------------------------------------------------------------


def read_samples_csv(path) -> dict:
    """Metric samples: header assistance,payload_kg,value,metric_kind.

    Returns {kind: [PerfSample, ...]} for kinds emg|discomfort|preference.
    """
    samples = {k: [] for k in SAMPLE_KINDS}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["assistance", "payload_kg", "value", "metric_kind"]:
            raise SchemaError(f"{path}: header must be assistance,payload_kg,value,metric_kind")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise SchemaError(f"{path}: line {lineno}: expected 4 columns")
            kind = row[3].strip()
            if kind not in SAMPLE_KINDS:
                raise SchemaError(
                    f"{path}: line {lineno}: metric_kind must be one of {SAMPLE_KINDS}, got {kind!r}"
                )
            try:
                samples[kind].append(PerfSample(float(row[0]), float(row[1]), float(row[2])))
            except ValueError as exc:
                raise SchemaError(f"{path}: line {lineno}: {exc}") from exc
    return samples


def read_questionnaires_json(path) -> list:
    """JSON array of {condition: {assistance, payload_kg}, ratings: [q1..q9]}."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise SchemaError(f"{path}: expected a JSON array")
    responses = []
    for i, item in enumerate(raw):
        cond = item.get("condition", {})
        if "assistance" not in cond or "payload_kg" not in cond:
            raise SchemaError(f"{path}: entry {i}: condition needs assistance and payload_kg")
        if "ratings" not in item:
            raise SchemaError(f"{path}: entry {i}: missing ratings")
        responses.append(
            QuestionnaireResponse(
                ratings=tuple(item["ratings"]),
                assistance=float(cond["assistance"]),
                payload=float(cond["payload_kg"]),
            )
        )
    return responses


def read_votes_json(path) -> list:
    """JSON array of {"light_payload_choice": ..., "heavy_payload_choice": ...}."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise SchemaError(f"{path}: expected a JSON array")
    votes = []
    for i, item in enumerate(raw):
        try:
            votes.append((item["light_payload_choice"], item["heavy_payload_choice"]))
        except (KeyError, TypeError):
            raise SchemaError(
                f"{path}: entry {i}: needs light_payload_choice and heavy_payload_choice"
            ) from None
    return votes


def grid_csv_text(grid, values: np.ndarray) -> str:
    """Grid values as CSV: first column payload_kg, one column per assistance."""
    values = np.asarray(values)
    header = "payload_kg," + ",".join(f"{a:.6f}" for a in grid.assist)
    lines = [header]
    for j, p in enumerate(grid.payload):
        lines.append(f"{p:.6f}," + ",".join(f"{values[i, j]:.9f}" for i in range(len(grid.assist))))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# session logs and recorded classifier output
# ---------------------------------------------------------------------------


def load_session_jsonl(path) -> SessionLog:
    """Session log: header line {"type": "session", "subject": ...} then
    one event object per line."""
    events = []
    subject = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            if lineno == 1 and isinstance(obj, dict) and obj.get("type") == "session":
                subject = obj.get("subject")
                if not isinstance(subject, str) or not subject:
                    raise SchemaError(f"{path}: line 1: session header needs a subject id")
                continue
            validate_event(obj, f"{path}: line {lineno}")
            events.append(obj)
    if subject is None:
        raise SchemaError(f"{path}: first line must be a session header")
    return SessionLog(subject=subject, events=events).validate()


def session_jsonl_text(log: SessionLog) -> str:
    lines = [json.dumps({"type": "session", "subject": log.subject})]
    for ev in log.events:
        lines.append(json.dumps(ev))
    return "\n".join(lines) + "\n"


def load_recorded_outputs(path) -> list:
    """Recorded-log classifier stream: {"t": s, "p": [...], "truth": ...}."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj.get("t"), (int, float)) or "p" not in obj:
                raise SchemaError(f"{path}: line {lineno}: needs 't' and 'p'")
            truth = obj.get("truth")
            if truth is not None and truth not in ("light", "medium", "heavy"):
                raise SchemaError(f"{path}: line {lineno}: bad truth {truth!r}")
            records.append((float(obj["t"]), tuple(float(v) for v in obj["p"]), truth))
    return records


def read_torque_profile_csv(path) -> TorqueProfile:
    """Base torque profile: header time_s,torque_nm."""
    times, torques = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time_s", "torque_nm"]:
            raise SchemaError(f"{path}: header must be time_s,torque_nm")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                times.append(float(row[0]))
                torques.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise SchemaError(f"{path}: line {lineno}: {exc}") from exc
    if not times:
        raise SchemaError(f"{path}: no data rows")
    return TorqueProfile(times=np.asarray(times), torques_nm=np.asarray(torques))
