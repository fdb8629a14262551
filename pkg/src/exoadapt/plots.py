"""SVG figure emission, deterministic enough for reproducible batch runs."""

from __future__ import annotations

import io as _io

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "exoadapt"

import matplotlib.pyplot as plt
import numpy as np

from .io import atomic_write_text

CLASS_LABELS = ("light", "medium", "heavy")


def _save_svg(fig, path):
    buf = _io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    atomic_write_text(path, buf.getvalue().decode("utf-8"))


def surface_contour_svg(grid, values, path, title=""):
    """Filled contours of a surface over the (assistance, payload) plane."""
    A, P = np.meshgrid(grid.assist, grid.payload, indexing="ij")
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    cs = ax.contourf(A, P, np.asarray(values), levels=20, cmap="viridis")
    fig.colorbar(cs, ax=ax)
    ax.set_xlabel("assistance level")
    ax.set_ylabel("payload (kg)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save_svg(fig, path)


def optimal_curve_svg(points, curve, path, title="optimal assistance law"):
    """Derivative-zeroing points with the fitted exponential overlaid."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    a_pts = [p.assistance for p in points]
    p_pts = [p.payload for p in points]
    ax.plot(a_pts, p_pts, "o", label="stationary points")
    if curve is not None:
        xs = np.linspace(min(a_pts), max(a_pts), 200)
        ax.plot(xs, curve.predict_payload(xs), "-", label="exponential fit")
    ax.set_xlabel("optimal assistance")
    ax.set_ylabel("payload")
    ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    _save_svg(fig, path)


def accuracy_bars_svg(per_subject: dict, mean_accuracy: float, path):
    """Per-subject timely accuracy with the cohort mean line."""
    subjects = sorted(per_subject)
    values = [per_subject[s] for s in subjects]
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    ax.bar(range(len(subjects)), values, color="#4878a8")
    ax.axhline(mean_accuracy, color="#c44e52", linestyle="--", label=f"mean {mean_accuracy:.2%}")
    ax.set_xticks(range(len(subjects)))
    ax.set_xticklabels(subjects, rotation=45, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("timely accuracy")
    ax.legend()
    fig.tight_layout()
    _save_svg(fig, path)


def confusion_heatmap_svg(matrix, path, labels=CLASS_LABELS):
    """Row-truth, column-prediction confusion counts."""
    m = np.asarray(matrix)
    fig, ax = plt.subplots(figsize=(4.2, 3.8))
    im = ax.imshow(m, cmap="Blues")
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            ax.text(j, i, str(int(m[i, j])), ha="center", va="center",
                    color="black" if m[i, j] < m.max() * 0.6 else "white")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("truth")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    _save_svg(fig, path)
