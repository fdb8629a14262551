"""Performance surfaces over the (assistance, payload) space.

Builds the three metric surfaces (EMG reduction, discomfort, preference)
from experimental samples, normalizes them onto a common grid, combines
them into the weighted total surface, and extracts the optimal
assistance-vs-payload law by zeroing the assistance derivative and fitting
an exponential through the resulting points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import curvefit
from .errors import (
    InsufficientDataError,
    InvalidParameterError,
    SchemaError,
    ShapeError,
)
from .gp import DEFAULT_DOMAIN, GaussianProcess

# discomfort questionnaire: per-question weights, 1-indexed positions of
# positively framed questions (their ratings flip as q -> 6 - q)
DISCOMFORT_WEIGHTS = (2.0, 2.0, 1.5, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0)
POSITIVE_QUESTIONS = (2, 7, 8, 9)
DISCOMFORT_RANGE = (12.5, 62.5)

TOTAL_WEIGHTS = (0.6, 0.2, 0.2)  # emg, discomfort, preference

DEFAULT_GRID_SHAPE = (101, 101)

SURFACE_KINDS = ("EMG", "discomfort", "preference", "total")


# ---------------------------------------------------------------------------
# sample types and scoring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerfSample:
    """One observed metric value at an (assistance, payload) condition."""

    assistance: float
    payload: float
    value: float

    def __post_init__(self):
        if not 0.0 <= self.assistance <= 1.0:
            raise InvalidParameterError(f"assistance {self.assistance} outside [0, 1]")
        if self.payload < 0:
            raise InvalidParameterError(f"payload {self.payload} kg is negative")


@dataclass(frozen=True)
class QuestionnaireResponse:
    """Nine 1-5 ratings collected after one trial condition."""

    ratings: tuple
    assistance: float = 0.0
    payload: float = 0.0

    def __post_init__(self):
        ratings = tuple(int(q) for q in self.ratings)
        if len(ratings) != 9:
            raise SchemaError(f"expected 9 ratings, got {len(ratings)}")
        for i, q in enumerate(ratings, start=1):
            if not 1 <= q <= 5:
                raise SchemaError(f"rating q{i}={q} outside 1..5")
        object.__setattr__(self, "ratings", ratings)


def score_discomfort(resp) -> float:
    """Weighted discomfort score of one questionnaire response.

    Positively framed questions (2, 7, 8, 9) are flipped (q -> 6 - q) so
    higher always means more discomfort; the score is the weighted sum,
    spanning [12.5, 62.5].
    """
    ratings = resp.ratings if isinstance(resp, QuestionnaireResponse) else QuestionnaireResponse(tuple(resp)).ratings
    total = 0.0
    for i, (q, w) in enumerate(zip(ratings, DISCOMFORT_WEIGHTS), start=1):
        if i in POSITIVE_QUESTIONS:
            q = 6 - q
        total += w * q
    return total


def discomfort_samples(responses) -> list[PerfSample]:
    """PerfSamples (one per response) with the discomfort score as value."""
    return [
        PerfSample(r.assistance, r.payload, score_discomfort(r))
        for r in responses
    ]


def preference_samples(votes, light_payload=5.0, heavy_payload=15.0) -> list[PerfSample]:
    """Corner samples of the preference surface from subject votes.

    votes: per subject, a pair (choice at light payload, choice at heavy
    payload), each "light" or "strong". Each corner's value is the
    fraction of subjects preferring that assistance at that payload, so
    the two assistance corners at a fixed payload sum to 1.
    """
    votes = list(votes)
    if not votes:
        raise InsufficientDataError("no preference votes supplied")
    samples = []
    for payload, idx in ((light_payload, 0), (heavy_payload, 1)):
        choices = [v[idx] for v in votes]
        bad = [c for c in choices if c not in ("light", "strong")]
        if bad:
            raise SchemaError(f"preference choice must be light|strong, got {bad[0]!r}")
        frac_strong = sum(1 for c in choices if c == "strong") / len(choices)
        samples.append(PerfSample(0.0, payload, 1.0 - frac_strong))
        samples.append(PerfSample(1.0, payload, frac_strong))
    return samples


# ---------------------------------------------------------------------------
# fitted and derived surfaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Evaluation grid over the optimization space."""

    assist: np.ndarray
    payload: np.ndarray

    @classmethod
    def default(cls, domain=DEFAULT_DOMAIN, shape=DEFAULT_GRID_SHAPE) -> "GridSpec":
        return cls(
            assist=np.linspace(domain[0][0], domain[0][1], shape[0]),
            payload=np.linspace(domain[1][0], domain[1][1], shape[1]),
        )

    def aligned_with(self, other: "GridSpec") -> bool:
        return (
            self.assist.shape == other.assist.shape
            and self.payload.shape == other.payload.shape
            and bool(np.all(self.assist == other.assist))
            and bool(np.all(self.payload == other.payload))
        )

    def mesh(self):
        return np.meshgrid(self.assist, self.payload, indexing="ij")


class RepresentationSurface:
    """GP-interpolated metric surface with an analytic assistance derivative."""

    def __init__(self, kind: str, samples: list[PerfSample], gp: GaussianProcess):
        if kind not in SURFACE_KINDS:
            raise InvalidParameterError(f"kind {kind!r} not one of {SURFACE_KINDS}")
        self.kind = kind
        self.samples = list(samples)
        self.gp = gp

    def value(self, assist, payload):
        return self.gp.mean(assist, payload)

    def d_dassist(self, assist, payload):
        return self.gp.dmean_dassist(assist, payload)

    def grid_values(self, grid: GridSpec) -> np.ndarray:
        A, P = grid.mesh()
        return self.gp.mean(A, P)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gp": self.gp.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "RepresentationSurface":
        gp = GaussianProcess.from_dict(data["gp"])
        samples = [PerfSample(float(x[0]), float(x[1]), float(v)) for x, v in zip(gp.X, gp.y)]
        return cls(data["kind"], samples, gp)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "RepresentationSurface":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_surface(
    samples,
    kind: str = "EMG",
    noise: float | str = "ml",
    seed: int = 0,
    domain=DEFAULT_DOMAIN,
) -> RepresentationSurface:
    """Fit a GP surface through metric samples (see GaussianProcess.fit)."""
    samples = list(samples)
    if len(samples) < 2:
        raise InsufficientDataError("need at least 2 samples to fit a surface")
    X = np.array([[s.assistance, s.payload] for s in samples], dtype=float)
    y = np.array([s.value for s in samples], dtype=float)
    gp = GaussianProcess.fit(X, y, noise=noise, domain=domain, seed=seed)
    return RepresentationSurface(kind, samples, gp)


class NormalizedSurface:
    """Surface rescaled to [0, 1] by its min-max over an evaluation grid.

    A constant surface cannot be min-max scaled; it normalizes to 0.5
    everywhere and is flagged degenerate.
    """

    def __init__(self, base, grid: GridSpec | None = None):
        self.base = base
        if grid is None:
            domain = base.gp.domain if hasattr(base, "gp") else DEFAULT_DOMAIN
            grid = GridSpec.default(domain)
        self.grid = grid
        values = base.grid_values(self.grid)
        lo = float(values.min())
        hi = float(values.max())
        self.degenerate = bool(hi - lo < 1e-12)
        self._lo = lo
        self._scale = 0.0 if self.degenerate else 1.0 / (hi - lo)

    @property
    def kind(self) -> str:
        return self.base.kind

    def value(self, assist, payload):
        if self.degenerate:
            raw = self.base.value(assist, payload)
            return np.full_like(np.asarray(raw, dtype=float), 0.5) if np.ndim(raw) else 0.5
        return (self.base.value(assist, payload) - self._lo) * self._scale

    def d_dassist(self, assist, payload):
        if self.degenerate:
            raw = self.base.d_dassist(assist, payload)
            return np.zeros_like(np.asarray(raw, dtype=float)) if np.ndim(raw) else 0.0
        return self.base.d_dassist(assist, payload) * self._scale

    def grid_values(self) -> np.ndarray:
        A, P = self.grid.mesh()
        return np.asarray(self.value(A, P), dtype=float)


def normalize_surface(surface: RepresentationSurface, grid: GridSpec | None = None) -> NormalizedSurface:
    return NormalizedSurface(surface, grid)


class TotalSurface:
    """Weighted total: w_emg * EMG - w_dsc * discomfort + w_prf * preference."""

    def __init__(self, emg, dsc, prf, weights=TOTAL_WEIGHTS):
        grids = [s.grid for s in (emg, dsc, prf) if isinstance(getattr(s, "grid", None), GridSpec)]
        for g in grids[1:]:
            if not grids[0].aligned_with(g):
                raise ShapeError("component surfaces evaluated on misaligned grids")
        self.emg = emg
        self.dsc = dsc
        self.prf = prf
        self.weights = tuple(float(w) for w in weights)
        self.grid = grids[0] if grids else None

    def value(self, assist, payload):
        w_emg, w_dsc, w_prf = self.weights
        return (
            w_emg * self.emg.value(assist, payload)
            - w_dsc * self.dsc.value(assist, payload)
            + w_prf * self.prf.value(assist, payload)
        )

    def d_dassist(self, assist, payload):
        w_emg, w_dsc, w_prf = self.weights
        return (
            w_emg * self.emg.d_dassist(assist, payload)
            - w_dsc * self.dsc.d_dassist(assist, payload)
            + w_prf * self.prf.d_dassist(assist, payload)
        )

    def grid_values(self) -> np.ndarray:
        if self.grid is None:
            raise ShapeError("total surface has no attached grid")
        A, P = self.grid.mesh()
        return np.asarray(self.value(A, P), dtype=float)


def combine_total(emg, dsc, prf, weights=TOTAL_WEIGHTS) -> TotalSurface:
    return TotalSurface(emg, dsc, prf, weights)


# ---------------------------------------------------------------------------
# optimal-assistance extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimalPoint:
    payload: float
    assistance: float
    value: float
    boundary: bool = False


def _bisect_root(fn, lo, hi, f_lo, max_iter=200, tol=1e-13):
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if f_mid == 0.0 or hi - lo < tol:
            return mid
        if (f_lo < 0) == (f_mid < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def optimal_assistance(
    surface,
    payload_slices,
    assist_range=(0.0, 1.0),
    n_brackets=64,
) -> list[OptimalPoint]:
    """Optimal assistance per payload slice by zeroing d(total)/d(assist).

    Stationary points are bracketed on n_brackets subintervals and refined
    by bisection; among interior roots the one with the highest surface
    value wins (ties to lower assistance). A slice without an interior
    stationary point falls back to the boundary argmax, flagged boundary.
    """
    a_lo, a_hi = assist_range
    grid = np.linspace(a_lo, a_hi, n_brackets + 1)
    points = []
    for p in sorted(float(v) for v in payload_slices):
        deriv = np.asarray(surface.d_dassist(grid, np.full_like(grid, p)), dtype=float)
        roots = [float(a) for a, d in zip(grid, deriv) if d == 0.0]
        for i in range(n_brackets):
            if (deriv[i] < 0) != (deriv[i + 1] < 0) and deriv[i] != 0.0 and deriv[i + 1] != 0.0:
                roots.append(
                    _bisect_root(lambda a: float(surface.d_dassist(a, p)), float(grid[i]), float(grid[i + 1]), float(deriv[i]))
                )
        if roots:
            scored = [(float(surface.value(a, p)), -a) for a in roots]
            best_idx = max(range(len(roots)), key=lambda i: scored[i])
            points.append(OptimalPoint(p, roots[best_idx], scored[best_idx][0], boundary=False))
        else:
            v_lo = float(surface.value(a_lo, p))
            v_hi = float(surface.value(a_hi, p))
            a_best, v_best = (a_lo, v_lo) if v_lo >= v_hi else (a_hi, v_hi)
            points.append(OptimalPoint(p, a_best, v_best, boundary=True))
    return points


@dataclass(frozen=True)
class OptimalCurve:
    """Exponential law payload = a*exp(b*assist) + c through optimal points."""

    points: tuple
    a: float
    b: float
    c: float
    residual_rms: float

    def predict_payload(self, assist):
        return self.a * np.exp(self.b * np.asarray(assist, dtype=float)) + self.c


def fit_exponential(points, include_boundary=False) -> OptimalCurve:
    """Fit the payload-vs-assistance exponential through optimal points.

    Boundary-flagged points do not satisfy the stationarity condition and
    are excluded unless include_boundary is set.
    """
    pts = []
    for pt in points:
        if isinstance(pt, OptimalPoint):
            if pt.boundary and not include_boundary:
                continue
            pts.append((pt.payload, pt.assistance))
        else:
            payload, assist = pt
            pts.append((float(payload), float(assist)))
    if len(pts) < 3:
        raise InsufficientDataError("need at least 3 non-boundary points for the fit")
    pts.sort()
    payload = np.array([p for p, _ in pts])
    assist = np.array([a for _, a in pts])
    (a, b, c), rms, _ = curvefit.fit_payload_exponential(assist, payload)
    return OptimalCurve(points=tuple(pts), a=a, b=b, c=c, residual_rms=rms)
