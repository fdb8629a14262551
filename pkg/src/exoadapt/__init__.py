"""Toolkit for payload-adaptive back-exoskeleton control.

Two halves: (1) build and optimize performance surfaces over the
(assistance, payload) space from experimental data; (2) replay recorded
or synthetic sessions through the vision-based candidate-selection,
payload-classification, and assistance-modulation pipeline, scoring
timeliness and accuracy.
"""

from .config import Config, load_config
from .control import (
    AssistanceCommand,
    ControlState,
    ControlStateMachine,
    KpylRange,
    TorqueProfile,
    k_for_class,
    scaled_profile,
)
from .emg import (
    EmgTrace,
    Envelope,
    LiftCycleSpan,
    activity_stats,
    bandpass_filter,
    group_aggregate,
    mvc_peak,
    normalize_mvc,
    rectify_rms,
    reduction_percent,
)
from .errors import ExoAdaptError
from .payload import (
    ClassificationRecord,
    ClassifierBackend,
    HttpBackend,
    MetricsReport,
    PayloadClass,
    PhysicalFeatures,
    SequenceBackend,
    StaticBackend,
    classify,
    evaluate,
    fallback_policy,
)
from .replay import (
    CohortReport,
    SessionLog,
    SessionReport,
    aggregate,
    run_session,
    synth_cohort,
    synth_session,
)
from .selection import (
    CandidateScore,
    Detection,
    LockedCandidate,
    crop_region,
    pickup_scores,
    select_candidate,
)
from .surfaces import (
    GridSpec,
    OptimalCurve,
    OptimalPoint,
    PerfSample,
    QuestionnaireResponse,
    RepresentationSurface,
    combine_total,
    fit_exponential,
    fit_surface,
    normalize_surface,
    optimal_assistance,
    preference_samples,
    score_discomfort,
)

__version__ = "0.1.0"
