"""Exponential-law fitter: exact recovery, noise robustness, degeneracy."""

import warnings

import numpy as np
import pytest

from exoadapt.curvefit import NearSingularFitWarning, fit_payload_exponential
from exoadapt.errors import ConvergenceError, InsufficientDataError

A0, B0, C0 = 0.72, 1.10, -1.20


def model(assist, a=A0, b=B0, c=C0):
    return a * np.exp(b * np.asarray(assist)) + c


def test_noise_free_recovery_within_one_percent():
    assist = np.linspace(0.0, 1.0, 12)
    (a, b, c), rms, _ = fit_payload_exponential(assist, model(assist))
    assert a == pytest.approx(A0, rel=0.01)
    assert b == pytest.approx(B0, rel=0.01)
    assert c == pytest.approx(C0, rel=0.01)
    assert rms <= 1e-10


def test_deterministic_given_fixed_start():
    assist = np.linspace(0.0, 1.0, 9)
    payload = model(assist)
    first = fit_payload_exponential(assist, payload)
    second = fit_payload_exponential(assist, payload)
    assert first == second


def test_noisy_recovery_within_ten_percent_over_seeds():
    assist = np.linspace(0.0, 1.0, 101)
    clean = model(assist)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        (a, b, c), _, _ = fit_payload_exponential(assist, clean + rng.normal(0, 0.01, assist.size))
        assert a == pytest.approx(A0, rel=0.10)
        assert b == pytest.approx(B0, rel=0.10)
        assert c == pytest.approx(C0, rel=0.10)


def test_flat_data_degenerate():
    # constant payload: b -> 0 leaves a and c unidentifiable
    assist = np.linspace(0.0, 1.0, 10)
    payload = np.full(10, 0.5)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            fit_payload_exponential(assist, payload)
        except ConvergenceError:
            return  # acceptable outcome for an unidentifiable model
    assert any(issubclass(w.category, NearSingularFitWarning) for w in caught)


def test_too_few_points_rejected():
    with pytest.raises(InsufficientDataError):
        fit_payload_exponential([0.0, 1.0], [0.0, 1.0])


def test_nonconvergence_carries_best_params():
    # one iteration cannot reach tolerance from the default start
    assist = np.linspace(0.0, 1.0, 12)
    with pytest.raises(ConvergenceError) as exc_info:
        fit_payload_exponential(assist, model(assist), max_iter=1)
    assert exc_info.value.best_params is not None
    assert len(exc_info.value.best_params) == 3
