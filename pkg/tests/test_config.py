"""Config parsing and fail-fast validation."""

import pytest

from exoadapt.config import Config, load_config
from exoadapt.errors import InvalidParameterError, SchemaError


def write_toml(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def test_defaults_are_valid():
    cfg = Config().validate()
    assert cfg.seed == 42
    assert cfg.surfaces.weights == (0.6, 0.2, 0.2)
    assert cfg.selection.lambda_theta == 0.1
    assert cfg.selection.lambda_d == 0.5
    assert cfg.selection.lock_threshold_m == 2.0
    assert cfg.control.medium_fraction == 0.65
    assert cfg.signal.rate_hz == 2150.0


def test_load_overrides(tmp_path):
    path = write_toml(
        tmp_path,
        """
        seed = 7
        [control]
        k_min = 0.3
        k_max = 0.9
        medium_fraction = 0.5
        [selection]
        lock_threshold_m = 1.5
        """,
    )
    cfg = load_config(path)
    assert cfg.seed == 7
    assert cfg.control.k_min == 0.3
    assert cfg.control.medium_fraction == 0.5
    assert cfg.selection.lock_threshold_m == 1.5
    # untouched sections keep defaults
    assert cfg.signal.band_high_hz == 450.0


def test_unknown_top_level_key_rejected(tmp_path):
    path = write_toml(tmp_path, "sede = 7\n")
    with pytest.raises(SchemaError, match="sede"):
        load_config(path)


def test_unknown_section_key_rejected(tmp_path):
    path = write_toml(tmp_path, "[control]\nk_minimum = 0.1\n")
    with pytest.raises(SchemaError, match="k_minimum"):
        load_config(path)


def test_invalid_toml_rejected(tmp_path):
    path = write_toml(tmp_path, "seed = [unterminated\n")
    with pytest.raises(SchemaError, match="TOML"):
        load_config(path)


@pytest.mark.parametrize(
    "body",
    [
        "[control]\nk_min = 0.0",
        "[control]\nk_min = 0.9\nk_max = 0.5",
        "[control]\nk_max = 1.4",  # scaled torque would exceed hardware nominal
        "[control]\nmedium_fraction = 1.2",
        "[control]\nfallback_class = 'jumbo'",
        "[signal]\nband_low_hz = 500.0",
        "[signal]\nband_high_hz = 2000.0",
        "[selection]\nlambda_theta = -0.1",
        "[selection]\nlock_threshold_m = 0.0",
        "[surfaces]\nweights = [0.5, 0.5]",
        "[replay]\nbackend = 'psychic'",
        "seed = -3",
    ],
)
def test_out_of_bounds_rejected(tmp_path, body):
    path = write_toml(tmp_path, body + "\n")
    with pytest.raises(InvalidParameterError):
        load_config(path)
