import os

import pytest

from feedback_capacity.config import Settings
from feedback_capacity.errors import InvalidInputError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    for name in (
        "FEEDCAP_QUAD_POINTS",
        "FEEDCAP_SDP_SOLVER",
        "FEEDCAP_SDP_TOL",
        "FEEDCAP_RESTARTS",
        "FEEDCAP_WORKERS",
        "FEEDCAP_LOG_LEVEL",
        "FEEDCAP_LOG_FILE",
    ):
        monkeypatch.delenv(name, raising=False)


def test_defaults():
    settings = Settings.from_env()
    assert settings.quad_points == 4096
    assert settings.sdp_solver == "CLARABEL"
    assert settings.workers == 4
    assert settings.log_file is None


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("FEEDCAP_QUAD_POINTS", "8192")
    monkeypatch.setenv("FEEDCAP_RESTARTS", "3")
    monkeypatch.setenv("FEEDCAP_LOG_LEVEL", "debug")
    settings = Settings.from_env()
    assert settings.quad_points == 8192
    assert settings.restarts == 3
    assert settings.log_level == "DEBUG"


def test_dotenv_file_is_read(tmp_path):
    (tmp_path / ".env").write_text("FEEDCAP_WORKERS=2\n")
    try:
        assert Settings.from_env().workers == 2
    finally:
        os.environ.pop("FEEDCAP_WORKERS", None)


@pytest.mark.parametrize(
    "name, value",
    [("FEEDCAP_QUAD_POINTS", "many"), ("FEEDCAP_QUAD_POINTS", "16"), ("FEEDCAP_SDP_TOL", "-1")],
)
def test_malformed_values_name_the_variable(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(InvalidInputError) as err:
        Settings.from_env()
    assert err.value.field == name
