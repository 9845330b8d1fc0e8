import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dispguard.geometry import CameraModel
from dispguard.harness.config import ExperimentConfig

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def small_cam():
    return CameraModel(id=1, focal_length=700.0, baseline_position=0.0,
                       image_width=64, image_height=48)


@pytest.fixture
def tiny_config(tmp_path):
    return ExperimentConfig(frames=6, calibration_frames=12, output_dir=str(tmp_path / "run"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = {}


@pytest.fixture(scope="session")
def criterion():
    """Record ``(number, passed, detail)`` for the acceptance summary."""
    def record(number, title, passed, detail):
        _CRITERIA[number] = (title, bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
