import pytest

from lidarsynth.geometry import Camera
from lidarsynth.scanner import LidarConfig


@pytest.fixture(scope="session")
def camera():
    """Default full-resolution camera (1920x1080, 90 deg horizontal)."""
    return Camera()


@pytest.fixture(scope="session")
def small_camera():
    """Cheap camera for tests that do not need full resolution."""
    return Camera(width=480, height=270)


@pytest.fixture(scope="session")
def quiet_lidar():
    return LidarConfig(noise_sigma=0.0)
