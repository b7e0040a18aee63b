import numpy as np
import pytest

from twpa_studio.config import load_config
from twpa_studio.device import DeviceGeometry
from twpa_studio.dispersion import bloch_dispersion


@pytest.fixture(scope="session")
def preset_config():
    return load_config(preset="paper-device")


@pytest.fixture(scope="session")
def device_geometry(preset_config):
    return preset_config.device


@pytest.fixture(scope="session")
def biased_curve(preset_config):
    grid = np.arange(0.1e9, 25e9, 2e6)
    return bloch_dispersion(grid, preset_config.device, preset_config.operating_point.I_DC)


@pytest.fixture(scope="session")
def unbiased_curve():
    return bloch_dispersion(np.arange(0.1e9, 25e9, 2e6), DeviceGeometry())


def pytest_terminal_summary(terminalreporter):
    import sys

    for name, mod in list(sys.modules.items()):
        if name.endswith("test_acceptance") and getattr(mod, "VERDICTS", None):
            terminalreporter.section("acceptance criteria")
            for n in sorted(mod.VERDICTS):
                terminalreporter.write_line(mod.VERDICTS[n])
