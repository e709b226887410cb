from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

from losfusion import bay_area
from losfusion.gnss_field import PixelVelocityPrior

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def geometries():
    return dict(bay_area.GEOMETRIES)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_prior(vx=0.0, vy=0.0, var_x=1.0, var_y=1.0, pixel_id="p0") -> PixelVelocityPrior:
    return PixelVelocityPrior(pixel_id, 0.0, 0.0, vx, vy, var_x, var_y, "S000", 0.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
