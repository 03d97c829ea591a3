import os

import pytest

from diabolo.factories import DiaboloStateFactory, ModelParamsFactory, StickPairFactory
from diabolo.services.geometry import bottom_point, build_spheroid


@pytest.fixture
def params():
    """Model parameters at the 5 ms test step."""
    return ModelParamsFactory()


@pytest.fixture
def sticks():
    return StickPairFactory()


@pytest.fixture
def hanging(params, sticks):
    """A diabolo at rest at the bottom of the string spheroid."""
    return DiaboloStateFactory(position=bottom_point(build_spheroid(sticks, params.l_string)))


@pytest.fixture(autouse=True)
def clean_diabolo_env(monkeypatch):
    """Keep DIABOLO_* variables from the developer's shell out of config tests."""
    for key in list(os.environ):
        if key.startswith("DIABOLO_"):
            monkeypatch.delenv(key)
