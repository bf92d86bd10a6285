import importlib.resources

import numpy as np
import pytest


def preset_path(name: str) -> str:
    return str(importlib.resources.files("asdpde.presets") / name)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
