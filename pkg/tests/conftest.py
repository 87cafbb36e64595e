import warnings

import pytest

from oseen_vvp.mixed import SolvabilityWarning


@pytest.fixture(autouse=True)
def _quiet_solvability():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SolvabilityWarning)
        yield
