"""Common test configuration for deterministic behaviour."""
from __future__ import annotations

import random

import numpy as np
import pytest

from cfsurv.estimator import FitConfig, fit
from cfsurv.simkit import DgpSpec, Scenario, generate


def pytest_configure() -> None:
    random.seed(0)
    np.random.seed(0)


@pytest.fixture(scope="session")
def baseline_spec() -> DgpSpec:
    return DgpSpec(scenario=Scenario.BASELINE, n=1000, seed=11)


@pytest.fixture(scope="session")
def baseline_data(baseline_spec):
    return generate(baseline_spec)


@pytest.fixture(scope="session")
def baseline_fit(baseline_data, baseline_spec):
    return fit(baseline_data, baseline_spec.fitting_first_stage(), FitConfig())


@pytest.fixture(scope="session")
def cmprsk_data():
    return generate(DgpSpec(scenario=Scenario.CMPRSK_R3, n=1000, seed=5))
