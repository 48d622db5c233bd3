import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from soebath.spectral import SpectralModel, make_preset

settings.register_profile(
    "default", deadline=None, max_examples=30,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def model(preset, params, statistics="boson", beta=math.inf, mu=0.0, branch=None):
    if branch is None:
        branch = "total" if statistics == "boson" else "lesser"
    return SpectralModel(make_preset(preset, params), statistics, beta, mu, branch)


@pytest.fixture
def ohmic_zero_t():
    return model("ohmic", [1, 1])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def synthetic_soe(rng, N, dt=0.1, min_gap=1e-2):
    """Random well-separated decaying modes for exact-recovery checks.

    Poles have Re z in [-5, 5] and Im z in [-1, -0.01]; their sample ratios
    exp(-i z dt) are at least ``min_gap`` apart.
    """
    from soebath.soe import SoeRepresentation
    z = []
    while len(z) < N:
        cand = rng.uniform(-5, 5) - 1j * rng.uniform(0.01, 1.0)
        lam = np.exp(-1j * cand * dt)
        if all(abs(lam - np.exp(-1j * p * dt)) >= min_gap for p in z):
            z.append(cand)
    c = rng.uniform(0.5, 2.0, N) * np.exp(2j * np.pi * rng.uniform(size=N))
    return SoeRepresentation(c, np.array(z))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
