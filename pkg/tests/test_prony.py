import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from soebath.prony import (GrowingModeWarning, RankDeficiencyError, SampleSet, compress,
                           esprit, factorize, fit_weights, hankel_operator, minimal_modes,
                           ratios_to_poles, sample)
from soebath.soe import SoeRepresentation, eval_grid, l1_error, time_grid

from conftest import synthetic_soe


def match_poles(found, true):
    # greedy nearest matching; returns the worst relative pole error
    found = list(found)
    worst = 0.0
    for z in true:
        k = int(np.argmin([abs(f - z) for f in found]))
        worst = max(worst, abs(found.pop(k) - z) / abs(z))
    return worst


# --------------------------------------------------------------- samples

def test_sample_set_validation():
    with pytest.raises(ValueError):
        SampleSet(np.ones(5), 0.1, 1.0)
    with pytest.raises(ValueError):
        SampleSet(np.array([1.0, np.nan]), 1.0, 1.0)
    with pytest.raises(ValueError):
        sample(lambda t: t, 1.0, 0.0)
    s = sample(lambda t: np.exp(-t), 1.0, 0.5)
    assert len(s) == 3 and np.allclose(s.times, [0, 0.5, 1.0])


def test_hankel_operator_matches_dense(rng):
    import scipy.linalg as sla
    y = rng.normal(size=41) + 1j * rng.normal(size=41)
    H = sla.hankel(y[:21], y[20:])
    op = hankel_operator(y, 21)
    x = rng.normal(size=21) + 1j * rng.normal(size=21)
    u = rng.normal(size=21) + 1j * rng.normal(size=21)
    assert np.allclose(op.matvec(x), H @ x, atol=1e-12)
    assert np.allclose(op.rmatvec(u), H.conj().T @ u, atol=1e-12)


def test_sparse_and_dense_factorizations_agree():
    # long signals go through the iterative solver, short ones through a dense SVD
    s = SoeRepresentation([1.0, 0.5j, 0.3], [2 - 0.1j, -1 - 0.5j, -0.05j])
    long = sample(s, 40.0, 0.01)
    f = factorize(long, 3)
    assert f.rank == 3 and f.U.shape == ((len(long) + 1) // 2, 3)
    fit = esprit(long, 3, f)
    assert match_poles(fit.z, s.z) < 1e-8


# ----------------------------------------------------------------- poles

def test_ratio_to_pole_branch():
    dt = 0.1
    z = ratios_to_poles(np.exp(-1j * np.array([3 - 0.2j, -3 - 0.2j]) * dt), dt)
    assert np.allclose(z, [3 - 0.2j, -3 - 0.2j], atol=1e-12)
    # Nyquist ratio lands on +pi/dt
    assert ratios_to_poles(np.array([-1.0 + 0j]), dt)[0].real == pytest.approx(math.pi / dt)


def test_growing_ratio_is_clamped_with_warning():
    with pytest.warns(GrowingModeWarning):
        z = ratios_to_poles(np.array([1.01 + 0j]), 0.1)
    assert z[0].imag == 0.0
    # tiny excess is clamped silently
    z = ratios_to_poles(np.array([1 + 1e-12 + 0j]), 0.1)
    assert z[0].imag == 0.0


def test_fit_weights_blocked_path_matches_direct(rng):
    z = np.array([1 - 0.01j, -2 - 0.003j])
    c = np.array([1 + 1j, 0.5])
    t = np.arange(70001) * 0.01
    y = np.exp(-1j * np.outer(t, z)) @ c
    assert np.allclose(fit_weights(z, y, 0.01), c, rtol=1e-10)


# ---------------------------------------------------------------- esprit

@given(seed=st.integers(0, 2 ** 32 - 1), N=st.integers(1, 6))
def test_exact_recovery_of_synthetic_modes(seed, N):
    rng = np.random.default_rng(seed)
    s = synthetic_soe(rng, N)
    fit = esprit(sample(s, 40.0, 0.1), N)
    assert match_poles(fit.z, s.z) <= 1e-8
    assert fit.provenance == "esprit"


def test_decimated_variant_recovers_modes(rng):
    s = synthetic_soe(rng, 4, dt=0.01)
    fit = esprit(sample(s, 10.0, 0.01), 4, method="decimated")
    assert match_poles(fit.z, s.z) <= 1e-8


def test_esprit_errors():
    s = sample(SoeRepresentation([1.0], [-1j]), 1.0, 0.1)
    with pytest.raises(ValueError):
        esprit(s, 0)
    with pytest.raises(ValueError):
        esprit(s, 6)
    with pytest.raises(ValueError):
        esprit(s, 1, method="other")
    with pytest.raises(RankDeficiencyError):
        esprit(s, 3)


def test_zero_signal_has_no_modes():
    zero = SampleSet(np.zeros(101, complex), 0.1, 10.0)
    with pytest.raises(RankDeficiencyError):
        minimal_modes(None, 10.0, 1e-3, 0.1, samples=zero)


# --------------------------------------------------------- minimal modes

def test_minimal_modes_ohmic_short_horizon():
    ref = lambda t: 1 / (1 + 1j * t) ** 2
    N, soe = minimal_modes(ref, 10.0, 1e-2)
    assert 1 <= N <= 6 and soe.N == N
    assert soe.achieved_error[1] <= 1e-2
    assert l1_error(soe, ref, 10.0, 0.01) == pytest.approx(soe.achieved_error[1], rel=1e-12)
    if N > 1:
        assert l1_error(esprit(sample(ref, 10.0, 0.01), N - 1), ref, 10.0, 0.01) > 1e-2


def test_minimal_modes_flags_failure():
    ref = lambda t: 1 / (1 + 1j * t) ** 2
    N, soe = minimal_modes(ref, 10.0, 1e-12, N_max=2)
    assert soe.meta["flagged"] and N <= 2


def test_minimal_modes_argument_errors():
    with pytest.raises(ValueError):
        minimal_modes(lambda t: t, 1.0, 0.0)
    with pytest.raises(ValueError):
        minimal_modes(lambda t: t, 1.0, 1e-3, N_max=0)


def test_exact_sum_is_found_with_its_own_size(rng):
    s = synthetic_soe(rng, 3)
    N, fit = minimal_modes(s, 40.0, 1e-9, dt=0.1)
    assert N == 3


def test_compress_reduces_redundant_terms():
    from soebath.contour import build_bcf_soe
    from conftest import model
    big = build_bcf_soe(model("ohmic", [1, 1]), 1e-3, 20.0)
    small = compress(big, 1e-2, 20.0)
    assert small.N < big.N
    assert small.meta["compressed_from"] == big.N
    ref = lambda t: 1 / (1 + 1j * t) ** 2
    assert l1_error(small, ref, 20.0, 0.01) <= 1e-2


def test_compress_rejects_exhausted_budget():
    s = SoeRepresentation([1.0, 1.0], [-1j, -2j], achieved_error=("L1", 1e-2))
    with pytest.raises(ValueError):
        compress(s, 1e-3, 5.0)
