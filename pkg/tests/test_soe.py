import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from soebath.soe import (SoeRepresentation, affine_rescale, conjugate_closure, eval_grid,
                         evaluate, l1_error, linf_error, measure, merge, normalize_norm,
                         time_grid, write_csv)


def soe(c, z, **kw):
    return SoeRepresentation(np.atleast_1d(c), np.atleast_1d(z), **kw)


def random_soe(rng, n=20, decay=(0.01, 2.0), freq=5.0):
    c = rng.normal(size=n) + 1j * rng.normal(size=n)
    z = rng.uniform(-freq, freq, n) - 1j * rng.uniform(*decay, n)
    return soe(c, z)


seeds = st.integers(0, 2 ** 32 - 1)


# ------------------------------------------------------------ evaluation

def test_constant_mode():
    assert evaluate(soe(1.0, 0.0), 7.3) == 1.0


def test_pure_decay():
    assert evaluate(soe(2.0, -1j), 1.0) == pytest.approx(0.7357588823428847, rel=1e-15)


def test_conjugate_pair():
    s = soe([1, 1], [1 - 1j, -1 - 1j])
    assert evaluate(s, math.pi) == pytest.approx(-0.0864278365275445, rel=1e-14)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        evaluate(soe(1.0, 0.0), -1.0)
    with pytest.raises(ValueError):
        eval_grid(soe(1.0, 0.0), [-1.0, 0.0])


def test_grid_examples():
    assert np.all(eval_grid(soe(1.0, 0.0), [0, 1, 2]) == 1)
    assert np.allclose(eval_grid(soe(1.0, -1j), [0.0, math.log(2)]), [1.0, 0.5], rtol=1e-15)


@pytest.mark.parametrize("grid", [[], [1.0, 0.5]])
def test_grid_errors(grid):
    with pytest.raises(ValueError):
        eval_grid(soe(1.0, 0.0), grid)


@given(seed=seeds)
def test_grid_matches_pointwise(seed):
    rng = np.random.default_rng(seed)
    s = random_soe(rng)
    t = time_grid(30.0, 0.01)
    fast = eval_grid(s, t)
    idx = rng.choice(t.size, 40, replace=False)
    slow = np.array([evaluate(s, t[k]) for k in idx])
    scale = np.sum(np.abs(s.c))
    assert np.all(np.abs(fast[idx] - slow) <= 1e-12 * np.maximum(np.abs(slow), 1e-3 * scale))


def test_long_uniform_grid_does_not_drift():
    # 1e6 steps with weakly damped oscillating modes
    s = soe([1, 0.5j], [3.0 - 1e-6j, -7.0 - 2e-6j])
    t = time_grid(1e4, 0.01)
    fast = eval_grid(s, t)
    exact = np.exp(-1j * np.outer(t[-5:], s.z)) @ s.c
    assert np.allclose(fast[-5:], exact, rtol=1e-12)


def test_nonuniform_grid():
    s = soe([1, 2], [-1j, 2 - 0.5j])
    t = np.array([0.0, 0.3, 0.31, 2.0, 2.0, 9.0])
    assert np.allclose(eval_grid(s, t), [evaluate(s, x) for x in t], rtol=1e-14)


# ------------------------------------------------------- representation

@pytest.mark.parametrize("c,z,kw", [
    ([], [], {}), ([1, 2], [0j], {}), ([np.nan], [0j], {}), ([1], [1j], {}),
    ([1], [0j], dict(meta={"provenance": "quadrature"})),
    ([1], [0j], dict(meta={"provenance": "magic"})), ([1], [-1j], dict(horizon=0.0)),
])
def test_invalid_representations(c, z, kw):
    with pytest.raises(ValueError):
        SoeRepresentation(np.array(c, complex), np.array(z, complex), **kw)


def test_tiny_positive_imag_tolerated():
    assert soe(1.0, 0.5 + 1e-13j).N == 1


def test_json_round_trip(tmp_path, rng):
    s = random_soe(rng).with_error("L1", 3e-4)
    s = SoeRepresentation(s.c, s.z, 12.5, {"provenance": "esprit", "k": 3}, s.achieved_error)
    path = tmp_path / "soe.json"
    s.save(path)
    back = SoeRepresentation.load(path)
    assert np.array_equal(back.c, s.c) and np.array_equal(back.z, s.z)
    assert back.horizon == 12.5 and back.meta == s.meta
    assert back.achieved_error == ("L1", 3e-4)
    doc = s.to_json()
    assert set(doc) == {"terms", "horizon", "meta"} and set(doc["terms"][0]) == {"c", "z"}


def test_infinite_horizon_serializes():
    doc = soe(1.0, -1j).to_json()
    assert doc["horizon"] == "inf"
    assert math.isinf(SoeRepresentation.from_json(doc).horizon)


def test_write_csv(tmp_path):
    path = tmp_path / "soe.csv"
    write_csv(soe(1.0, -1j), path, 1.0, 0.5)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,re,im" and len(lines) == 4
    t, re, im = map(float, lines[2].split(","))
    assert (t, re, im) == (0.5, pytest.approx(math.exp(-0.5), rel=1e-15), 0.0)


# ----------------------------------------------------------- transforms

def test_rescale_identity_and_phase():
    s = soe([1, 2j], [0.5 - 1j, -2j], horizon=10.0)
    same = affine_rescale(s, 1.0, 0.0)
    assert np.array_equal(same.z, s.z) and same.horizon == 10.0
    shifted = affine_rescale(soe(1.0, 0.0), 2.0, 3.0)
    assert shifted.z[0] == 3.0
    assert evaluate(shifted, 0.7) == pytest.approx(np.exp(-3j * 0.7), rel=1e-15)


@given(seed=seeds, s=st.floats(0.01, 100.0), d=st.floats(-50.0, 50.0))
def test_rescale_round_trip(seed, s, d):
    x = random_soe(np.random.default_rng(seed), n=5)
    y = affine_rescale(affine_rescale(x, s, d), 1 / s, -d / s)
    assert np.allclose(y.z, x.z, rtol=0, atol=1e-14 * (1 + abs(d) / s) * 10)
    assert np.array_equal(y.c, x.c)


def test_rescale_rejects_non_positive_scale():
    with pytest.raises(ValueError):
        affine_rescale(soe(1.0, 0.0), 0.0, 1.0)


@given(seed=seeds, t=st.floats(0.0, 50.0))
def test_merge_is_linear(seed, t):
    rng = np.random.default_rng(seed)
    a, b = random_soe(rng, 7), random_soe(rng, 11)
    m = merge(a, b)
    assert m.N == 18
    scale = np.sum(np.abs(m.c))
    assert abs(evaluate(m, t) - evaluate(a, t) - evaluate(b, t)) <= 1e-13 * scale


def test_merge_consolidates_duplicates():
    a = soe([1, 2], [-1j, 1 - 1j], horizon=5.0)
    b = soe([3], [-1j], horizon=3.0)
    m = merge(a, b, consolidate=True)
    assert m.N == 2 and m.horizon == 3.0
    assert sorted(np.abs(m.c)) == [2, 4]


def test_merged_fermionic_branches_give_total_hybridization():
    from soebath.contour import build_bcf_soe
    from soebath.oracle import BcfOracle
    from conftest import model
    eps, T = 1e-6, 20.0
    parts = [build_bcf_soe(model("semicircle", [1, 1], "fermion", beta=2.0, mu=0.3, branch=b),
                           eps, T) for b in ("lesser", "greater")]
    total = merge(*parts)
    t = np.linspace(0, T, 51)
    # lesser + greater weighting is the bare density
    ref = BcfOracle(model("semicircle", [1, 1], "fermion", mu=5.0), abs_tol=1e-12)(t)
    assert np.max(np.abs(eval_grid(total, t) - ref)) <= 2 * eps


@given(seed=seeds)
def test_conjugate_closure_is_real(seed):
    s = conjugate_closure(random_soe(np.random.default_rng(seed), 9))
    assert s.meta["real_kernel"]
    v = eval_grid(s, np.linspace(0, 10, 101))
    assert np.all(np.abs(v.imag) <= 1e-12 * (1 + np.abs(v.real)))


def test_conjugate_closure_keeps_real_part():
    s = soe([1 + 2j, 0.5], [2 - 1j, -0.3j])
    closed = conjugate_closure(s)
    t = np.linspace(0, 5, 11)
    assert np.allclose(eval_grid(closed, t), eval_grid(s, t).real, rtol=1e-14, atol=1e-15)


def test_conjugate_closure_pairs_in_place():
    s = soe([1 - 1j, 2.0, 1 + 1j], [-1 - 1j, -0.5j, 1 - 1j])
    assert conjugate_closure(s).N == 3


# ---------------------------------------------------------------- errors

def test_error_examples():
    s = soe(1.0, 0.0)
    assert l1_error(s, lambda t: np.zeros_like(t), 1.0, 0.5) == 1.5
    assert linf_error(s, lambda t: np.zeros_like(t), 3.0, 0.1) == 1.0
    t = time_grid(10.0, 0.01)
    assert l1_error(s, eval_grid(s, t), 10.0, 0.01) == 0.0
    assert linf_error(s, s, 10.0, 0.01) == 0.0


def test_scalar_reference_is_accepted():
    s = soe(1.0, -1j)
    assert l1_error(s, lambda t: math.exp(-t), 2.0, 0.5) == pytest.approx(0.0, abs=1e-15)


def test_time_grid():
    assert time_grid(1.0, 0.5).tolist() == [0.0, 0.5, 1.0]
    assert time_grid(100.0, 0.01).size == 10001
    with pytest.raises(ValueError):
        time_grid(0.001, 0.01)
    with pytest.raises(ValueError):
        time_grid(1.0, 0.0)


def test_reference_shape_mismatch():
    with pytest.raises(ValueError):
        l1_error(soe(1.0, 0.0), np.zeros(3), 1.0, 0.1)


def test_norm_names():
    assert normalize_norm("l1") == "L1" and normalize_norm("L∞") == "Linf"
    assert normalize_norm("linf") == "Linf"
    with pytest.raises(ValueError):
        normalize_norm("l2")
    assert measure(soe(1.0, 0.0), np.zeros(3), 1.0, 0.5, "linf") == 1.0


def test_riemann_l1_is_stable_under_halving():
    from soebath.contour import build_bcf_soe
    from conftest import model
    s = build_bcf_soe(model("ohmic", [1, 1]), 1e-2, 20.0, refine=False)
    ref = lambda t: 1 / (1 + 1j * t) ** 2
    dt = 0.05 / np.max(np.abs(s.z))
    e1 = l1_error(s, ref, 20.0, dt)
    e2 = l1_error(s, ref, 20.0, dt / 2)
    assert abs(e1 - e2) < 0.05 * e1
