import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from baiyin import kernels
from baiyin.errors import BudgetError, DimensionError, DomainError
from baiyin.l1section import (
    SignSystem, c_delta, khinchine_full_average, khinchine_value, median_dot_check, min_khinchine,
    random_unit_vectors, schutt_bound, sigma_min_normalized, smallest_singular_value, w_block_upper,
)


@pytest.fixture(scope="module")
def sys64():
    return SignSystem.generate(64, 0.5, seed=3)


@pytest.fixture(scope="module")
def cert128():
    sys = SignSystem.generate(128, 0.5, seed=2024)
    return sys, min_khinchine(sys, restarts=64, iters=500, seed=2024)


def test_system_shape():
    sys = SignSystem.generate(10, 0.25, seed=1)
    assert sys.N == 13  # 12.5 rounds up
    assert set(np.unique(sys.vectors)) <= {-1, 1}
    assert sys.v_rows == 10 + 2  # ceil(1.25)
    assert sys.v_block().shape[0] + sys.w_block().shape[0] == sys.N
    with pytest.raises(DomainError):
        SignSystem.generate(10, 1.0, seed=1)


def test_value_examples(sys64):
    assert khinchine_value(np.zeros(64), sys64) == 0
    e1 = np.zeros(64)
    e1[0] = 1
    assert khinchine_value(e1, sys64) == 1
    x = random_unit_vectors(64, 1, 0)[0]
    assert khinchine_value(2 * x, sys64) == pytest.approx(2 * khinchine_value(x, sys64), rel=1e-12)
    with pytest.raises(DimensionError):
        khinchine_value(np.ones(3), sys64)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 64, elements=st.floats(-10, 10)), st.floats(-1e3, 1e3))
def test_homogeneity(x, c):
    sys = SignSystem.generate(64, 0.5, seed=3)
    base = khinchine_value(x, sys)
    assert khinchine_value(c * x, sys) == pytest.approx(abs(c) * base, rel=1e-12, abs=1e-300)


def test_full_average_examples():
    assert khinchine_full_average(np.array([1.0])) == 1.0
    assert khinchine_full_average(np.array([1.0, 1.0]) / math.sqrt(2)) == pytest.approx(math.sqrt(2) / 2)
    with pytest.raises(BudgetError):
        khinchine_full_average(np.ones(17))
    with pytest.raises(DimensionError):
        khinchine_full_average(np.ones(3), n=4)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_classical_khinchine(n, seed):
    x = random_unit_vectors(n, 1, seed)[0]
    v = khinchine_full_average(x)
    assert 1 / math.sqrt(2) - 1e-12 <= v <= 1 + 1e-12


def test_full_average_backends_agree():
    x = random_unit_vectors(10, 1, 5)[0]
    assert kernels._sign_average_numba(x) == pytest.approx(kernels._sign_average_numpy(x), rel=1e-13)


def test_one_dimensional_minimum():
    sys = SignSystem.generate(1, 0.5, seed=9)
    cert = min_khinchine(sys, restarts=4, iters=20, seed=1)
    assert cert.min_estimate == pytest.approx(1.0, abs=1e-12)


def test_minimum_at_most_one(sys64):
    cert = min_khinchine(sys64, restarts=3, iters=50, seed=4)
    assert cert.min_estimate <= 1.0


def test_certificate_n128(cert128):
    sys, cert = cert128
    assert cert.min_estimate >= cert.sigma_min_lower - 1e-9
    assert cert.sigma_min_lower > 0
    assert abs(khinchine_value(cert.minimizer, sys) - cert.min_estimate) <= 1e-12
    assert np.linalg.norm(cert.minimizer) == pytest.approx(1.0, abs=1e-12)
    assert cert.min_estimate <= min(cert.final_values) + 1e-12
    d = cert.to_dict()
    assert len(d["minimizer"]) == 128
    assert d["c0_fit"] > 0 and d["c0_fit_sqrt_log"] > 0
    assert cert.min_estimate >= c_delta(0.5, cert.c0_fit(), 1.0) - 1e-12


def test_norm_comparison(sys64):
    e = sys64.as_float()
    xs = random_unit_vectors(64, 200, 8)
    for x in xs:
        assert khinchine_value(x, sys64) >= np.linalg.norm(e @ x) / sys64.N - 1e-12


def test_workers_do_not_change_certificate(sys64):
    a = min_khinchine(sys64, restarts=6, iters=40, seed=12, workers=1)
    b = min_khinchine(sys64, restarts=6, iters=40, seed=12, workers=3)
    assert a.to_dict() == b.to_dict()


def test_descent_backends_agree(sys64):
    e = np.ascontiguousarray(sys64.as_float())
    x0 = random_unit_vectors(64, 1, 2)[0]
    a = kernels._sphere_descent_numba(e, x0.copy(), 100, 0.1)
    b = kernels._sphere_descent_numpy(e, x0.copy(), 100, 0.1)
    assert a[0] == pytest.approx(b[0], rel=1e-9)
    assert np.allclose(a[1], b[1], atol=1e-9)


def test_sigma_min_examples():
    sys = SignSystem.generate(1, 0.5, seed=0)
    assert sigma_min_normalized(sys) == pytest.approx(math.sqrt(sys.v_rows))
    sys = SignSystem.generate(40, 0.5, seed=6)
    v = sys.v_block().astype(np.float64) / math.sqrt(40)
    ref = np.linalg.svd(v, compute_uv=False).min()
    assert sigma_min_normalized(sys) == pytest.approx(ref, abs=1e-8)
    assert smallest_singular_value(v) == pytest.approx(ref, abs=1e-8)


def test_sigma_min_positive_n256():
    vals = [sigma_min_normalized(SignSystem.generate(256, 0.5, seed=s)) for s in range(50)]
    assert min(vals) > 0
    # each value / delta is one sample of the lower-isometry constant
    assert all(v / 0.5 > 0 for v in vals)


def test_w_block_ceilings():
    sys = SignSystem.generate(256, 0.5, seed=1)
    nw = sys.w_block().shape[0]
    val = w_block_upper(sys, 1000, seed=2)
    assert 0 < val <= nw / math.sqrt(256)
    assert val <= 0.5 * math.sqrt(256) / 2
    # a single vector: each term bounded by one
    single = SignSystem(3, 1, 0.5, np.array([[1], [-1], [1]], dtype=np.int8), 0)
    assert single.w_block().shape[0] == 1
    assert w_block_upper(single, 10) <= 1.0
    with pytest.raises(DomainError):
        w_block_upper(sys, 0)


def test_c_delta_examples():
    assert c_delta(math.exp(-1)) == pytest.approx(math.exp(-2.5))
    assert c_delta(math.exp(-1)) == pytest.approx(0.08208, abs=5e-6)
    assert c_delta(0.25) == pytest.approx(0.02254, abs=5e-6)
    assert c_delta(0.05) < c_delta(0.1) < c_delta(0.2)
    with pytest.raises(DomainError):
        c_delta(1.0)


def test_schutt_examples():
    r, k = schutt_bound(8, 2)
    assert r == pytest.approx(math.sqrt(4 * math.log(4)))
    assert r == pytest.approx(2.3548, abs=5e-5)
    assert k == 2
    with pytest.raises(DomainError):
        schutt_bound(4, 4)
    # t = m/k > e: radius strictly decreasing in k
    radii = [schutt_bound(1000, k)[0] for k in range(1, 300)]
    assert all(a > b for a, b in zip(radii, radii[1:]))


def test_median_dot():
    assert median_dot_check(1, 200, seed=0) == 1.0
    assert median_dot_check(64, 10_000, seed=0) > 0.5
    probs = [median_dot_check(64, 2000, seed=1, threshold=t) for t in (0.1, 0.3, 0.6, 1.0, 2.0)]
    assert all(a >= b for a, b in zip(probs, probs[1:]))
    with pytest.raises(DomainError):
        median_dot_check(4, 10)
