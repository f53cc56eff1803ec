import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from baiyin import kernels
from baiyin.comboracle import (
    ConfigCountResult, column_chains, compare_comb_identity, count_configurations,
    exact_expected_trace, fraction_str, in_budget_pairs, l2_gap, monte_carlo_trace_mean,
    row_chains,
)
from baiyin.errors import BudgetError, DomainError


def brute_count(p, n, l):
    """Direct product enumeration with no pruning."""
    total = 0
    for i in range(p):
        for us in itertools.product(range(p), repeat=l - 1):
            u = (i,) + us + (i,)
            if any(u[r] == u[r + 1] for r in range(l)):
                continue
            for v in itertools.product(range(n), repeat=l):
                if any(v[s] == v[s + 1] for s in range(l - 1)):
                    continue
                edges = Counter()
                for r in range(l):
                    edges[(u[r], v[r])] += 1
                    edges[(u[r + 1], v[r])] += 1
                if all(c % 2 == 0 for c in edges.values()):
                    total += 1
    return total


def fraction_mean_trace(p, n, l):
    """Average of Tr p_l(T) over all sign matrices, with T in exact fractions."""
    y1 = Fraction(p - 2, n)
    y2 = Fraction((p - 1) * (n - 1), n * n)
    acc = Fraction(0)
    for bits in itertools.product((-1, 1), repeat=p * n):
        x = [bits[r * n:(r + 1) * n] for r in range(p)]
        t = [[Fraction(sum(a * b for a, b in zip(x[r], x[c])), n) if r != c else Fraction(0)
              for c in range(p)] for r in range(p)]
        eye = [[Fraction(int(r == c)) for c in range(p)] for r in range(p)]
        prev, cur = eye, t
        if l == 0:
            cur = eye
        for _ in range(l - 1):
            prod = [[sum(t[r][k] * cur[k][c] for k in range(p)) for c in range(p)] for r in range(p)]
            prev, cur = cur, [[prod[r][c] - y1 * cur[r][c] - y2 * prev[r][c] for c in range(p)]
                              for r in range(p)]
        acc += sum(cur[r][r] for r in range(p))
    return acc / 2 ** (p * n)


def test_walk_count_examples():
    for n in (1, 2, 3):
        for l in (2, 3, 4):
            assert count_configurations(1, n, l) == 0
    for p, n in [(2, 2), (3, 4), (5, 3), (4, 4)]:
        assert count_configurations(p, n, 2) == 0
    assert count_configurations(2, 2, 4) == brute_count(2, 2, 4)
    # with p = n = 2 both chains alternate, so i and v1 fix the walk and
    # each of the 4 walks traverses every edge exactly twice
    assert count_configurations(2, 2, 4) == 4


def test_degree_conventions():
    assert count_configurations(3, 2, 0) == 3
    assert count_configurations(3, 2, 1) == 0


@pytest.mark.parametrize("p,n,l", [(2, 2, 3), (2, 3, 4), (3, 2, 4), (3, 3, 3), (2, 2, 5), (3, 3, 4), (4, 2, 4)])
def test_count_matches_brute_force(p, n, l):
    assert count_configurations(p, n, l) == brute_count(p, n, l)


def test_chain_shapes():
    u = row_chains(3, 3)
    assert u.shape[1] == 4
    assert np.all(u[:, 0] == u[:, -1])
    assert np.all(u[:, 1:] != u[:, :-1])
    # closed walks on K_3 of length 3 with distinct neighbours: 3 * 2 * 1
    assert len(u) == 6
    v = column_chains(4, 3)
    assert v.shape == (4 * 3 * 3, 3)


def test_exact_trace_examples():
    assert exact_expected_trace(2, 2, 0) == 2
    assert exact_expected_trace(3, 4, 1) == 0
    assert exact_expected_trace(2, 2, 2) == Fraction(1, 2)


@pytest.mark.parametrize("p,n,l", [(2, 2, 2), (2, 2, 3), (2, 2, 4), (3, 2, 3), (2, 3, 4), (3, 3, 2), (1, 4, 3)])
def test_exact_trace_matches_fraction_oracle(p, n, l):
    assert exact_expected_trace(p, n, l) == fraction_mean_trace(p, n, l)


def test_denominator_divides():
    for p, n in [(2, 3), (3, 3), (4, 2)]:
        for l in range(5):
            q = exact_expected_trace(p, n, l)
            assert (n**l * 2 ** (p * n)) % q.denominator == 0


def test_compare_examples():
    r = compare_comb_identity(2, 2, 1)
    assert r.discrepancy == 0
    r = compare_comb_identity(2, 2, 2)
    assert (r.exact_mean_trace, r.predicted_mean, r.discrepancy) == (Fraction(1, 2), 0, Fraction(1, 2))
    d = r.to_dict()
    assert (d["exact_mean_trace"], d["predicted_mean"], d["discrepancy"]) == ("1/2", "0", "1/2")
    # the conjectured closed form p(p-1)/n^2 is confirmed here
    assert compare_comb_identity(3, 2, 2).discrepancy == Fraction(3, 2)


def test_low_degrees_agree_everywhere():
    for p, n in in_budget_pairs(16):
        for l in (0, 1):
            r = compare_comb_identity(p, n, l)
            assert r.predicted_mean == r.exact_mean_trace


def test_l2_closed_form_over_budget():
    for p, n in in_budget_pairs(20):
        assert exact_expected_trace(p, n, 2) == l2_gap(p, n), (p, n)


def test_higher_degree_discrepancy_is_reported():
    r = compare_comb_identity(2, 2, 4)
    assert isinstance(r, ConfigCountResult)
    assert r.discrepancy == r.exact_mean_trace - Fraction(r.config_count, 16)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(2, 3), st.integers(2, 4), st.randoms(use_true_random=False))
def test_relabel_invariance(p, n, l, rnd):
    u = row_chains(p, l)
    v = column_chains(n, l)
    rp = np.array(rnd.sample(range(p), p))
    rn = np.array(rnd.sample(range(n), n))
    base = kernels.count_even_walks(u, v, n)
    assert kernels.count_even_walks(rp[u], rn[v], n) == base
    # reordering the chain lists changes nothing either
    assert kernels.count_even_walks(u[::-1].copy(), v[::-1].copy(), n) == base


@pytest.mark.parametrize("p,n,l", [(3, 4, 2), (3, 4, 4), (2, 5, 3)])
def test_monte_carlo_consistency(p, n, l):
    mean, se = monte_carlo_trace_mean(p, n, l, 10_000, master_seed=2024)
    exact = float(exact_expected_trace(p, n, l))
    assert abs(mean - exact) <= 4 * se + 1e-12


def test_budgets():
    with pytest.raises(BudgetError):
        count_configurations(100, 100, 4)
    with pytest.raises(BudgetError):
        exact_expected_trace(5, 5, 2)
    with pytest.raises(BudgetError):
        exact_expected_trace(2, 2, 9)
    with pytest.raises(DomainError):
        count_configurations(0, 2, 2)
    with pytest.raises(DomainError):
        exact_expected_trace(2, 2, -1)


def test_fraction_str():
    assert fraction_str(Fraction(3, 6)) == "1/2"
    assert fraction_str(Fraction(-4, 2)) == "-2"


@pytest.mark.parametrize("p,n,l", [(2, 2, 4), (3, 3, 3), (3, 2, 5)])
def test_backends_agree_on_walks(p, n, l):
    u, v = row_chains(p, l), column_chains(n, l)
    assert kernels._count_even_walks_numba(u, v, n) == kernels._count_even_walks_numpy(u, v, n)


@pytest.mark.parametrize("p,n", [(2, 2), (3, 3), (2, 5)])
def test_backends_agree_on_exhaustive_traces(p, n):
    total = 1 << (p * n)
    a = kernels._exhaustive_traces_numba(p, n, 4, 0, total)
    b = kernels._exhaustive_traces_numpy(p, n, 4, 0, total)
    assert np.array_equal(np.asarray(a), np.asarray(b))
    # split ranges sum to the whole
    half = total // 2
    c = np.asarray(kernels._exhaustive_traces_numpy(p, n, 4, 0, half)) + np.asarray(
        kernels._exhaustive_traces_numpy(p, n, 4, half, total))
    assert np.array_equal(c, np.asarray(b))
