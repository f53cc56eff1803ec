"""Exact adjudication of the walk-count formula for ``E Tr T(l)``.

Two independent routes:

* :func:`count_configurations` counts closed walks
  ``i, v1, u1, v2, ..., u_{l-1}, vl, i`` on the complete bipartite graph with
  adjacent row indices distinct, adjacent column indices distinct, and every
  edge traversed an even number of times.
* :func:`exact_expected_trace` averages ``Tr T(l)`` over all ``2^{pn}`` sign
  matrices using the integer recurrence for ``M(l) = n^l T(l)``::

      M(l+1) = (G - (n + p - 2) I) M(l) - (p - 1)(n - 1) M(l-1)

  with ``G = X X^T``, ``M(0) = I`` and ``M(1) = G - n I``.

The walk count divided by ``n^l`` is compared with the exact mean; any
difference is reported, not asserted away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import BudgetError, DomainError

WALK_BUDGET = 10**8
MATRIX_BUDGET_PN = 20
MAX_ORACLE_DEGREE = 8
_INT64_HEADROOM = 2**62


def _chains(alphabet: int, length: int, closed: bool):
    """Index sequences with distinct neighbours, built by a pruned odometer.

    Open chains have ``length`` entries. Closed chains have ``length + 1``
    entries with the last equal to the first, and the wrap-around neighbour
    must differ too.
    """
    if closed:
        size = length + 1
    else:
        size = length
    out = []
    seq = [0] * size

    def extend(pos):
        if pos == size - 1 and closed:
            if seq[pos - 1] != seq[0]:
                seq[pos] = seq[0]
                out.append(tuple(seq))
            return
        if pos == size:
            out.append(tuple(seq))
            return
        for a in range(alphabet):
            if pos > 0 and a == seq[pos - 1]:
                continue
            seq[pos] = a
            extend(pos + 1)

    extend(0)
    return np.array(out, dtype=np.int64).reshape(len(out), size)


def row_chains(p: int, l: int) -> np.ndarray:
    """Closed row sequences ``(i, u1, .., u_{l-1}, i)``, consecutive entries distinct."""
    return _chains(p, l, closed=True)


def column_chains(n: int, l: int) -> np.ndarray:
    """Column sequences ``(v1, .., vl)`` with consecutive entries distinct."""
    return _chains(n, l, closed=False)


def count_configurations(p: int, n: int, l: int) -> int:
    """Number of admissible even closed walks of half-length ``l``.

    ``l = 0`` returns ``p`` (one empty walk per starting row). For ``l = 1``
    the constraint ``i != i`` admits nothing, so the count is zero.
    """
    if p < 1 or n < 1 or l < 0:
        raise DomainError(f"need p, n >= 1 and l >= 0, got {p}, {n}, {l}")
    if l == 0:
        return p
    if l == 1:
        return 0
    if p**l * n**l > WALK_BUDGET:
        raise BudgetError(f"p^l n^l = {p**l * n**l} exceeds the walk budget {WALK_BUDGET}")
    u = row_chains(p, l)
    v = column_chains(n, l)
    return int(kernels.count_even_walks(u, v, n))


def _entry_bound(p, n, top):
    # row-sum norm bound for M(l); keeps every partial sum inside int64
    a_norm = (p - 1) * n + abs(p - 2)
    c = (p - 1) * (n - 1)
    prev, cur = 1, n * (p - 1)
    worst = max(prev, cur)
    for _ in range(1, top):
        prev, cur = cur, a_norm * cur + c * prev
        worst = max(worst, cur)
    return worst


@lru_cache(maxsize=None)
def _exact_trace_sums(p: int, n: int, top: int):
    total = 1 << (p * n)
    per_matrix = p * _entry_bound(p, n, top)
    chunk = max(1, min(total, _INT64_HEADROOM // max(1, per_matrix)))
    sums = [0] * (top + 1)
    for start in range(0, total, chunk):
        part = kernels.exhaustive_traces(p, n, top, start, min(total, start + chunk))
        for l in range(top + 1):
            sums[l] += int(part[l])
    return tuple(sums)


def exact_expected_trace(p: int, n: int, l: int) -> Fraction:
    """``E Tr T(l)`` over all ``2^{pn}`` sign matrices, as an exact fraction."""
    if p < 1 or n < 1 or l < 0:
        raise DomainError(f"need p, n >= 1 and l >= 0, got {p}, {n}, {l}")
    if p * n > MATRIX_BUDGET_PN or l > MAX_ORACLE_DEGREE:
        raise BudgetError(
            f"exhaustive oracle limited to p*n <= {MATRIX_BUDGET_PN}, l <= {MAX_ORACLE_DEGREE}"
        )
    if _entry_bound(p, n, max(l, 1)) * p >= _INT64_HEADROOM:  # pragma: no cover - unreachable in budget
        raise BudgetError("integer recurrence would overflow int64")
    sums = _exact_trace_sums(p, n, max(l, 1))
    return Fraction(sums[l], n**l * (1 << (p * n)))


@dataclass(frozen=True)
class ConfigCountResult:
    p: int
    n: int
    l: int
    config_count: int
    exact_mean_trace: Fraction
    predicted_mean: Fraction
    discrepancy: Fraction

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "l": self.l,
            "config_count": str(self.config_count),
            "exact_mean_trace": fraction_str(self.exact_mean_trace),
            "predicted_mean": fraction_str(self.predicted_mean),
            "discrepancy": fraction_str(self.discrepancy),
        }


def fraction_str(q: Fraction) -> str:
    """``"num/den"``, or just ``"num"`` for integers."""
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def compare_comb_identity(p: int, n: int, l: int) -> ConfigCountResult:
    """Put the walk count and the exhaustive mean side by side."""
    count = count_configurations(p, n, l)
    exact = exact_expected_trace(p, n, l)
    predicted = Fraction(count, n**l)
    return ConfigCountResult(p, n, l, count, exact, predicted, exact - predicted)


def l2_gap(p: int, n: int) -> Fraction:
    """``p(p-1)/n^2``: the measured ``l = 2`` excess of the exact mean."""
    return Fraction(p * (p - 1), n * n)


def in_budget_pairs(max_pn: int):
    """All ``(p, n)`` with ``p * n <= max_pn``."""
    return [(p, n) for p in range(1, max_pn + 1) for n in range(1, max_pn // p + 1)]


def monte_carlo_trace_mean(p: int, n: int, l: int, samples: int, master_seed: int):
    """Sample mean and standard error of ``Tr T(l)`` over seeded matrices."""
    from .chebpoly import t_sequence
    from .randmat import derive_seed, gen_sign_matrix

    vals = np.empty(samples)
    for k in range(samples):
        x = gen_sign_matrix(p, n, derive_seed(master_seed, k))
        vals[k] = t_sequence(x, l).traces()[l]
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))
