"""Khinchine-type lower bounds for averages over few random sign vectors.

For ``N = round((1 + delta) n)`` random sign vectors ``eps_j`` in R^n the
functional ``x -> (1/N) sum_j |<x, eps_j>|`` is bounded below on the unit
sphere with high probability. This module evaluates the functional, searches
for its sphere minimum, and computes the quantities used to certify it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BudgetError, DimensionError, DomainError
from .randmat import derive_seed, gen_sign_matrix
from .spectral import symmetric_eigenvalues

FULL_AVERAGE_MAX_DIM = 16
DEFAULT_STEP = 0.1
GAUSSIAN_GENERATOR_ID = "numpy-pcg64"


def _round_half_up(v):
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class SignSystem:
    """``N`` sign vectors in R^n, split into a v-block and a w-block.

    The v-block holds the first ``n + ceil(delta n / 2)`` rows and the
    w-block the rest.
    """

    N: int
    n: int
    delta: float
    vectors: np.ndarray
    seed: int

    @classmethod
    def generate(cls, n: int, delta: float, seed: int) -> "SignSystem":
        if not 0 < delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {delta}")
        big_n = _round_half_up((1 + delta) * n)
        x = gen_sign_matrix(big_n, n, seed)
        return cls(big_n, n, delta, x.entries, x.seed)

    @property
    def v_rows(self) -> int:
        return min(self.N, self.n + math.ceil(self.delta * self.n / 2))

    def v_block(self) -> np.ndarray:
        return self.vectors[: self.v_rows]

    def w_block(self) -> np.ndarray:
        return self.vectors[self.v_rows:]

    def as_float(self) -> np.ndarray:
        return self.vectors.astype(np.float64)


def khinchine_value(x, sys: SignSystem) -> float:
    """``(1/N) sum_j |<x, eps_j>|``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (sys.n,):
        raise DimensionError(f"expected a vector of length {sys.n}, got shape {x.shape}")
    return float(np.abs(sys.as_float() @ x).sum() / sys.N)


def khinchine_full_average(x, n=None) -> float:
    """Exact mean of ``|sum_i eps_i x_i|`` over all ``2^n`` sign vectors."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0] if n is None else n
    if x.shape != (n,):
        raise DimensionError(f"expected a vector of length {n}")
    if n > FULL_AVERAGE_MAX_DIM:
        raise BudgetError(f"2^n enumeration limited to n <= {FULL_AVERAGE_MAX_DIM}")
    if n == 0:
        return 0.0
    return float(kernels.sign_average(np.ascontiguousarray(x)))


@dataclass(frozen=True)
class EmbeddingCertificate:
    N: int
    n: int
    delta: float
    seed: int
    min_estimate: float
    minimizer: np.ndarray
    sigma_min_lower: float
    c_delta_ref: float
    restarts: int
    iterations: int
    final_values: tuple = ()

    def c0_fit(self, log_exponent=1.0) -> float:
        """Largest ``c0`` with ``c_delta(delta, c0) <= min_estimate``."""
        return self.min_estimate / c_delta(self.delta, 1.0, log_exponent)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "n": self.n,
            "delta": self.delta,
            "seed": self.seed,
            "min_estimate": self.min_estimate,
            "minimizer": [float(v) for v in self.minimizer],
            "sigma_min_lower": self.sigma_min_lower,
            "c_delta_ref": self.c_delta_ref,
            "c0_fit": self.c0_fit(1.0),
            "c0_fit_sqrt_log": self.c0_fit(0.5),
            "restarts": self.restarts,
            "iterations": self.iterations,
        }


def _start_point(n, restart, seed):
    if restart == 0:
        x = np.zeros(n)
        x[0] = 1.0
        return x
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, restart)))
    return rng.standard_normal(n)


def smallest_singular_value(m) -> float:
    """``sigma_min`` of a tall matrix via the Gram eigenvalue."""
    m = np.asarray(m, dtype=np.float64)
    lam = symmetric_eigenvalues(m.T @ m)[0]
    return math.sqrt(max(lam, 0.0))


def min_khinchine(sys: SignSystem, restarts=64, iters=500, seed=0, step=DEFAULT_STEP,
                  c0=1.0, log_exponent=1.0, workers=1) -> EmbeddingCertificate:
    """Multi-start projected subgradient search for the sphere minimum.

    Step ``t`` moves along ``-sign(Ex)^T E / N`` with length ``step / sqrt(t)``
    and renormalises. Restart 0 starts at ``e_1``, where the functional equals
    one; the others start at Gaussian directions seeded by
    ``derive_seed(seed, r)``. The lowest value over all iterates wins, ties
    going to the lowest restart index.

    ``sigma_min_lower = sigma_min(E) / N`` is a rigorous floor, since
    ``sum_j |a_j| >= (sum_j a_j^2)^{1/2}``.
    """
    if restarts < 1 or iters < 1:
        raise DomainError("restarts and iters must be positive")
    e = np.ascontiguousarray(sys.as_float())

    def job(r):
        return kernels.sphere_descent(e, _start_point(sys.n, r, seed), iters, step)

    if workers <= 1:
        results = [job(r) for r in range(restarts)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(restarts)))
    best_r = min(range(restarts), key=lambda r: (results[r][0], r))
    minimizer = np.array(results[best_r][1])
    value = khinchine_value(minimizer, sys)
    return EmbeddingCertificate(
        sys.N, sys.n, sys.delta, sys.seed, value, minimizer,
        smallest_singular_value(e) / sys.N,
        c_delta(sys.delta, c0, log_exponent),
        restarts, iters, tuple(float(res[2]) for res in results),
    )


def sigma_min_normalized(sys: SignSystem) -> float:
    """Smallest singular value of the v-block with rows ``eps_j / sqrt(n)``."""
    v = sys.v_block()
    if v.shape[0] == 0:
        raise DomainError("v-block is empty")
    return smallest_singular_value(v) / math.sqrt(sys.n)


def random_unit_vectors(n, count, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    g = rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def w_block_upper(sys: SignSystem, sample_count=1000, seed=0) -> float:
    """Largest ``(1/sqrt n) sum_j |<x, w_j>|`` over random unit ``x``.

    ``w_j = eps_j / sqrt(n)`` runs over the w-block, so each term is at most
    one and the value never exceeds ``#w / sqrt(n)``.
    """
    w = sys.w_block()
    if w.shape[0] == 0:
        raise DomainError("w-block is empty")
    if sample_count < 1:
        raise DomainError("sample_count must be positive")
    xs = random_unit_vectors(sys.n, sample_count, seed)
    vals = np.abs(xs @ w.T.astype(np.float64)).sum(axis=1) / sys.n
    return float(vals.max())


def c_delta(delta: float, c0: float = 1.0, log_exponent: float = 1.0) -> float:
    """``c0 delta^{5/2} / log(1/delta)^{log_exponent}``."""
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if c0 <= 0:
        raise DomainError("c0 must be positive")
    return c0 * delta**2.5 / math.log(1 / delta) ** log_exponent


def schutt_bound(m: int, k: int, C4: float = 1.0):
    """Covering radius ``C4 sqrt((m/k) log(m/k))`` and log-count ``k``."""
    if not 1 <= k < m:
        raise DomainError(f"need 1 <= k < m, got k={k}, m={m}")
    t = m / k
    return C4 * math.sqrt(t * math.log(t)), float(k)


def median_dot_check(n: int, samples: int = 10_000, seed: int = 0, threshold: float = 0.3) -> float:
    """Empirical ``P(|<x, eps>| >= threshold)`` for random unit ``x`` and signs ``eps``."""
    if samples < 100:
        raise DomainError("need at least 100 samples")
    xs = random_unit_vectors(n, samples, seed)
    eps = gen_sign_matrix(samples, n, derive_seed(seed, 0)).entries.astype(np.float64)
    dots = np.abs(np.einsum("ij,ij->i", xs, eps))
    return float(np.mean(dots >= threshold))
