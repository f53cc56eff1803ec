"""Monte Carlo probes of spectral-edge deviations and the closed-form tails."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericFailure
from .randmat import GENERATOR_ID, covariance, derive_seed, gen_sign_matrix
from .spectral import mp_edges, symmetric_eigenvalues

Z95 = 1.959963984540054


class Event(str, enum.Enum):
    OUTSIDE_EDGES = "outside_edges"
    LAMBDA_MIN_BELOW_THRESHOLD = "lambda_min_below_threshold"


def wilson_interval(hits: int, trials: int, z: float = Z95):
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise DomainError("trials must be positive")
    phat = hits / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    # clamp so the estimate stays inside despite rounding at hits in {0, trials}
    return min(phat, max(0.0, centre - half)), max(phat, min(1.0, centre + half))


@dataclass(frozen=True)
class TrialBatchReport:
    p: int
    n: int
    epsilon: float
    trials: int
    hits: int
    estimate: float
    ci_low: float
    ci_high: float
    master_seed: int
    event: Event
    lambda_min: tuple = field(default=(), repr=False)
    lambda_max: tuple = field(default=(), repr=False)

    def to_dict(self, per_trial=False) -> dict:
        out = {
            "p": self.p,
            "n": self.n,
            "epsilon": self.epsilon,
            "trials": self.trials,
            "hits": self.hits,
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "master_seed": self.master_seed,
            "event": self.event.value,
            "generator": GENERATOR_ID,
        }
        if per_trial:
            out["lambda_min"] = list(self.lambda_min)
            out["lambda_max"] = list(self.lambda_max)
        return out


def _extremes(p, n, seed):
    x = gen_sign_matrix(p, n, seed)
    ev = symmetric_eigenvalues(covariance(x), seed=seed)
    return float(ev[0]), float(ev[-1])


def trial_extremes(p: int, n: int, trials: int, master_seed: int, workers: int = 1):
    """``(lambda_min, lambda_max)`` of ``S`` for each trial, in trial order.

    Trial ``i`` uses ``derive_seed(master_seed, i)``, so the output does not
    depend on ``workers``.
    """
    if trials < 1:
        raise DomainError("trials must be positive")

    def job(i):
        seed = derive_seed(master_seed, i)
        try:
            return _extremes(p, n, seed)
        except NumericFailure as exc:
            raise NumericFailure(f"trial {i}: {exc}", seed=seed) from exc

    if workers <= 1:
        out = [job(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(job, range(trials)))
    lo = np.array([v[0] for v in out])
    hi = np.array([v[1] for v in out])
    return lo, hi


def _report(p, n, eps, hits_mask, master_seed, event, lo, hi):
    trials = len(hits_mask)
    hits = int(np.count_nonzero(hits_mask))
    ci_low, ci_high = wilson_interval(hits, trials)
    return TrialBatchReport(
        p, n, float(eps), trials, hits, hits / trials, ci_low, ci_high, int(master_seed), event,
        tuple(float(v) for v in lo), tuple(float(v) for v in hi),
    )


def estimate_outside_probability(p, n, eps, trials, master_seed, workers=1) -> TrialBatchReport:
    """Fraction of trials with ``lambda_min < a - eps`` or ``lambda_max > b + eps``."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    if p > n:
        raise DomainError("need p <= n")
    a, b = mp_edges(p / n)
    lo, hi = trial_extremes(p, n, trials, master_seed, workers)
    mask = (lo < a - eps) | (hi > b + eps)
    return _report(p, n, eps, mask, master_seed, Event.OUTSIDE_EDGES, lo, hi)


def rows_for_delta(n: int, delta: float) -> int:
    """``p = round((1 - delta) n)``, rounding halves up."""
    return int(math.floor((1 - delta) * n + 0.5))


def estimate_lambda_min_tail(n, delta, trials, master_seed, workers=1) -> TrialBatchReport:
    """Fraction of trials with ``lambda_min(S) <= delta^2 / 8`` at ``p = round((1-delta) n)``.

    ``epsilon`` in the report holds the threshold ``delta^2/8``.
    """
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    p = rows_for_delta(n, delta)
    if p < 2:
        raise DomainError(f"p = round((1 - delta) n) = {p} < 2")
    thr = delta**2 / 8
    lo, hi = trial_extremes(p, n, trials, master_seed, workers)
    return _report(p, n, thr, lo <= thr, master_seed, Event.LAMBDA_MIN_BELOW_THRESHOLD, lo, hi)


def theorem1_bound(p: int, eps: float, C: float = 1.0) -> float:
    """``exp(-p^{1/6} sqrt(eps) / C)``."""
    if C <= 0:
        raise DomainError("C must be positive")
    return math.exp(-(p ** (1 / 6)) * math.sqrt(eps) / C)


def theorem1_restriction(n: int, y: float, eps: float, C: float = 1.0) -> bool:
    """``C log^2 n / (sqrt(y) n^{1/3}) <= eps <= 1``."""
    if n < 2:
        raise DomainError("need n >= 2")
    return C * math.log(n) ** 2 / (math.sqrt(y) * n ** (1 / 3)) <= eps <= 1


def theorem2_bound(n: int, delta: float, C: float = 1.0) -> float:
    """``exp(-n^{1/6} delta / C)``."""
    if C <= 0:
        raise DomainError("C must be positive")
    return math.exp(-(n ** (1 / 6)) * delta / C)


def lprt_bound(delta: float, A: float, a: float, C: float, n: int):
    """Threshold ``A a^{1/delta}`` and probability ``exp(-C n)`` of the exponential-type bound."""
    if not 0 < a < 1:
        raise DomainError("a must lie in (0, 1)")
    if delta <= 0:
        raise DomainError("delta must be positive")
    return A * a ** (1 / delta), math.exp(-C * n)


def fit_tail_constant(exponents, probabilities):
    """Least-squares ``C`` in ``log P = -z / C`` over cells with ``0 < P``.

    ``exponents`` are the ``z`` values (``p^{1/6} sqrt(eps)`` or
    ``n^{1/6} delta``). Returns ``None`` if no cell has a positive estimate
    or the fit gives a nonpositive slope.
    """
    z = np.asarray(exponents, dtype=float)
    prob = np.asarray(probabilities, dtype=float)
    keep = prob > 0
    if not keep.any():
        return None
    z, logp = z[keep], np.log(prob[keep])
    k = -float(z @ logp) / float(z @ z)
    return 1 / k if k > 0 else None


def fit_theorem1_constant(reports):
    """Fit the outside-edges tail constant ``C`` in ``exp(-p^{1/6} sqrt(eps) / C)``."""
    z = [r.p ** (1 / 6) * math.sqrt(r.epsilon) for r in reports]
    return fit_tail_constant(z, [r.estimate for r in reports])


def fit_theorem2_constant(reports):
    """Fit the small-``lambda_min`` tail constant ``C`` in ``exp(-n^{1/6} delta / C)``.

    ``delta`` is recovered from the stored threshold ``epsilon = delta^2/8``.
    """
    z = [r.n ** (1 / 6) * math.sqrt(8 * r.epsilon) for r in reports]
    return fit_tail_constant(z, [r.estimate for r in reports])
