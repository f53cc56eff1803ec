"""Second-kind Chebyshev polynomials, the shifted family p_l and T(l) = p_l(T).

Traces of ``T(l)`` grow like ``y^{l/2}``, so traces are carried in the
normalised form ``tau(l) = y^{-l/2} Tr T(l)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, RangeError
from .randmat import t_matrix
from .spectral import symmetric_eigenvalues

MAX_DEGREE = 200
TRACE_LIMIT = 1e300


@dataclass(frozen=True)
class ShiftedChebParams:
    """Recurrence coefficients ``y1``, ``y2``, aspect ratio ``y`` and degree ``l``."""

    y1: float
    y2: float
    y: float
    l: int = 0

    @classmethod
    def from_dims(cls, p: int, n: int, l: int = 0) -> "ShiftedChebParams":
        if p < 1 or n < 1:
            raise DomainError(f"need p, n >= 1, got {p}, {n}")
        return cls((p - 2) / n, (p - 1) * (n - 1) / n**2, p / n, l)

    @staticmethod
    def exact(p: int, n: int):
        """``(y1, y2, y)`` as exact fractions."""
        return Fraction(p - 2, n), Fraction((p - 1) * (n - 1), n * n), Fraction(p, n)

    def with_degree(self, l: int) -> "ShiftedChebParams":
        return ShiftedChebParams(self.y1, self.y2, self.y, l)


def cheb_u(l, x):
    """``U_l(x)`` by the three-term recurrence; valid for every real ``x``."""
    if l < 0:
        raise DomainError("degree must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    prev, cur = np.ones_like(x), 2 * x
    if l == 0:
        out = prev
    else:
        for _ in range(l - 1):
            prev, cur = cur, 2 * x * cur - prev
        out = cur
    return float(out) if out.ndim == 0 else out


def cheb_u_trig_check(l, theta):
    """Return ``(U_l(cos theta) sin theta, sin((l + 1) theta))``."""
    s = math.sin(theta)
    if abs(s) <= 1e-8:
        raise DomainError(f"sin(theta) too close to zero at theta={theta}")
    return cheb_u(l, math.cos(theta)) * s, math.sin((l + 1) * theta)


def shifted_p(params: ShiftedChebParams, mu, l=None):
    """``p_l(mu)`` via ``p_{l+1} = (mu - y1) p_l - y2 p_{l-1}``."""
    l = params.l if l is None else l
    mu = np.asarray(mu, dtype=np.float64)
    prev, cur = np.ones_like(mu), mu.copy()
    if l == 0:
        out = prev
    else:
        for _ in range(l - 1):
            prev, cur = cur, (mu - params.y1) * cur - params.y2 * prev
        out = cur
    return float(out) if out.ndim == 0 else out


def shifted_p_via_cheb(params: ShiftedChebParams, mu, l=None):
    """Closed form of ``p_l`` through ``U_l`` and ``U_{l-1}``."""
    l = params.l if l is None else l
    if params.y2 <= 0:
        raise DomainError("y2 must be positive (p = 1 or n = 1 degenerates)")
    r = math.sqrt(params.y2)
    x = (np.asarray(mu, dtype=np.float64) - params.y1) / (2 * r)
    if l == 0:
        out = np.ones_like(x)
    else:
        out = params.y2 ** (l / 2) * cheb_u(l, x) + params.y1 * params.y2 ** ((l - 1) / 2) * cheb_u(l - 1, x)
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TraceSequence:
    """Normalised traces ``tau[l] = y^{-l/2} Tr T(l)`` for ``l = 0..L``."""

    tau: np.ndarray
    L: int
    params: ShiftedChebParams

    def traces(self) -> np.ndarray:
        """Unnormalised ``Tr T(l)``."""
        l = np.arange(self.L + 1)
        return self.tau * self.params.y ** (l / 2)


def _check_degree(L):
    if not 0 <= L <= MAX_DEGREE:
        raise DomainError(f"degree must lie in [0, {MAX_DEGREE}], got {L}")


def t_sequence(X, L: int) -> TraceSequence:
    """Traces of ``T(0..L)`` from the dense matrix recurrence.

    The recurrence is run on ``y^{-l/2} T(l)`` directly so large degrees do
    not overflow.
    """
    _check_degree(L)
    p, n = X.p, X.n
    params = ShiftedChebParams.from_dims(p, n, L)
    t = t_matrix(X)
    inv_sqrt_y = 1 / math.sqrt(params.y)
    shift = t - params.y1 * np.eye(p)
    tau = np.empty(L + 1)
    prev, cur = np.eye(p), t * inv_sqrt_y
    tau[0] = p
    if L >= 1:
        tau[1] = np.trace(t) * inv_sqrt_y
    for l in range(1, L):
        prev, cur = cur, inv_sqrt_y * (shift @ cur) - (params.y2 / params.y) * prev
        tau[l + 1] = np.trace(cur)
        if not abs(tau[l + 1]) <= TRACE_LIMIT:
            raise RangeError(f"normalised trace overflowed at l={l + 1}", reached=l + 1)
    return TraceSequence(tau, L, params)


def t_sequence_spectral(X, L: int, eigenvalues=None) -> TraceSequence:
    """Traces of ``T(0..L)`` as ``sum_i p_l(mu_i)`` over the spectrum of ``T``."""
    _check_degree(L)
    params = ShiftedChebParams.from_dims(X.p, X.n, L)
    mu = symmetric_eigenvalues(t_matrix(X), seed=X.seed) if eigenvalues is None else np.asarray(eigenvalues)
    inv_sqrt_y = 1 / math.sqrt(params.y)
    tau = np.empty(L + 1)
    prev, cur = np.ones_like(mu), mu * inv_sqrt_y
    tau[0] = len(mu)
    if L >= 1:
        tau[1] = cur.sum()
    for l in range(1, L):
        prev, cur = cur, inv_sqrt_y * (mu - params.y1) * cur - (params.y2 / params.y) * prev
        tau[l + 1] = cur.sum()
        if not abs(tau[l + 1]) <= TRACE_LIMIT:
            raise RangeError(f"normalised trace overflowed at l={l + 1}", reached=l + 1)
    return TraceSequence(tau, L, params)


def _even_degree(l):
    if l < 2 or l % 2:
        raise DomainError(f"bound is stated for even l >= 2, got {l}")


def bound_ch1(l: int, y: float) -> float:
    """Universal lower bound ``-2 l y^{l/2}`` on ``p_l``."""
    _even_degree(l)
    if not 0 < y <= 1:
        raise DomainError(f"y must lie in (0, 1], got {y}")
    return -2.0 * l * y ** (l / 2)


def bound_ch2(l: int, eps: float, params: ShiftedChebParams, C: float = 1.0) -> float:
    """Growth floor ``y2^{l/2} exp(l sqrt(eps) y2^{-1/4} / C)`` off the bulk."""
    _even_degree(l)
    if C <= 0:
        raise DomainError("C must be positive")
    if not 0 < eps <= 1:
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    if params.y2 <= 0:
        raise DomainError("y2 must be positive")
    if math.isinf(C):
        return params.y2 ** (l / 2)
    return params.y2 ** (l / 2) * math.exp(l * math.sqrt(eps) * params.y2 ** -0.25 / C)


def fit_ch2_constant(params: ShiftedChebParams, degrees, eps_grid, both_sides=True) -> float:
    """Smallest ``C`` for which the growth floor holds on the sample grid.

    Evaluates ``p_l`` at ``mu = y1 +- (2 sqrt(y2) + eps)``. Returns ``inf`` if
    some grid point has ``p_l(mu) <= y2^{l/2}``, where no constant works.
    """
    r = math.sqrt(params.y2)
    worst = 0.0
    for l in degrees:
        _even_degree(l)
        for eps in eps_grid:
            mus = [params.y1 + 2 * r + eps]
            if both_sides:
                mus.append(params.y1 - 2 * r - eps)
            for mu in mus:
                val = shifted_p(params, mu, l)
                ratio = val / params.y2 ** (l / 2)
                if not ratio > 1:
                    return math.inf
                need = l * math.sqrt(eps) * params.y2 ** -0.25 / math.log(ratio)
                worst = max(worst, need)
    return worst


def trgeq_condition(n: int, l: int, y: float, eps: float, C: float = 1.0) -> bool:
    """Admissibility ``C max(1/(sqrt(y) n), sqrt(y) log^2 n / l^2) <= eps <= 1``."""
    if l > n:
        raise DomainError(f"need l <= n, got l={l}, n={n}")
    if C <= 0:
        raise DomainError("C must be positive")
    floor = C * max(1 / (math.sqrt(y) * n), math.sqrt(y) * math.log(n) ** 2 / l**2)
    return 0 < eps and floor <= eps <= 1


def trgeq_bound(l: int, y: float, eps: float, C: float = 1.0) -> float:
    """Trace floor ``y^{l/2} exp(l sqrt(eps) y^{-1/4} / C)`` when an eigenvalue escapes."""
    return y ** (l / 2) * math.exp(l * math.sqrt(eps) * y**-0.25 / C)


def trace_upper_bound(l: int, y: float) -> float:
    """``l^10 y^{(l-5)/2}``, the expected-trace ceiling."""
    if not 0 < y <= 1:
        raise DomainError(f"y must lie in (0, 1], got {y}")
    return float(l) ** 10 * y ** ((l - 5) / 2)


def trace_bound_valid(l: int, y: float, n: int, C: float = 1.0) -> bool:
    """Whether ``l <= y^{5/12} n^{1/6} / C`` so the ceiling applies."""
    return l <= y ** (5 / 12) * n ** (1 / 6) / C * (1 + 1e-12)


def proof_degree(n: int, y: float, C: float = 1.0) -> int:
    """Degree ``2 floor(y^{5/12} n^{1/6} / (2C))`` used to convert traces into tails."""
    # relative slack absorbs rounding in the fractional powers
    return 2 * math.floor(y ** (5 / 12) * n ** (1 / 6) / (2 * C) * (1 + 1e-12))


def markov_tail(l: int, y: float, eps: float, C: float = 1.0) -> float:
    """Markov bound ``E Tr T(l) / trace floor`` on the outside-edges probability."""
    return trace_upper_bound(l, y) / trgeq_bound(l, y, eps, C)
