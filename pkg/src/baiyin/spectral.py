"""Symmetric spectra, the Marchenko-Pastur law and ESD comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal, lapack, LinAlgError

from . import kernels
from .errors import DomainError, NumericFailure
from .randmat import covariance

RESIDUAL_CHECKS = 3


def _residual_check(m, c, tau, d, e, values, tol, scale, seed):
    dim = len(values)
    k = min(RESIDUAL_CHECKS, dim)
    picks = np.random.default_rng(dim).choice(dim, size=k, replace=False)
    for idx in sorted(int(i) for i in picks):
        lam, z = eigh_tridiagonal(d, e, select="i", select_range=(idx, idx))
        v = kernels.apply_reflectors(c, tau, np.ascontiguousarray(z))[:, 0]
        v /= np.linalg.norm(v)
        res = np.linalg.norm(m @ v - values[idx] * v)
        if not res <= tol * scale:
            raise NumericFailure(
                f"eigenpair {idx} residual {res:.3e} exceeds {tol * scale:.3e}", seed=seed
            )


def symmetric_eigenvalues(m, tol=None, seed=None, check=True):
    """All eigenvalues of a real symmetric matrix, ascending.

    Householder tridiagonalisation (LAPACK ``dsytrd``) followed by
    implicitly shifted QR on the tridiagonal matrix. Three eigenpairs are
    reconstructed through the stored reflectors and their residuals
    ``|Mv - lambda v|`` are required to stay below ``tol * |M|``.

    Parameters
    ----------
    m : (dim, dim) array_like
        Symmetric matrix.
    tol : float, optional
        Relative residual tolerance; defaults to ``1e-10 * dim``.
    seed : int, optional
        Seed of the generating sign matrix, quoted in error messages.
    check : bool
        Set to False to skip the residual spot-checks.

    Raises
    ------
    NumericFailure
        If LAPACK signals non-convergence or a residual check fails.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {m.shape}")
    dim = m.shape[0]
    if tol is None:
        tol = 1e-10 * dim
    if tol <= 0:
        raise DomainError("tol must be positive")
    if not np.all(np.isfinite(m)):
        raise NumericFailure("matrix has non-finite entries", seed=seed)
    if dim == 1:
        return m[0].copy()
    lwork = int(lapack.dsytrd_lwork(dim, lower=1)[0])
    c, d, e, tau, info = lapack.dsytrd(m, lower=1, lwork=max(lwork, 1))
    if info != 0:
        raise NumericFailure(f"dsytrd failed with info={info}", seed=seed)
    try:
        values = eigvalsh_tridiagonal(d, e)
    except LinAlgError as exc:
        raise NumericFailure(f"tridiagonal QR did not converge: {exc}", seed=seed) from exc
    if check:
        scale = max(abs(values[0]), abs(values[-1]), np.finfo(float).tiny)
        _residual_check(m, c, tau, d, e, values, tol, scale, seed)
    return values


@dataclass(frozen=True)
class SpectralSummary:
    eigenvalues: np.ndarray
    lambda_min: float
    lambda_max: float
    y: float
    a: float
    b: float

    @classmethod
    def from_eigenvalues(cls, eigenvalues, y: float) -> "SpectralSummary":
        ev = np.sort(np.asarray(eigenvalues, dtype=np.float64))
        a, b = mp_edges(y)
        return cls(ev, float(ev[0]), float(ev[-1]), y, a, b)


def spectral_summary(X, tol=None) -> SpectralSummary:
    """Spectrum of ``S = XX^T/n`` for a sign matrix ``X``."""
    s = covariance(X)
    p, n = s.shape[0], X.n
    ev = symmetric_eigenvalues(s, tol=tol, seed=getattr(X, "seed", None))
    return SpectralSummary.from_eigenvalues(ev, p / n)


def mp_edges(y):
    """Support ``((1 - sqrt y)^2, (1 + sqrt y)^2)`` of the MP law."""
    if not 0 < y <= 1:
        raise DomainError(f"aspect ratio must lie in (0, 1], got {y}")
    r = math.sqrt(y)
    return (1 - r) ** 2, (1 + r) ** 2


def mp_density(x, y):
    """Marchenko-Pastur density; zero outside ``[a, b]``. Vectorised in ``x``."""
    a, b = mp_edges(y)
    x = np.asarray(x, dtype=np.float64)
    inside = (x >= a) & (x <= b) & (x > 0)
    safe = np.where(inside, x, 1.0)
    val = np.sqrt(np.clip((safe - a) * (b - safe), 0.0, None)) / (2 * np.pi * y * safe)
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def _angle_integrand(theta, y):
    # x = 1 + y - 2 sqrt(y) cos(theta) maps [0, pi] onto [a, b]; the Jacobian
    # cancels both square-root endpoint singularities.
    r = math.sqrt(y)
    half = np.sin(theta / 2)
    x = (1 - r) ** 2 + 4 * r * half * half
    num = 4 * y * np.sin(theta) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        g = num / (2 * np.pi * y * x)
    if y == 1.0:
        # limit at theta = 0 when a = 0
        g = np.where(x == 0.0, 2 / np.pi, g)
    return g


def mp_cdf(x, y, quad_steps=4096):
    """MP distribution function by composite Simpson quadrature.

    The integral is taken in the angle variable of the substitution
    ``x = 1 + y - 2 sqrt(y) cos(theta)``, where the integrand is smooth, so
    the error is ``O(quad_steps**-4)``. Vectorised in ``x``.
    """
    if quad_steps < 16:
        raise DomainError("quad_steps must be at least 16")
    a, b = mp_edges(y)
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    steps = quad_steps + (quad_steps % 2)
    w = np.ones(steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    r = math.sqrt(y)
    out = np.empty(xs.shape)
    for idx, xv in enumerate(xs):
        if xv <= a:
            out[idx] = 0.0
            continue
        if xv >= b:
            top = np.pi
        else:
            top = math.acos(min(1.0, max(-1.0, (1 + y - xv) / (2 * r))))
        theta = np.linspace(0.0, top, steps + 1)
        h = top / steps
        out[idx] = min(1.0, max(0.0, h / 3 * float(w @ _angle_integrand(theta, y))))
    out = out.reshape(np.shape(x))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EsdCurve:
    points: np.ndarray
    cdf: np.ndarray


def esd(eigenvalues) -> EsdCurve:
    """Right-continuous ESD evaluated at its distinct jump points."""
    ev = np.sort(np.asarray(eigenvalues, dtype=np.float64))
    pts, counts = np.unique(ev, return_counts=True)
    return EsdCurve(pts, np.cumsum(counts) / len(ev))


def ks_distance(summary, y=None, quad_steps=4096):
    """Kolmogorov distance between the ESD and the MP distribution function.

    ``summary`` is a :class:`SpectralSummary` or a bare list of eigenvalues.
    The supremum is attained at a jump, so both one-sided limits of the ESD
    are compared at every distinct eigenvalue.
    """
    if isinstance(summary, SpectralSummary):
        ev = summary.eigenvalues
        y = summary.y if y is None else y
    else:
        ev = np.asarray(summary, dtype=np.float64)
    if ev.size == 0:
        raise DomainError("need at least one eigenvalue")
    curve = esd(ev)
    right = curve.cdf
    left = np.concatenate([[0.0], right[:-1]])
    f = np.atleast_1d(mp_cdf(curve.points, y, quad_steps))
    return float(max(np.abs(right - f).max(), np.abs(left - f).max()))
