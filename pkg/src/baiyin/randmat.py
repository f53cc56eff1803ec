"""Bernoulli sign matrices and the matrices S = XX^T/n and T = S - I.

Entries come from a counter-based splitmix64 stream: word ``w`` of the stream
is ``mix64(seed + (w + 1) * 0x9E3779B97F4A7C15)`` and supplies 64 consecutive
row-major entries, least significant bit first, a set bit meaning +1. The
stream is fully specified by this docstring, so a matrix can be regenerated
from ``(p, n, seed)`` by any implementation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError

GENERATOR_ID = "splitmix64-signbits/v1"
MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_TRIAL_DOMAIN = 0x5452_4941_4C53_3634  # "TRIALS64"

MAGIC = b"SGNM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBQQQ")


def mix64(z: int) -> int:
    """splitmix64 finaliser on a Python integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Seed for job ``index`` of a batch keyed by ``master_seed``.

    ``mix64(mix64(master ^ DOMAIN) + (index + 1) * GAMMA)``. Depends only on
    the pair, so batches can be split across workers in any order.
    """
    base = mix64((master_seed & MASK64) ^ _TRIAL_DOMAIN)
    return mix64(base + (index + 1) * _GAMMA)


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


@dataclass(frozen=True)
class SignMatrix:
    """A p x n matrix of +-1 entries together with the seed that produced it."""

    p: int
    n: int
    seed: int
    entries: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        if self.p < 1 or self.n < 1:
            raise DimensionError(f"sign matrix needs p, n >= 1, got {self.p}x{self.n}")
        ent = np.ascontiguousarray(self.entries, dtype=np.int8)
        if ent.shape != (self.p, self.n):
            raise DimensionError(f"entries have shape {ent.shape}, expected {(self.p, self.n)}")
        if not np.all(np.abs(ent) == 1):
            raise ValueError("sign matrix entries must be -1 or +1")
        ent.flags.writeable = False
        object.__setattr__(self, "entries", ent)
        object.__setattr__(self, "seed", _check_seed(self.seed))

    def __eq__(self, other):
        if not isinstance(other, SignMatrix):
            return NotImplemented
        return (self.p, self.n, self.seed) == (other.p, other.n, other.seed) and bool(
            np.array_equal(self.entries, other.entries)
        )

    __hash__ = None

    @classmethod
    def from_entries(cls, entries, seed: int = 0) -> "SignMatrix":
        ent = np.asarray(entries)
        if ent.ndim != 2:
            raise DimensionError("entries must be two-dimensional")
        return cls(ent.shape[0], ent.shape[1], seed, ent)

    @property
    def y(self) -> float:
        return self.p / self.n

    def to_bytes(self) -> bytes:
        """Binary dump: ``SGNM``, version byte, p, n, seed (u64 LE), int8 entries."""
        return _HEADER.pack(MAGIC, FORMAT_VERSION, self.p, self.n, self.seed) + self.entries.tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SignMatrix":
        if len(blob) < _HEADER.size:
            raise ValueError("truncated sign-matrix header")
        magic, version, p, n, seed = _HEADER.unpack_from(blob)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported sign-matrix format version {version}")
        body = blob[_HEADER.size:]
        if len(body) != p * n:
            raise ValueError(f"expected {p * n} entry bytes, found {len(body)}")
        entries = np.frombuffer(body, dtype=np.int8).reshape(p, n)
        return cls(p, n, seed, entries)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "SignMatrix":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def gen_sign_matrix(p: int, n: int, seed: int) -> SignMatrix:
    """Generate a p x n matrix of independent fair signs from ``seed``."""
    if p < 1 or n < 1:
        raise DimensionError(f"sign matrix needs p, n >= 1, got {p}x{n}")
    seed = _check_seed(seed)
    flat = kernels.sign_stream(np.uint64(seed), p * n)
    return SignMatrix(p, n, seed, flat.reshape(p, n))


def _as_entries(X):
    if isinstance(X, SignMatrix):
        return X.entries
    ent = np.asarray(X)
    if ent.ndim != 2:
        raise DimensionError("expected a two-dimensional sign matrix")
    return ent


def gram(X) -> np.ndarray:
    """Integer Gram matrix ``X X^T`` held in float64.

    Products of +-1 and their partial sums are integers below 2**53, so BLAS
    accumulation is exact regardless of summation order.
    """
    ent = _as_entries(X).astype(np.float64)
    g = ent @ ent.T
    # mirror one triangle so symmetry is structural, not numerical
    iu = np.triu_indices(g.shape[0], 1)
    g[(iu[1], iu[0])] = g[iu]
    return g


def covariance(X) -> np.ndarray:
    """``S = X X^T / n``; the diagonal is exactly one."""
    ent = _as_entries(X)
    return gram(ent) / ent.shape[1]


def t_matrix(X) -> np.ndarray:
    """``T = S - I``, with an identically zero diagonal."""
    s = covariance(X)
    np.fill_diagonal(s, 0.0)
    return s
