"""Lattice representation, Gram-Schmidt data, instance generation and sampling.

The integer layer (bases, coefficient vectors) is exact; the geometry layer
works in float64. Bases produced here have small integer entries, so lattice
vector coordinates are integers that float64 represents exactly.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError, SingularBasisError

#: relative tolerance for every norm comparison in the package
REL_TOL = 1e-9

MIN_RANDOM_DIM = 2
MAX_RANDOM_DIM = 60


def _exact_determinant(rows):
    """Bareiss fraction-free elimination on Python ints."""
    m = [[int(x) for x in row] for row in rows]
    n = len(m)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


@dataclass(frozen=True, eq=False)
class Basis:
    """Row basis b_1..b_d of a full-rank integer lattice."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
            raise InputError(f"basis must be a square matrix, got shape {rows.shape}")
        if rows.shape[0] < 2:
            raise InputError("basis dimension must be at least 2")
        if not np.issubdtype(rows.dtype, np.integer):
            if not np.all(np.isfinite(rows)) or np.any(rows != np.round(rows)):
                raise InputError("basis entries must be integers")
        rows = np.array(rows, dtype=np.int64)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        if self.determinant == 0:
            raise SingularBasisError("basis rows are linearly dependent")

    @property
    def dimension(self) -> int:
        return self.rows.shape[0]

    @cached_property
    def determinant(self) -> int:
        return _exact_determinant(self.rows.tolist())

    @cached_property
    def fingerprint(self) -> bytes:
        """SHA-256 over the canonical text serialization (row order kept)."""
        return hashlib.sha256(format_basis(self).encode()).digest()

    @cached_property
    def float_rows(self) -> np.ndarray:
        out = self.rows.astype(np.float64)
        out.setflags(write=False)
        return out

    def coords(self, coeffs) -> np.ndarray:
        """Coordinates of the lattice vector(s) with the given coefficients."""
        c = np.asarray(coeffs, dtype=np.int64)
        return (c @ self.rows).astype(np.float64)

    def vector(self, coeffs) -> LatticeVector:
        return LatticeVector.from_coeffs(self, coeffs)

    def scaled(self, factor: int) -> Basis:
        return Basis(self.rows * int(factor))

    def __eq__(self, other):
        return isinstance(other, Basis) and np.array_equal(self.rows, other.rows)

    def __hash__(self):
        return hash(self.fingerprint)


@dataclass(frozen=True, eq=False)
class LatticeVector:
    coeffs: np.ndarray
    coords: np.ndarray
    norm: float

    @classmethod
    def from_coeffs(cls, basis: Basis, coeffs) -> LatticeVector:
        c = np.array(coeffs, dtype=np.int64).reshape(-1)
        if c.shape[0] != basis.dimension:
            raise InputError("coefficient vector length does not match basis")
        x = basis.coords(c)
        c.setflags(write=False)
        x.setflags(write=False)
        return cls(c, x, float(np.sqrt(x @ x)))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def distance_to(self, target) -> float:
        diff = self.coords - np.asarray(target, dtype=np.float64)
        return float(np.sqrt(diff @ diff))

    def key(self) -> tuple:
        return tuple(int(x) for x in self.coeffs)

    def __eq__(self, other):
        return isinstance(other, LatticeVector) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.key())


def as_target(coords, dimension: int | None = None) -> np.ndarray:
    """Validate and copy a target vector."""
    t = np.array(coords, dtype=np.float64).reshape(-1)
    if dimension is not None and t.shape[0] != dimension:
        raise InputError(f"target has length {t.shape[0]}, expected {dimension}")
    if not np.all(np.isfinite(t)):
        raise InputError("target entries must be finite")
    t.setflags(write=False)
    return t


class Lambda1Source(str, enum.Enum):
    ENUMERATED = "enumerated"
    GAUSSIAN_HEURISTIC = "gaussian-heuristic"


@dataclass(frozen=True)
class Lambda1Estimate:
    value: float
    source: Lambda1Source

    def __post_init__(self):
        if not self.value > 0:
            raise InputError("lambda1 estimate must be positive")


def sign_canonical(coeffs: np.ndarray) -> np.ndarray:
    """Flip sign so that the first nonzero entry is positive (rowwise for 2-D)."""
    c = np.asarray(coeffs)
    if c.ndim == 1:
        nz = np.flatnonzero(c)
        return -c if nz.size and c[nz[0]] < 0 else c
    first = np.argmax(c != 0, axis=1)
    lead = c[np.arange(c.shape[0]), first]
    return np.where((lead < 0)[:, None], -c, c)


# ---------------------------------------------------------------------------
# Gram-Schmidt


@dataclass(frozen=True, eq=False)
class GramSchmidt:
    """b*_i as rows of ``bstar``; b_i = b*_i + sum_{j<i} mu[i, j] b*_j."""

    bstar: np.ndarray
    mu: np.ndarray
    sq_norms: np.ndarray = field(repr=False)

    @property
    def norms(self) -> np.ndarray:
        return np.sqrt(self.sq_norms)


def gram_schmidt(basis: Basis | np.ndarray) -> GramSchmidt:
    rows = basis.float_rows if isinstance(basis, Basis) else np.asarray(basis, dtype=np.float64)
    d = rows.shape[0]
    # Householder QR of B^T: b_i = sum_j R[j, i] q_j
    q, r = np.linalg.qr(rows.T)
    diag = np.diag(r)
    scale = np.max(np.abs(rows)) if rows.size else 1.0
    if np.any(np.abs(diag) <= 1e-12 * max(scale, 1.0)):
        raise SingularBasisError("basis is rank deficient")
    bstar = (q * diag).T
    mu = (r / diag[:, None]).T
    mu[np.diag_indices(d)] = 1.0
    mu = np.tril(mu)
    sq = diag**2
    for a in (bstar, mu, sq):
        a.setflags(write=False)
    return GramSchmidt(bstar, mu, sq)


def gaussian_heuristic_lambda1(basis: Basis) -> Lambda1Estimate:
    d = basis.dimension
    log_det = math.log(abs(basis.determinant))
    value = math.sqrt(d / (2 * math.pi * math.e)) * math.exp(log_det / d)
    return Lambda1Estimate(value, Lambda1Source.GAUSSIAN_HEURISTIC)


# ---------------------------------------------------------------------------
# Sampling


def sample_discrete_gaussian(rng: np.random.Generator, centers, sigmas, tail=8.0) -> np.ndarray:
    """Vectorized sampler for D_{Z, c, sigma} with density exp(-(z-c)^2 / 2 sigma^2)."""
    centers = np.asarray(centers, dtype=np.float64)
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=np.float64), centers.shape)
    out = np.empty(centers.shape, dtype=np.int64)

    narrow = sigmas < 1.0
    if np.any(narrow):
        # exact categorical draw over a window around the center
        c = centers[narrow]
        s = sigmas[narrow]
        half = int(math.ceil(tail * float(s.max()))) + 1
        offsets = np.arange(-half, half + 2)
        cand = np.floor(c)[:, None] + offsets[None, :]
        logw = -((cand - c[:, None]) ** 2) / (2 * s[:, None] ** 2)
        w = np.exp(logw - logw.max(axis=1, keepdims=True))
        cdf = np.cumsum(w, axis=1)
        u = rng.random(c.shape[0]) * cdf[:, -1]
        idx = (cdf < u[:, None]).sum(axis=1)
        out[narrow] = cand[np.arange(c.shape[0]), idx].astype(np.int64)

    wide = np.flatnonzero(~narrow)
    while wide.size:
        c = centers[wide]
        s = sigmas[wide]
        lo = np.floor(c - tail * s).astype(np.int64)
        hi = np.ceil(c + tail * s).astype(np.int64)
        z = rng.integers(lo, hi + 1)
        ok = rng.random(wide.size) < np.exp(-((z - c) ** 2) / (2 * s**2))
        out[wide[ok]] = z[ok]
        wide = wide[~ok]
    return out


def default_spread(basis: Basis, gso: GramSchmidt | None = None) -> float:
    gso = gso or gram_schmidt(basis)
    return float(gso.norms.max() * math.sqrt(basis.dimension))


class KleinSampler:
    """Randomized nearest-plane sampler.

    ``spread`` is the target expected norm of (v - center); each Gram-Schmidt
    direction gets standard deviation spread / sqrt(d). Directions with
    ||b*_i|| much larger than that degenerate to rounding, which is the usual
    Klein behavior on skewed bases.
    """

    def __init__(self, basis: Basis, spread: float | None = None, gso: GramSchmidt | None = None):
        if spread is not None and not spread > 0:
            raise InputError("spread must be positive")
        self.basis = basis
        self.gso = gso or gram_schmidt(basis)
        self.spread = float(spread) if spread is not None else default_spread(basis, self.gso)
        per_coord = self.spread / math.sqrt(basis.dimension)
        self.sigmas = per_coord / self.gso.norms

    def sample_coeffs(self, rng: np.random.Generator, n: int, center=None) -> np.ndarray:
        d = self.basis.dimension
        resid = np.zeros((n, d)) if center is None else np.tile(np.asarray(center, dtype=np.float64), (n, 1))
        rows = self.basis.float_rows
        bstar = self.gso.bstar
        sq = self.gso.sq_norms
        coeffs = np.zeros((n, d), dtype=np.int64)
        for i in range(d - 1, -1, -1):
            c = resid @ bstar[i] / sq[i]
            z = sample_discrete_gaussian(rng, c, self.sigmas[i])
            coeffs[:, i] = z
            resid -= z[:, None] * rows[i]
        return coeffs


def sample_lattice_vector(basis: Basis, rng_seed: int, spread: float | None = None, center=None) -> LatticeVector:
    rng = np.random.default_rng(rng_seed)
    coeffs = KleinSampler(basis, spread).sample_coeffs(rng, 1, center)[0]
    return LatticeVector.from_coeffs(basis, coeffs)


# ---------------------------------------------------------------------------
# Instances


def _primes_between(lo: int, hi: int) -> list[int]:
    sieve = bytearray([1]) * hi
    sieve[0:2] = b"\x00\x00"
    for i in range(2, int(hi**0.5) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(sieve[i * i :: i]))
    return [p for p in range(lo, hi) if sieve[p]]


_GM_PRIMES = _primes_between(2**10, 2**11)


def random_lattice(dimension: int, rng_seed: int) -> Basis:
    """Goldstein-Mayer style lattice with prime determinant p in [2^10, 2^11)."""
    if not MIN_RANDOM_DIM <= dimension <= MAX_RANDOM_DIM:
        raise InputError(f"dimension must lie in [{MIN_RANDOM_DIM}, {MAX_RANDOM_DIM}], got {dimension}")
    rng = np.random.default_rng(rng_seed)
    p = int(_GM_PRIMES[rng.integers(len(_GM_PRIMES))])
    rows = np.eye(dimension, dtype=np.int64)
    rows[0, 0] = p
    rows[1:, 0] = rng.integers(0, p, size=dimension - 1)
    return Basis(rows)


# ---------------------------------------------------------------------------
# Text formats


def format_basis(basis: Basis) -> str:
    lines = [str(basis.dimension)]
    lines += [" ".join(str(int(x)) for x in row) for row in basis.rows]
    return "\n".join(lines) + "\n"


def _content_lines(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        s = line.strip()
        if s and not s.startswith("#"):
            out.append(s)
    return out


def parse_basis(text: str) -> Basis:
    lines = _content_lines(text)
    if not lines:
        raise FormatError("empty basis file")
    try:
        d = int(lines[0])
        rows = [[int(tok) for tok in line.split()] for line in lines[1:]]
    except ValueError as exc:
        raise FormatError(f"non-integer entry in basis file: {exc}") from None
    if len(rows) != d or any(len(r) != d for r in rows):
        raise FormatError(f"expected {d} rows of {d} integers")
    return Basis(np.array(rows, dtype=np.int64))


def read_basis(path) -> Basis:
    return parse_basis(Path(path).read_text())


def write_basis(basis: Basis, path) -> None:
    Path(path).write_text(format_basis(basis))


def parse_targets(text: str, dimension: int | None = None) -> list[np.ndarray]:
    """One target per non-comment line."""
    targets = []
    for line in _content_lines(text):
        try:
            values = [float(tok) for tok in line.split()]
        except ValueError as exc:
            raise FormatError(f"bad target entry: {exc}") from None
        targets.append(as_target(values, dimension))
    if not targets:
        raise FormatError("no target vector found")
    return targets


def read_targets(path, dimension: int | None = None) -> list[np.ndarray]:
    return parse_targets(Path(path).read_text(), dimension)


def format_target(t) -> str:
    return " ".join(repr(float(x)) for x in np.asarray(t)) + "\n"
