"""Spherical locality-sensitive filters for angular near-neighbor queries.

Filters are independent uniform unit vectors. A stored vector lands in the
bucket of every filter f with <v/|v|, f> >= alpha_u; a query t inspects every
bucket with <t/|t|, f> >= alpha_q. Exponents follow the standard spherical
LSF tradeoff for a list of (1/sin theta)^d points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DomainError, InputError

_EPS = 1e-12


@dataclass(frozen=True)
class NnsExponents:
    """Per-dimension base-2 exponents."""

    rho_q: float
    rho_u: float
    n_exponent: float

    @property
    def query_exponent(self) -> float:
        return self.rho_q

    @property
    def space_exponent(self) -> float:
        return self.n_exponent + self.rho_u


def _check_theta_u(theta: float, u: float):
    if not 0 < theta < math.pi / 2:
        raise DomainError(f"theta must lie in (0, pi/2), got {theta}")
    cos_t = math.cos(theta)
    if not cos_t * (1 - _EPS) <= u <= (1 / cos_t) * (1 + _EPS):
        raise DomainError(f"u={u} outside [cos theta, 1/cos theta] = [{cos_t}, {1 / cos_t}]")


def compute_exponents(theta: float, u: float) -> NnsExponents:
    _check_theta_u(theta, u)
    s2 = math.sin(theta) ** 2
    cos_t = math.cos(theta)
    denom_q = u * cos_t - math.cos(2 * theta)
    if denom_q <= 0:
        raise DomainError("u cos(theta) - cos(2 theta) must be positive")
    denom_u = 1 - (cos_t / math.sin(theta)) ** 2 * (u * u - 2 * u * cos_t + 1)
    if denom_u <= 0:
        raise DomainError("update exponent diverges at this u")
    rho_q = 0.5 * math.log2(s2 * (u * cos_t + 1) / denom_q)
    rho_u = 0.5 * math.log2(s2 / denom_u)
    return NnsExponents(rho_q, rho_u, -math.log2(math.sin(theta)))


@dataclass(frozen=True)
class LsfParams:
    theta: float
    u: float
    num_filters: int

    def __post_init__(self):
        _check_theta_u(self.theta, self.u)
        if int(self.num_filters) < 1:
            raise InputError("num_filters must be at least 1")
        object.__setattr__(self, "num_filters", int(self.num_filters))

    @property
    def alpha_u(self) -> float:
        return math.cos(self.theta)

    @property
    def alpha_q(self) -> float:
        return self.u * self.alpha_u

    def exponents(self) -> NnsExponents:
        return compute_exponents(self.theta, self.u)


# ---------------------------------------------------------------------------
# Cap and wedge masses on S^{d-1}


def cap_mass(d: int, alpha: float) -> float:
    """P(<x, f> >= alpha) for x, f uniform on the unit sphere in R^d."""
    if alpha <= -1:
        return 1.0
    if alpha >= 1:
        return 0.0
    half = 0.5 * special.betainc((d - 1) / 2, 0.5, 1 - alpha * alpha)
    return half if alpha >= 0 else 1 - half


def wedge_mass(d: int, theta: float, alpha_q: float, alpha_u: float) -> float:
    """P(<x, f> >= alpha_q and <y, f> >= alpha_u) for fixed x, y at angle theta.

    The projection of a uniform f onto span(x, y) has density
    (d-2)/(2 pi) (1 - a^2 - b^2)^((d-4)/2) on the unit disk; the inner
    integral over b reduces to a regularized incomplete beta function.
    """
    if d < 3:
        raise InputError("wedge mass needs d >= 3")
    m = (d - 4) / 2
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    # integral_z^1 (1 - x^2)^m dx as a fraction of the full half-range
    half_full = 0.5 * special.beta(0.5, m + 1)

    def inner(a):
        s2 = 1 - a * a
        if s2 <= 0:
            return 0.0
        s = math.sqrt(s2)
        z = (alpha_u - a * cos_t) / (sin_t * s)
        if z >= 1:
            return 0.0
        if z <= -1:
            tail = 2 * half_full
        elif z >= 0:
            tail = half_full * (1 - special.betainc(0.5, m + 1, z * z))
        else:
            tail = half_full * (1 + special.betainc(0.5, m + 1, z * z))
        return s ** (2 * m + 1) * tail

    lo = max(alpha_q, -1.0)
    val, _ = integrate.quad(inner, lo, 1.0, limit=200, epsabs=0, epsrel=1e-10)
    return (d - 2) / (2 * math.pi) * val


@lru_cache(maxsize=None)
def default_num_filters(d: int, theta: float, u: float, c: float = 3.0) -> int:
    """ceil(c / W): about c shared buckets for a pair at angle theta, so recall ~ 1 - e^-c."""
    alpha_u = math.cos(theta)
    w = wedge_mass(d, theta, u * alpha_u, alpha_u)
    return max(1, math.ceil(c / w))


# ---------------------------------------------------------------------------
# Index


class LsfIndex:
    """Bucketed filter index over stored vectors, keyed by caller ids.

    ``brute_force=True`` keeps the store but makes every query return all
    stored ids; it is the reference the filtered index is checked against.
    """

    def __init__(self, dimension: int, params: LsfParams, rng_seed: int = 0, brute_force: bool = False):
        self.dimension = int(dimension)
        self.params = params
        self.rng_seed = int(rng_seed)
        self.brute_force = brute_force
        if brute_force:
            self.filters = np.zeros((0, self.dimension))
        else:
            rng = np.random.default_rng(self.rng_seed)
            f = rng.standard_normal((params.num_filters, self.dimension))
            f /= np.linalg.norm(f, axis=1, keepdims=True)
            self.filters = f
        self.filters.setflags(write=False)
        self._filters32 = self.filters.astype(np.float32)
        self.buckets: list[set] = [set() for _ in range(self.filters.shape[0])]
        self.store: dict = {}
        self._memberships: dict = {}

    def __len__(self):
        return len(self.store)

    def __contains__(self, key):
        return key in self.store

    @staticmethod
    def _unit(vector) -> np.ndarray:
        v = np.asarray(vector, dtype=np.float64).reshape(-1)
        n = math.sqrt(float(v @ v))
        if n == 0:
            raise InputError("LSF index cannot hold or query the zero vector")
        return v / n

    def bucket_ids(self, vector) -> np.ndarray:
        """Filters whose update cap holds the vector."""
        if self.brute_force:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(self.filters @ self._unit(vector) >= self.params.alpha_u)

    def insert(self, key, vector, payload=None) -> LsfIndex:
        if key in self.store:
            self.remove(key)
        unit = self._unit(vector)
        members = self.bucket_ids(unit)
        for f in members:
            self.buckets[f].add(key)
        self.store[key] = (unit, payload)
        self._memberships[key] = members
        return self

    def insert_many(self, keys, vectors, chunk: int = 128) -> LsfIndex:
        """Insert rows of ``vectors`` under ``keys``; one matrix product per chunk of rows."""
        vectors = np.asarray(vectors, dtype=np.float64)
        keys = list(keys)
        if len(keys) != len(vectors):
            raise InputError("keys and vectors differ in length")
        for start in range(0, len(keys), chunk):
            units = np.array([self._unit(v) for v in vectors[start : start + chunk]])
            near = None
            if not self.brute_force:
                # single-precision screen, then the exact float64 test on the survivors
                near = units.astype(np.float32) @ self._filters32.T >= self.params.alpha_u - 1e-4
            for k, unit in enumerate(units):
                key = keys[start + k]
                if key in self.store:
                    self.remove(key)
                members = np.zeros(0, dtype=np.int64)
                if near is not None:
                    cand = np.flatnonzero(near[k])
                    members = cand[self.filters[cand] @ unit >= self.params.alpha_u]
                for f in members:
                    self.buckets[f].add(key)
                self.store[key] = (unit, None)
                self._memberships[key] = members
        return self

    def remove(self, key) -> LsfIndex:
        if key not in self.store:
            raise KeyError(f"id {key!r} not in index")
        for f in self._memberships.pop(key):
            self.buckets[f].discard(key)
        del self.store[key]
        return self

    def query_candidates(self, vector):
        """Yield each stored id sharing a query-cap filter with the target, once."""
        unit = self._unit(vector)
        if self.brute_force:
            yield from list(self.store)
            return
        hits = np.flatnonzero(self.filters @ unit >= self.params.alpha_q)
        seen = set()
        for f in hits:
            for key in self.buckets[f]:
                if key not in seen:
                    seen.add(key)
                    yield key

    def candidate_set(self, vector, both_signs: bool = False) -> set:
        """Ids sharing a query-cap filter with the target (or with its negation too)."""
        unit = self._unit(vector)
        if self.brute_force:
            return set(self.store)
        aq = self.params.alpha_q
        coarse = self._filters32 @ unit.astype(np.float32)
        near = np.flatnonzero((np.abs(coarse) if both_signs else coarse) >= aq - 1e-4)
        proj = self.filters[near] @ unit
        hits = near[(np.abs(proj) if both_signs else proj) >= aq]
        return set().union(*[self.buckets[f] for f in hits])

    def __eq__(self, other):
        if not isinstance(other, LsfIndex):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.params == other.params
            and self.brute_force == other.brute_force
            and np.array_equal(self.filters, other.filters)
            and self.buckets == other.buckets
            and self.store.keys() == other.store.keys()
            and all(np.array_equal(self.store[k][0], other.store[k][0]) for k in self.store)
        )


def build_index(dimension: int, params: LsfParams, rng_seed: int = 0, brute_force: bool = False) -> LsfIndex:
    return LsfIndex(dimension, params, rng_seed, brute_force)
