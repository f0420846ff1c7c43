"""Shortest-vector sieves: quadratic Nguyen-Vidick, GaussSieve, relaxed GaussSieve.

Lists are sets modulo sign: a vector and its negation share one dedupe key,
so every pair test considers both w1 - w2 and w1 + w2.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError, ListStarvationError
from .lattice import REL_TOL, Basis, KleinSampler, LatticeVector, gaussian_heuristic_lambda1, sign_canonical
from .lsf import LsfIndex, LsfParams, default_num_filters

SQRT_4_3 = math.sqrt(4 / 3)

#: NV starvation: the list died while its radius was still above this many
#: multiples of sqrt(4/3) * lambda1-estimate
STARVATION_FACTOR = 2.0


class SieveList:
    """Growable store of lattice vectors with norm bookkeeping.

    Every entry has a stable integer id (used by LSF indexes). Removal swaps
    the last row into the hole, so row order is not insertion order.
    """

    def __init__(self, basis: Basis, capacity: int = 256):
        self.basis = basis
        d = basis.dimension
        self._coeffs = np.zeros((capacity, d), dtype=np.int64)
        self._coords = np.zeros((capacity, d))
        self._sq = np.zeros(capacity)
        self._ids = np.zeros(capacity, dtype=np.int64)
        self._n = 0
        self._next_id = 0
        self._row_of: dict[int, int] = {}
        self._keys: dict[bytes, int] = {}
        self.meta: dict = {}

    @classmethod
    def from_coeffs(cls, basis: Basis, coeffs) -> SieveList:
        coeffs = np.asarray(coeffs, dtype=np.int64).reshape(-1, basis.dimension)
        out = cls(basis, capacity=max(16, len(coeffs)))
        coords = basis.coords(coeffs)
        for c, x in zip(coeffs, coords):
            out.add(c, x)
        return out

    def __len__(self):
        return self._n

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs[: self._n]

    @property
    def coords(self) -> np.ndarray:
        return self._coords[: self._n]

    @property
    def sq_norms(self) -> np.ndarray:
        return self._sq[: self._n]

    @property
    def ids(self) -> np.ndarray:
        return self._ids[: self._n]

    def norms(self) -> np.ndarray:
        return np.sqrt(self.sq_norms)

    @staticmethod
    def key_of(coeffs) -> bytes:
        return np.ascontiguousarray(sign_canonical(np.asarray(coeffs, dtype=np.int64))).tobytes()

    def __contains__(self, coeffs) -> bool:
        return self.key_of(coeffs) in self._keys

    def _grow(self):
        cap = self._coeffs.shape[0] * 2
        for name in ("_coeffs", "_coords", "_sq", "_ids"):
            old = getattr(self, name)
            new = np.zeros((cap,) + old.shape[1:], dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)

    def add(self, coeffs, coords=None) -> int | None:
        """Insert unless zero or already present (up to sign); return the new id."""
        coeffs = np.asarray(coeffs, dtype=np.int64)
        if not coeffs.any():
            return None
        key = self.key_of(coeffs)
        if key in self._keys:
            return None
        if self._n == self._coeffs.shape[0]:
            self._grow()
        if coords is None:
            coords = self.basis.coords(coeffs)
        i = self._n
        self._coeffs[i] = coeffs
        self._coords[i] = coords
        self._sq[i] = float(coords @ coords)
        vid = self._next_id
        self._next_id += 1
        self._ids[i] = vid
        self._row_of[vid] = i
        self._keys[key] = vid
        self._n += 1
        return vid

    def row(self, vid: int) -> int:
        return self._row_of[vid]

    def pop_row(self, i: int):
        """Remove row i, returning (coeffs, coords, id)."""
        if not 0 <= i < self._n:
            raise IndexError(i)
        c = self._coeffs[i].copy()
        x = self._coords[i].copy()
        vid = int(self._ids[i])
        last = self._n - 1
        if i != last:
            self._coeffs[i] = self._coeffs[last]
            self._coords[i] = self._coords[last]
            self._sq[i] = self._sq[last]
            self._ids[i] = self._ids[last]
            self._row_of[int(self._ids[i])] = i
        self._n = last
        del self._row_of[vid]
        del self._keys[self.key_of(c)]
        return c, x, vid

    def vector(self, i: int) -> LatticeVector:
        return LatticeVector.from_coeffs(self.basis, self._coeffs[i])

    def vectors(self) -> list[LatticeVector]:
        return [self.vector(i) for i in range(self._n)]

    def shortest(self) -> LatticeVector | None:
        if not self._n:
            return None
        sq = self.sq_norms
        # deterministic among ties: smallest canonical coefficient tuple
        ties = np.flatnonzero(sq <= sq.min() * (1 + REL_TOL))
        keys = [tuple(sign_canonical(self._coeffs[i]).tolist()) for i in ties]
        best = ties[keys.index(min(keys))]
        return LatticeVector.from_coeffs(self.basis, sign_canonical(self._coeffs[best]))

    def min_norm(self) -> float:
        return float(np.sqrt(self.sq_norms.min())) if self._n else math.inf

    def key_set(self) -> set:
        return set(self._keys)

    def copy(self) -> SieveList:
        out = SieveList(self.basis, capacity=max(16, self._n))
        for c, x in zip(self.coeffs, self.coords):
            out.add(c, x)
        out.meta = dict(self.meta)
        return out


# ---------------------------------------------------------------------------
# Nguyen-Vidick


@dataclass(frozen=True)
class SieveStepParams:
    gamma: float
    max_norm: float

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.max_norm > 0:
            raise DomainError("max_norm must be positive")


def _pair_hits(coords_a, sq_a, coords_b, sq_b, bound_sq, same, chunk=1024):
    """All (i, j, s) with ||a_i - s b_j||^2 <= bound_sq, s in {+1, -1}.

    With ``same`` only i < j is reported.
    """
    out_i, out_j, out_s = [], [], []
    for start in range(0, len(coords_a), chunk):
        a = coords_a[start : start + chunk]
        g = a @ coords_b.T
        base = sq_a[start : start + chunk, None] + sq_b[None, :]
        for sign in (1, -1):
            dist = base - 2 * sign * g
            mask = dist <= bound_sq
            if same:
                rows = np.arange(start, start + len(a))[:, None]
                mask &= rows < np.arange(len(coords_b))[None, :]
            ii, jj = np.nonzero(mask)
            out_i.append(ii + start)
            out_j.append(jj)
            out_s.append(np.full(ii.shape, sign, dtype=np.int64))
    if not out_i:
        return (np.zeros(0, dtype=np.int64),) * 3
    return np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_s)


def _lsf_pair_hits(coords_a, coords_b, bound_sq, same, theta, rng_seed):
    """Candidate pairs from a filter index over b, exact-rechecked."""
    d = coords_b.shape[1]
    params = LsfParams(theta, 1.0, default_num_filters(d, theta, 1.0))
    index = LsfIndex(d, params, rng_seed)
    nonzero = np.flatnonzero(np.any(coords_b != 0, axis=1))
    index.insert_many(nonzero.tolist(), coords_b[nonzero])
    out = []
    for i, a in enumerate(coords_a):
        if not np.any(a):
            continue
        for sign in (1, -1):
            for j in sorted(index.candidate_set(sign * a)):
                if same and not i < j:
                    continue
                diff = a - sign * coords_b[j]
                if diff @ diff <= bound_sq:
                    out.append((i, j, sign))
    if not out:
        return (np.zeros(0, dtype=np.int64),) * 3
    arr = np.array(sorted(set(out)), dtype=np.int64)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _collect(basis, coeffs, coords, cap):
    """Deduplicated SieveList of the given rows, shortest first, at most ``cap``."""
    sq = np.einsum("ij,ij->i", coords, coords)
    nz = sq > 0
    coeffs, coords, sq = coeffs[nz], coords[nz], sq[nz]
    canon = sign_canonical(coeffs)
    order = np.lexsort(canon.T[::-1])
    order = order[np.argsort(sq[order], kind="stable")]
    out = SieveList(basis, capacity=max(16, min(len(order), cap or len(order))))
    for k in order:
        if cap is not None and len(out) >= cap:
            break
        out.add(coeffs[k], coords[k])
    return out


def nv_sieve_step(lst: SieveList, params: SieveStepParams, use_lsf: bool = False,
                  cap: int | None = None, rng_seed: int = 0) -> SieveList:
    """One quadratic sieve pass: keep every w1 -/+ w2 of norm <= gamma R.

    ``cap`` bounds the output size (the shortest differences are kept).
    """
    if len(lst) == 0:
        return SieveList(lst.basis)
    if np.any(lst.sq_norms > params.max_norm**2 * (1 + REL_TOL)):
        raise InputError("input list has vectors longer than max_norm")
    bound_sq = (params.gamma * params.max_norm) ** 2 * (1 + REL_TOL)
    if use_lsf:
        i, j, s = _lsf_pair_hits(lst.coords, lst.coords, bound_sq, True, math.pi / 3, rng_seed)
    else:
        i, j, s = _pair_hits(lst.coords, lst.sq_norms, lst.coords, lst.sq_norms, bound_sq, True)
    coeffs = lst.coeffs[i] - s[:, None] * lst.coeffs[j]
    coords = lst.coords[i] - s[:, None] * lst.coords[j]
    return _collect(lst.basis, coeffs, coords, cap)


def nv_initial_size(d: int, exponent: float = 0.21, offset: float = 4.0) -> int:
    return int(math.ceil(2 ** (exponent * d + offset)))


def run_nv_sieve(basis: Basis, initial_list_exponent: float = 0.21, gamma: float = 0.97,
                 rng_seed: int = 0, *, offset: float = 4.0, spread: float | None = None,
                 use_lsf: bool = False, progress=None, max_iterations: int = 10_000) -> SieveList:
    """Iterate the quadratic sieve from a Klein-sampled list until it dies out.

    The returned list is the last nonempty one, plus the shortest vector seen
    over all iterations; ``meta`` holds the trace and the shortest vector.
    """
    if initial_list_exponent < 0.5 * math.log2(4 / 3) - 1e-12:
        raise DomainError("initial list exponent must be at least log2(sqrt(4/3))")
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    d = basis.dimension
    lam = gaussian_heuristic_lambda1(basis).value
    if spread is None:
        spread = 2 ** (0.1 * d) * lam
    n0 = nv_initial_size(d, initial_list_exponent, offset)
    rng = np.random.default_rng(rng_seed)
    sampler = KleinSampler(basis, spread)
    coeffs = sampler.sample_coeffs(rng, n0)
    lst = _collect(basis, coeffs, basis.coords(coeffs), None)
    radius = float(np.sqrt(lst.sq_norms.max()))
    best = lst.shortest()
    trace = []
    last = lst
    it = 0
    while len(lst) >= 2 and it < max_iterations:
        rec = {"iteration": it, "list_size": len(lst), "radius": radius, "min_norm": lst.min_norm()}
        trace.append(rec)
        if progress:
            progress(rec)
        nxt = nv_sieve_step(lst, SieveStepParams(gamma, radius), use_lsf=use_lsf, cap=n0,
                            rng_seed=int(rng.integers(2**62)))
        it += 1
        if len(nxt) == 0:
            break
        lst = last = nxt
        cand = lst.shortest()
        if cand.norm < best.norm * (1 - REL_TOL):
            best = cand
        radius = min(gamma * radius, float(np.sqrt(lst.sq_norms.max())))
    if radius > STARVATION_FACTOR * SQRT_4_3 * lam:
        raise ListStarvationError(
            f"list starved at radius {radius:.4g} (lambda1 estimate {lam:.4g})", trace)
    out = last.copy()
    out.add(best.coeffs, best.coords)
    out.meta.update(trace=trace, shortest=best, initial_size=n0, iterations=it,
                    peak_list_size=max(r["list_size"] for r in trace) if trace else len(out))
    return out


# ---------------------------------------------------------------------------
# GaussSieve


@dataclass(frozen=True)
class TerminationRule:
    """Stop on collisions >= max(min_collisions, collision_fraction * |L|)
    or once ``max_samples`` fresh samples have been drawn."""

    min_collisions: int = 100
    collision_fraction: float = 0.1
    max_samples: int | None = None
    sample_exponent: float = 0.25
    sample_offset: float = 8.0

    def sample_budget(self, d: int) -> int:
        if self.max_samples is not None:
            return int(self.max_samples)
        return int(2 ** (self.sample_exponent * d + self.sample_offset))

    def saturated(self, collisions: int, list_size: int) -> bool:
        return collisions >= max(self.min_collisions, self.collision_fraction * list_size)


def reduction_threshold(alpha: float) -> float:
    """Factor c(alpha) in ||v - w||^2 <= c ||v||^2, i.e. angle below arcsin(1/alpha)."""
    if alpha < 1:
        raise DomainError(f"alpha must be >= 1, got {alpha}")
    return 2 - (2 / alpha) * math.sqrt(alpha * alpha - 1)


def sieve_spread(basis: Basis) -> float:
    """Default Klein spread for GaussSieve samples: a few lambda1-estimates."""
    return 2 ** (0.1 * basis.dimension) * gaussian_heuristic_lambda1(basis).value


class _Sampler:
    def __init__(self, basis, spread, rng, batch=256):
        self.klein = KleinSampler(basis, spread)
        self.rng = rng
        self.batch = batch
        self.buf = np.zeros((0, basis.dimension), dtype=np.int64)
        self.pos = 0
        self.basis = basis

    def next(self):
        if self.pos == len(self.buf):
            self.buf = self.klein.sample_coeffs(self.rng, self.batch)
            self.pos = 0
        c = self.buf[self.pos]
        self.pos += 1
        return c.copy(), self.basis.coords(c)


class _Neighbors:
    """Candidate lookup over the live list: full scan, or an LSF index."""

    def __init__(self, lst: SieveList, theta: float | None, rng_seed: int):
        self.lst = lst
        self.index = None
        if theta is not None:
            d = lst.basis.dimension
            params = LsfParams(theta, 1.0, default_num_filters(d, theta, 1.0))
            self.index = LsfIndex(d, params, rng_seed)

    def rows(self, v):
        if self.index is None:
            return None
        ids = self.index.candidate_set(v, both_signs=True)
        return np.sort(np.fromiter(map(self.lst.row, ids), dtype=np.int64, count=len(ids)))

    def added(self, vid, x):
        if self.index is not None:
            self.index.insert(vid, x)

    def removed(self, vid):
        if self.index is not None:
            self.index.remove(vid)


def _gauss_core(basis: Basis, c: float, termination: TerminationRule, rng_seed: int,
                spread: float | None, use_lsf: bool, progress, progress_every: int = 1000):
    d = basis.dimension
    rng = np.random.default_rng(rng_seed)
    sampler = _Sampler(basis, spread if spread is not None else sieve_spread(basis), rng)
    lst = SieveList(basis, capacity=1024)
    theta = math.acos(1 - c / 2) if use_lsf else None
    nbrs = _Neighbors(lst, theta, int(rng.integers(2**62)))
    stack: list = []
    samples = collisions = iterations = 0
    budget = termination.sample_budget(d)
    certified = True
    # v reducible by s*w iff 2|<v,w>| - ||w||^2 >= (1 - c)||v||^2 + slack
    while True:
        if termination.saturated(collisions, len(lst)):
            break
        if stack:
            vc, vx = stack.pop()
        else:
            if samples >= budget:
                certified = False
                break
            vc, vx = sampler.next()
            samples += 1
        iterations += 1
        if progress and iterations % progress_every == 0:
            progress({"iteration": iterations, "list_size": len(lst), "min_norm": lst.min_norm(),
                      "collisions": collisions, "samples": samples})

        vv = float(vx @ vx)
        while vv > 0 and len(lst):
            rows = nbrs.rows(vx)
            coords = lst.coords if rows is None else lst.coords[rows]
            if len(coords) == 0:
                break
            dots = coords @ vx
            sq = lst.sq_norms if rows is None else lst.sq_norms[rows]
            gain = 2 * np.abs(dots) - sq
            need = (1 - c) * vv + REL_TOL * vv
            k = int(np.argmax(gain))
            if gain[k] < need:
                break
            r = k if rows is None else int(rows[k])
            s = 1 if dots[k] > 0 else -1
            vc = vc - s * lst.coeffs[r]
            vx = vx - s * lst.coords[r]
            vv = float(vx @ vx)
        if vv == 0 or not vc.any():
            collisions += 1
            continue

        if len(lst):
            rows = nbrs.rows(vx)
            allrows = np.arange(len(lst)) if rows is None else rows
            if len(allrows):
                dots = lst.coords[allrows] @ vx
                sq = lst.sq_norms[allrows]
                hit = 2 * np.abs(dots) - vv >= (1 - c) * sq + REL_TOL * sq
                victims = allrows[hit]
                signs = np.where(dots[hit] > 0, 1, -1)
                vids = lst.ids[victims].copy()
                for vid, s in zip(vids, signs):
                    wc, wx, _ = lst.pop_row(lst.row(int(vid)))
                    nbrs.removed(int(vid))
                    wc = wc - s * vc
                    wx = wx - s * vx
                    if wc.any():
                        stack.append((wc, wx))
                    else:
                        collisions += 1
        vid = lst.add(vc, vx)
        if vid is None:
            collisions += 1
        else:
            nbrs.added(vid, vx)

    lst.meta.update(samples=samples, collisions=collisions, iterations=iterations,
                    certified=certified, reduction_factor=c, lsf=use_lsf)
    return lst


def gauss_sieve(basis: Basis, termination: TerminationRule | None = None, rng_seed: int = 0, *,
                spread: float | None = None, use_lsf: bool = False, progress=None):
    """Return (shortest list vector, pairwise-reduced list)."""
    lst = _gauss_core(basis, 1.0, termination or TerminationRule(), rng_seed, spread, use_lsf, progress)
    return lst.shortest(), lst


def relaxed_gauss_sieve(basis: Basis, alpha: float, termination: TerminationRule | None = None,
                        rng_seed: int = 0, *, spread: float | None = None, use_lsf: bool = False,
                        progress=None) -> SieveList:
    """GaussSieve reducing only pairs at angle below arcsin(1/alpha0), alpha0 = max(alpha, sqrt(4/3))."""
    if alpha < 1:
        raise DomainError(f"alpha must be >= 1, got {alpha}")
    alpha0 = max(alpha, SQRT_4_3)
    c = 1.0 if alpha0 == SQRT_4_3 else reduction_threshold(alpha0)
    lst = _gauss_core(basis, c, termination or TerminationRule(), rng_seed, spread, use_lsf, progress)
    lst.meta["alpha"] = alpha
    lst.meta["alpha0"] = alpha0
    return lst


def json_progress(stream=None):
    stream = stream or sys.stderr

    def emit(record):
        stream.write(json.dumps(record, default=float) + "\n")

    return emit


def pairwise_violations(lst: SieveList, c: float = 1.0, tol: float = 1e-9) -> int:
    """Number of pairs (i, j) where one reduces the other under factor c."""
    x = lst.coords
    sq = lst.sq_norms
    g = np.abs(x @ x.T)
    dist = sq[:, None] + sq[None, :] - 2 * g
    bad = dist < c * np.maximum(sq[:, None], sq[None, :]) - tol * np.maximum(sq[:, None], 1)
    np.fill_diagonal(bad, False)
    return int(bad.sum() // 2)
