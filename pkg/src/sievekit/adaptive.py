"""Adaptive CVP: a two-list Nguyen-Vidick sieve run around 0 and around t.

L0 holds short lattice vectors; Lt holds lattice vectors close to the target.
Each step combines L0 with itself and Lt with L0, so Lt never leaves the
lattice and its entries approach t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ListStarvationError
from .lattice import REL_TOL, Basis, KleinSampler, LatticeVector, as_target, gaussian_heuristic_lambda1
from .sieve import (SQRT_4_3, STARVATION_FACTOR, SieveList, SieveStepParams, _collect, _lsf_pair_hits,
                    _pair_hits, nv_initial_size, nv_sieve_step)

#: the run stops once R falls to this multiple of sqrt(4/3) * lambda1-estimate
STOP_SLACK = 1.02
#: initial radius relative to the longest initial sample
INITIAL_RADIUS_FACTOR = 1.5


class CosetList:
    """Lattice vectors tracked by their distance to a fixed target.

    Unlike SieveList, v and -v are different entries here.
    """

    def __init__(self, basis: Basis, target, coeffs=None):
        self.basis = basis
        self.target = as_target(target, basis.dimension)
        d = basis.dimension
        self.coeffs = np.zeros((0, d), dtype=np.int64)
        self.coords = np.zeros((0, d))
        self.sq_dists = np.zeros(0)
        if coeffs is not None:
            self.extend(coeffs)

    def __len__(self):
        return len(self.coeffs)

    def extend(self, coeffs, coords=None, cap: int | None = None):
        """Add rows, dropping exact duplicates; keep the ``cap`` closest overall."""
        coeffs = np.asarray(coeffs, dtype=np.int64).reshape(-1, self.basis.dimension)
        if coords is None:
            coords = self.basis.coords(coeffs)
        allc = np.vstack([self.coeffs, coeffs])
        allx = np.vstack([self.coords, coords])
        _, first = np.unique(allc, axis=0, return_index=True)
        first = np.sort(first)
        allc, allx = allc[first], allx[first]
        diff = allx - self.target
        sq = np.einsum("ij,ij->i", diff, diff)
        # closest first, ties by coefficient order
        order = np.lexsort(allc.T[::-1])
        order = order[np.argsort(sq[order], kind="stable")]
        if cap is not None:
            order = order[:cap]
        self.coeffs, self.coords, self.sq_dists = allc[order], allx[order], sq[order]
        return self

    def distances(self) -> np.ndarray:
        return np.sqrt(self.sq_dists)

    def offsets(self) -> np.ndarray:
        return self.coords - self.target

    def closest(self) -> LatticeVector | None:
        if not len(self):
            return None
        return LatticeVector.from_coeffs(self.basis, self.coeffs[0])


@dataclass
class TwoListState:
    list_zero: SieveList
    list_target: CosetList
    radius: float
    trace: list = field(default_factory=list)

    @property
    def target(self) -> np.ndarray:
        return self.list_target.target

    def check(self, tol: float = 1e-9) -> None:
        """Assert the state invariants (used by tests)."""
        r2 = self.radius**2 * (1 + REL_TOL)
        assert np.all(self.list_zero.sq_norms <= r2)
        assert np.all(self.list_target.sq_dists <= r2)
        recomputed = np.linalg.norm(self.list_target.basis.coords(self.list_target.coeffs) - self.target, axis=1)
        assert np.allclose(recomputed, self.list_target.distances(), rtol=0, atol=tol * max(1.0, self.radius))


@dataclass(frozen=True)
class CosetVector:
    vector: LatticeVector
    distance: float


def sample_coset_vector(basis: Basis, target, rng_seed: int, spread: float | None = None) -> CosetVector:
    """Klein sample centred at t: a lattice vector at distance about ``spread`` from t."""
    t = as_target(target, basis.dimension)
    rng = np.random.default_rng(rng_seed)
    c = KleinSampler(basis, spread).sample_coeffs(rng, 1, center=t)[0]
    v = LatticeVector.from_coeffs(basis, c)
    return CosetVector(v, v.distance_to(t))


def adaptive_sieve_step(state: TwoListState, gamma: float, *, use_lsf: bool = False,
                        cap: int | None = None, rng_seed: int = 0) -> TwoListState:
    """Shrink both lists to radius gamma * R (or less, if every entry is shorter).

    L0' collects w1 -/+ w2 from L0 x L0 with norm <= gamma R; Lt' collects
    w1 -/+ w2 from Lt x L0 with distance to t <= gamma R.
    """
    params = SieveStepParams(gamma, state.radius)
    new_r = gamma * state.radius
    bound_sq = new_r**2 * (1 + REL_TOL)
    l0, lt = state.list_zero, state.list_target
    new_zero = nv_sieve_step(l0, params, use_lsf=use_lsf, cap=cap, rng_seed=rng_seed)
    new_target = CosetList(lt.basis, lt.target)
    if len(lt) and len(l0):
        off = lt.offsets()
        if use_lsf:
            i, j, s = _lsf_pair_hits(off, l0.coords, bound_sq, False, math.pi / 3, rng_seed + 1)
        else:
            i, j, s = _pair_hits(off, lt.sq_dists, l0.coords, l0.sq_norms, bound_sq, False)
        new_target.extend(lt.coeffs[i] - s[:, None] * l0.coeffs[j],
                          lt.coords[i] - s[:, None] * l0.coords[j], cap=cap)
    # as in the NV sieve, R also drops to the longest surviving entry
    longest = max(float(np.sqrt(new_zero.sq_norms.max())) if len(new_zero) else 0.0,
                  float(new_target.distances().max()) if len(new_target) else 0.0)
    return TwoListState(new_zero, new_target, min(new_r, max(longest, 1e-12)), list(state.trace))


def initial_state(basis: Basis, target, rng_seed: int = 0, *, list_exponent: float = 0.21,
                  offset: float = 4.0, spread: float | None = None) -> TwoListState:
    d = basis.dimension
    t = as_target(target, d)
    n0 = nv_initial_size(d, list_exponent, offset)
    if spread is None:
        spread = 2 ** (0.1 * d) * gaussian_heuristic_lambda1(basis).value
    rng = np.random.default_rng(rng_seed)
    klein = KleinSampler(basis, spread)
    c0 = klein.sample_coeffs(rng, n0)
    ct = klein.sample_coeffs(rng, n0, center=t)
    l0 = _collect(basis, c0, basis.coords(c0), None)
    lt = CosetList(basis, t, ct)
    longest = max(float(np.sqrt(l0.sq_norms.max())) if len(l0) else 0.0,
                  float(lt.distances().max()) if len(lt) else 0.0)
    return TwoListState(l0, lt, INITIAL_RADIUS_FACTOR * max(longest, 1e-12))


def solve_cvp_adaptive(basis: Basis, target, rng_seed: int = 0, *, gamma: float = 0.97,
                       use_lsf: bool = False, list_exponent: float = 0.21, spread: float | None = None,
                       progress=None, max_iterations: int = 10_000) -> LatticeVector:
    """Closest Lt entry seen once R reaches the sqrt(4/3) * lambda1 floor.

    Telemetry (trace, peak list sizes, pair checks) is attached as
    ``solve_cvp_adaptive.last_run`` for the CLI and experiments.
    """
    t = as_target(target, basis.dimension)
    lam = gaussian_heuristic_lambda1(basis).value
    stop = SQRT_4_3 * lam * STOP_SLACK
    rng = np.random.default_rng(rng_seed)
    state = initial_state(basis, t, int(rng.integers(2**62)), list_exponent=list_exponent, spread=spread)
    cap = max(len(state.list_zero), len(state.list_target))
    best_c, best_sq = None, math.inf
    peak0 = peakt = 0
    pairs = 0
    it = 0
    while True:
        lt = state.list_target
        if len(lt) and lt.sq_dists[0] < best_sq * (1 - REL_TOL):
            best_c, best_sq = lt.coeffs[0].copy(), float(lt.sq_dists[0])
        peak0, peakt = max(peak0, len(state.list_zero)), max(peakt, len(lt))
        rec = {"iteration": it, "radius": state.radius, "list_zero": len(state.list_zero),
               "list_target": len(lt), "best_distance": math.sqrt(best_sq)}
        state.trace.append(rec)
        if progress:
            progress(rec)
        if state.radius <= stop or it >= max_iterations:
            break
        if len(state.list_zero) < 2 or not len(lt):
            if state.radius > STARVATION_FACTOR * stop:
                raise ListStarvationError(
                    f"adaptive lists starved at radius {state.radius:.4g} (floor {stop:.4g})", state.trace)
            break
        pairs += len(state.list_zero) ** 2 // 2 + len(state.list_zero) * len(lt)
        state = adaptive_sieve_step(state, gamma, use_lsf=use_lsf, cap=cap, rng_seed=int(rng.integers(2**62)))
        it += 1
    solve_cvp_adaptive.last_run = {
        "iterations": it, "trace": state.trace, "peak_list_zero": peak0, "peak_list_target": peakt,
        "pair_checks": pairs, "initial_size": cap, "stop_radius": stop,
    }
    if best_c is None:
        raise ListStarvationError("target list was empty from the start", state.trace)
    return LatticeVector.from_coeffs(basis, best_c)


solve_cvp_adaptive.last_run = None
