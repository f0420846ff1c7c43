"""Exact SVP/CVP by Schnorr-Euchner enumeration (ground-truth oracles)."""

from __future__ import annotations

import math

import numpy as np

from .errors import EmptyResultError, InputError, OracleCapError
from .lattice import REL_TOL, Basis, LatticeVector, as_target, gaussian_heuristic_lambda1, gram_schmidt, sign_canonical

ORACLE_MAX_DIM = 40

# radius growth when the first guess admits nothing
_RADIUS_GROWTH = 1.15


def _check_cap(basis: Basis, max_dim: int):
    if basis.dimension > max_dim:
        raise OracleCapError(f"exact enumeration is capped at d={max_dim}, got d={basis.dimension}")


def _walk(mu_cols, sq, center, radius_sq, visit):
    """Depth-first Schnorr-Euchner walk over all x with dist(x) <= radius_sq.

    ``visit(x, dist)`` is called at each leaf and returns the (possibly
    reduced) squared radius. ``center[k]`` is the target coordinate along b*_k.
    """
    d = len(sq)
    x = [0] * d
    c = [0.0] * d
    dx = [0] * d
    ddx = [0] * d
    dist = [0.0] * (d + 1)

    k = d - 1
    c[k] = center[k]
    x[k] = round(c[k])
    dx[k] = ddx[k] = -1 if c[k] < x[k] else 1
    while True:
        y = x[k] - c[k]
        nd = dist[k + 1] + y * y * sq[k]
        if nd <= radius_sq:
            if k == 0:
                radius_sq = visit(x, nd)
            else:
                dist[k] = nd
                k -= 1
                col = mu_cols[k]
                s = center[k]
                for j in range(k + 1, d):
                    s -= x[j] * col[j]
                c[k] = s
                x[k] = round(s)
                dx[k] = ddx[k] = -1 if s < x[k] else 1
                continue
        else:
            k += 1
            if k == d:
                return
        # next candidate at level k in zigzag order
        x[k] += dx[k]
        ddx[k] = -ddx[k]
        dx[k] = ddx[k] - dx[k]


def _setup(basis: Basis, target):
    gso = gram_schmidt(basis)
    mu_cols = [list(map(float, gso.mu[:, k])) for k in range(basis.dimension)]
    sq = list(map(float, gso.sq_norms))
    if target is None:
        center = [0.0] * basis.dimension
    else:
        center = list(map(float, gso.bstar @ np.asarray(target, dtype=np.float64) / gso.sq_norms))
    return mu_cols, sq, center


class _Closest:
    """Leaf visitor keeping every minimizer within relative tolerance."""

    def __init__(self, radius_sq, skip_zero):
        self.best = math.inf
        self.ties = []
        self.radius_sq = radius_sq
        self.skip_zero = skip_zero

    def __call__(self, x, dist):
        if self.skip_zero and not any(x):
            return self.radius_sq
        if dist < self.best * (1 - 4 * REL_TOL):
            self.best = dist
            self.ties = [tuple(x)]
            self.radius_sq = dist * (1 + 4 * REL_TOL) + 1e-12
        elif dist <= self.best * (1 + 4 * REL_TOL) + 1e-12:
            self.ties.append(tuple(x))
        return self.radius_sq


def _closest(basis: Basis, target, radius: float | None, skip_zero: bool):
    mu_cols, sq, center = _setup(basis, target)
    fixed = radius is not None
    if radius is None:
        gh = gaussian_heuristic_lambda1(basis).value
        radius = gh * 1.05
    while True:
        visitor = _Closest(radius * radius * (1 + 4 * REL_TOL), skip_zero)
        _walk(mu_cols, sq, center, visitor.radius_sq, visitor)
        if visitor.ties:
            return visitor.ties
        if fixed:
            raise EmptyResultError(f"no lattice vector within radius {radius}")
        radius *= _RADIUS_GROWTH


def enumerate_svp(basis: Basis, bound: float | None = None, max_dim: int = ORACLE_MAX_DIM) -> LatticeVector:
    """Exact shortest nonzero vector.

    Among all minimizers the sign-canonical (first nonzero coefficient
    positive) coefficient vector that is lexicographically smallest wins.
    """
    _check_cap(basis, max_dim)
    if bound is None:
        row_norms = np.sqrt((basis.float_rows**2).sum(axis=1))
        gh = gaussian_heuristic_lambda1(basis).value
        radius = None if row_norms.min() > gh * 1.05 else float(row_norms.min())
    else:
        radius = float(bound)
    ties = _closest(basis, None, radius, skip_zero=True)
    cands = sign_canonical(np.array(ties, dtype=np.int64))
    # exact integer norms for the final choice
    sqn = (cands @ basis.rows) ** 2
    sqn = sqn.sum(axis=1)
    cands = cands[sqn == sqn.min()]
    best = min(tuple(int(v) for v in row) for row in cands)
    return LatticeVector.from_coeffs(basis, best)


def enumerate_cvp(basis: Basis, target, max_dim: int = ORACLE_MAX_DIM) -> LatticeVector:
    """Exact closest vector; ties go to the lexicographically smallest coefficients."""
    _check_cap(basis, max_dim)
    t = as_target(target, basis.dimension)
    babai = babai_nearest_plane(basis, t)
    gh = gaussian_heuristic_lambda1(basis).value
    radius = babai.distance_to(t)
    radius = radius if radius <= gh * 1.05 else None
    ties = _closest(basis, t, radius, skip_zero=False)
    cands = np.array(ties, dtype=np.int64)
    diff = basis.coords(cands) - t
    dist = np.einsum("ij,ij->i", diff, diff)
    keep = dist <= dist.min() * (1 + 4 * REL_TOL) + 1e-12
    best = min(tuple(int(v) for v in row) for row in cands[keep])
    return LatticeVector.from_coeffs(basis, best)


def enumerate_short(basis: Basis, radius: float, center=None, max_dim: int = ORACLE_MAX_DIM,
                    include_zero: bool = False, limit: int = 5_000_000) -> np.ndarray:
    """All coefficient vectors x with ||xB - center|| <= radius, both signs included."""
    _check_cap(basis, max_dim)
    if radius < 0:
        raise InputError("radius must be nonnegative")
    t = None if center is None else as_target(center, basis.dimension)
    mu_cols, sq, ctr = _setup(basis, t)
    found = []
    r2 = radius * radius * (1 + 4 * REL_TOL) + 1e-12

    def visit(x, dist):
        if include_zero or any(x):
            found.append(tuple(x))
            if len(found) > limit:
                raise OracleCapError(f"more than {limit} vectors within radius {radius}")
        return r2

    _walk(mu_cols, sq, ctr, r2, visit)
    if not found:
        return np.zeros((0, basis.dimension), dtype=np.int64)
    return np.array(found, dtype=np.int64)


def babai_nearest_plane(basis: Basis, target) -> LatticeVector:
    gso = gram_schmidt(basis)
    resid = np.array(target, dtype=np.float64)
    rows = basis.float_rows
    coeffs = np.zeros(basis.dimension, dtype=np.int64)
    for i in range(basis.dimension - 1, -1, -1):
        z = round(float(resid @ gso.bstar[i] / gso.sq_norms[i]))
        coeffs[i] = z
        resid -= z * rows[i]
    return LatticeVector.from_coeffs(basis, coeffs)


def babai_rounding(basis: Basis, target) -> LatticeVector:
    coeffs = np.rint(np.linalg.solve(basis.float_rows.T, np.asarray(target, dtype=np.float64)))
    return LatticeVector.from_coeffs(basis, coeffs.astype(np.int64))
