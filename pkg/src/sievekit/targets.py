"""Test targets for the CVP solvers.

Random targets sit at a fixed distance from the origin in a uniform
direction. Planted targets add noise of a chosen norm to a lattice vector v
that is itself the closest vector to a random target, so v is a typical
lattice point of moderate norm rather than a list element or a long Klein
sample.
"""

from __future__ import annotations

import numpy as np

from .enumeration import enumerate_cvp
from .lattice import Basis, LatticeVector, as_target, gaussian_heuristic_lambda1

#: default distance of random targets from the origin, in Gaussian-heuristic units;
#: at 2 x GH the zero vector is often already a 2-approximate answer
TARGET_RADIUS = 4.0


def _direction(rng: np.random.Generator, d: int) -> np.ndarray:
    g = rng.standard_normal(d)
    return g / np.linalg.norm(g)


def random_target(basis: Basis, rng: np.random.Generator, radius: float | None = None) -> np.ndarray:
    """Uniformly oriented point at distance ``radius`` (default 4 x GH) from 0."""
    if radius is None:
        radius = TARGET_RADIUS * gaussian_heuristic_lambda1(basis).value
    return as_target(radius * _direction(rng, basis.dimension))


def planted_target(basis: Basis, rng: np.random.Generator, distance: float,
                   radius: float | None = None) -> tuple[np.ndarray, LatticeVector]:
    """(v + e, v) with ||e|| = distance and v = closest vector to a random target."""
    v = enumerate_cvp(basis, random_target(basis, rng, radius))
    return as_target(v.coords + distance * _direction(rng, basis.dimension)), v
