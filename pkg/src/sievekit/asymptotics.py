"""Closed-form space/time exponents for sieving-based CVP and its relaxations.

Every exponent is per dimension and base 2: a cost C = 2^{e d + o(d)} is
reported as e.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

from .errors import DomainError
from .lsf import compute_exponents

SQRT2 = math.sqrt(2)
SVP_TIME_EXP = 0.5 * math.log2(3 / 2)
SVP_SPACE_EXP = 0.5 * math.log2(4 / 3)

_BISECT_TOL = 1e-12


@dataclass(frozen=True)
class ComplexityPoint:
    space_exp: float
    preproc_exp: float
    query_exp: float
    single_instance: bool = False

    def rounded(self, digits: int = 6) -> tuple:
        return (round(self.space_exp, digits), round(self.preproc_exp, digits), round(self.query_exp, digits))


class Problem(str, enum.Enum):
    ADAPTIVE = "adaptive"
    CVPP = "cvpp"
    BDD = "bdd"
    APPROX = "approx"


def _bisect(f, lo, hi, tol=_BISECT_TOL, max_iter=400):
    """Root of f on [lo, hi] with f(lo), f(hi) of opposite sign."""
    flo = f(lo)
    if flo == 0:
        return lo
    if (flo > 0) == (f(hi) > 0):
        raise DomainError("root is not bracketed")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0 or hi - lo < tol:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# List radius thresholds


def alpha_exact() -> float:
    return SQRT2


def alpha_bdd(delta: float) -> float:
    """Smallest list radius factor for delta-BDD."""
    if not 0 < delta <= 1:
        raise DomainError(f"delta must lie in (0, 1], got {delta}")
    a = 1 + delta * delta
    return math.sqrt(2 / 3 * a + 2 / 3 * math.sqrt(a * a - 3 * delta * delta))


def alpha_approx(kappa: float) -> float:
    """Smallest list radius factor for kappa-approximate CVP."""
    if not kappa >= 1:
        raise DomainError(f"kappa must be >= 1, got {kappa}")
    # kappa - sqrt(kappa^2 - 1) written without cancellation
    return math.sqrt(2 * kappa / (kappa + math.sqrt(kappa * kappa - 1)))


def expected_beta(alpha: float) -> float:
    """Norm (in units of lambda1) a target reduces to with an alpha-list.

    inf over alpha0 in (1, alpha] of alpha0^2 / (2 sqrt(alpha0^2 - 1)); the
    unconstrained minimizer is alpha0 = sqrt(2) with value 1.
    """
    if not alpha > 1:
        raise DomainError(f"alpha must exceed 1, got {alpha}")
    a0 = min(alpha, SQRT2)
    return a0 * a0 / (2 * math.sqrt(a0 * a0 - 1))


# ---------------------------------------------------------------------------
# Tradeoffs


def _half_log2(x: float) -> float:
    return 0.5 * math.log2(x)


def u_range(alpha: float) -> tuple[float, float]:
    """Valid u for list radius alpha: [sqrt((a^2-1)/a^2), sqrt(a^2/(a^2-1))).

    The lower end (space-minimal, no extra filter storage) is included; the
    upper end, where the space exponent diverges, is not.
    """
    if not alpha > 1:
        raise DomainError("alpha must exceed 1")
    a2 = alpha * alpha
    return math.sqrt((a2 - 1) / a2), math.sqrt(a2 / (a2 - 1))


def _check_u(u: float, alpha: float):
    lo, hi = u_range(alpha)
    if not lo * (1 - 1e-12) <= u < hi:
        raise DomainError(f"u={u} outside [{lo}, {hi}) for alpha={alpha}")


def cvpp_tradeoff(u: float) -> ComplexityPoint:
    """Exact CVPP with a sqrt(2)-list and filter parameter u."""
    _check_u(u, SQRT2)
    space = _half_log2(1 / (u * (SQRT2 - u)))
    query = _half_log2((SQRT2 + u) / (2 * u))
    return ComplexityPoint(space, space, query)


def _relaxed_point(alpha: float, u: float) -> ComplexityPoint:
    _check_u(u, alpha)
    a2 = alpha * alpha
    r = math.sqrt(a2 - 1)
    space_base = 1 / (1 - (a2 - 1) * (u * u - 2 * u / alpha * r + 1))
    query_base = (alpha + u * r) / (2 * alpha - alpha**3 + a2 * u * r)
    space = _half_log2(space_base)
    return ComplexityPoint(space, max(space, SVP_TIME_EXP), _half_log2(query_base))


def bdd_tradeoff(delta: float, u: float) -> ComplexityPoint:
    return _relaxed_point(alpha_bdd(delta), u)


def approx_tradeoff(kappa: float, u: float) -> ComplexityPoint:
    return _relaxed_point(alpha_approx(kappa), u)


def adaptive_exponents() -> ComplexityPoint:
    """Single-instance adaptive sieve with balanced filters: time = preprocessing = query."""
    return ComplexityPoint(SVP_SPACE_EXP, SVP_TIME_EXP, SVP_TIME_EXP, single_instance=True)


def adaptive_tradeoff(u: float) -> ComplexityPoint:
    """Sieving tradeoff at angle pi/3: space n^{1+rho_u}, time max(n^{1+rho_u}, n^{1+rho_q})."""
    if not 0.5 <= u <= 1:
        raise DomainError("adaptive tradeoff is monotone only for u in [1/2, 1]")
    e = compute_exponents(math.pi / 3, u)
    time = max(e.n_exponent + e.rho_u, e.n_exponent + e.rho_q)
    return ComplexityPoint(e.n_exponent + e.rho_u, time, time, single_instance=True)


def subexp_regime(epsilon: float) -> tuple[float, ComplexityPoint]:
    """u on the exact CVPP curve whose query exponent equals epsilon."""
    top = cvpp_tradeoff(SQRT2 / 2).query_exp
    if not 0 < epsilon <= top:
        raise DomainError(f"epsilon must lie in (0, {top:.6f}], got {epsilon}")
    u = _bisect(lambda x: cvpp_tradeoff(x).query_exp - epsilon, SQRT2 / 2, SQRT2 * (1 - 1e-15))
    return u, cvpp_tradeoff(u)


def poly_advice_kappa(dimension: int) -> float:
    """kappa where the preprocessed list alpha(kappa)^d shrinks to d vectors."""
    if dimension < 8:
        raise DomainError("poly_advice_kappa needs d >= 8")
    target = math.exp(math.log(dimension) / dimension)
    lo, hi = 1.0, 2.0
    while alpha_approx(hi) > target:
        hi *= 2
    # alpha_approx is decreasing in kappa; bisect in log space for large d
    f = lambda lk: alpha_approx(math.exp(lk)) - target  # noqa: E731
    return math.exp(_bisect(f, math.log(lo), math.log(hi), tol=1e-15))


# ---------------------------------------------------------------------------
# Curves


def _curve_point(problem: Problem, param: float | None, u: float) -> ComplexityPoint:
    if problem is Problem.CVPP:
        return cvpp_tradeoff(u)
    if problem is Problem.BDD:
        return bdd_tradeoff(param, u)
    if problem is Problem.APPROX:
        return approx_tradeoff(param, u)
    return adaptive_tradeoff(u)


def curve_u_range(problem: Problem | str, param: float | None = None) -> tuple[float, float]:
    problem = Problem(problem)
    if problem is Problem.CVPP:
        return u_range(SQRT2)
    if problem is Problem.BDD:
        return u_range(alpha_bdd(param))
    if problem is Problem.APPROX:
        return u_range(alpha_approx(param))
    return 0.5, 1.0


def tradeoff_curve(problem: Problem | str, param: float | None = None, samples: int = 50):
    """Rows (space_exp, preproc_exp, query_exp, u) sampled uniformly in u.

    The lower u endpoint is included, the (divergent) upper one excluded,
    except for the adaptive curve whose range [1/2, 1] is closed.
    """
    if samples < 2:
        raise DomainError("samples must be >= 2")
    problem = Problem(problem)
    lo, hi = curve_u_range(problem, param)
    closed = problem is Problem.ADAPTIVE
    step = (hi - lo) / (samples - 1 if closed else samples)
    rows = []
    for i in range(samples):
        u = lo + i * step
        p = _curve_point(problem, param, u)
        rows.append((p.space_exp, p.preproc_exp, p.query_exp, u))
    return rows


def query_at_space(problem: Problem | str, param: float | None, space_exp: float) -> float:
    """Query exponent of the curve point with the given space exponent."""
    problem = Problem(problem)
    lo, hi = curve_u_range(problem, param)
    if problem is not Problem.ADAPTIVE:
        hi = hi * (1 - 1e-12)
    f = lambda u: _curve_point(problem, param, u).space_exp - space_exp  # noqa: E731
    u = _bisect(f, lo, hi)
    return _curve_point(problem, param, u).query_exp


CSV_HEADER = ("space_exp", "preproc_exp", "query_exp", "param")


def to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow([f"{x:.6f}" for x in row])
    return buf.getvalue()
