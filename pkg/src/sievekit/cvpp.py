"""CVP with preprocessing: a relaxed sieve list built once, then greedy target reduction.

Phase 1 gathers (almost) all lattice vectors of norm <= alpha * lambda1.
Phase 2 subtracts list vectors from the target while that shortens it; the
answer is s = t - t'.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import asymptotics
from .enumeration import ORACLE_MAX_DIM, enumerate_svp
from .errors import CertificationError, DomainError, FormatError, InputError, WrongLatticeError
from .lattice import (Basis, Lambda1Estimate, Lambda1Source, LatticeVector, as_target, gaussian_heuristic_lambda1,
                      parse_basis, format_basis)
from .lsf import LsfIndex, LsfParams, default_num_filters
from .sieve import SieveList, TerminationRule, relaxed_gauss_sieve
from .targets import planted_target

MAGIC = b"CVPP"
FORMAT_VERSION = 1
#: stored vectors may exceed alpha * lambda1 by this factor
NORM_SLACK = 1.02
#: Phase-1 saturation: stop once collisions reach the list size
PHASE1_TERMINATION = TerminationRule(collision_fraction=1.0)
#: Phase-1 samples have norm about this many lambda1-estimates
PHASE1_SPREAD = 2.0
#: strict-decrease slack on squared norms, in units of lambda1^2
REDUCTION_SLACK = 1e-9

_SOURCE_TAGS = {Lambda1Source.ENUMERATED: 0, Lambda1Source.GAUSSIAN_HEURISTIC: 1}
_HEADER = struct.Struct("<4sHIddB32sQ")
_LSF = struct.Struct("<QddQ")
HEADER_SIZE = _HEADER.size


@dataclass(frozen=True)
class CvppParams:
    """List radius factor plus the problem it must certify.

    mode is "exact", "bdd" (with delta) or "approx" (with kappa).
    """

    alpha: float
    mode: str = "exact"
    delta: float | None = None
    kappa: float | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "bdd", "approx"):
            raise InputError(f"unknown mode {self.mode!r}")
        if self.mode == "bdd" and self.delta is None:
            raise InputError("bdd mode needs delta")
        if self.mode == "approx" and self.kappa is None:
            raise InputError("approx mode needs kappa")
        if not self.alpha >= 1:
            raise DomainError(f"alpha must be >= 1, got {self.alpha}")

    @classmethod
    def exact(cls, alpha: float | None = None) -> CvppParams:
        return cls(math.sqrt(2) if alpha is None else alpha)

    @classmethod
    def bdd(cls, delta: float, alpha: float | None = None) -> CvppParams:
        return cls(asymptotics.alpha_bdd(delta) if alpha is None else alpha, "bdd", delta=delta)

    @classmethod
    def approx(cls, kappa: float, alpha: float | None = None) -> CvppParams:
        return cls(asymptotics.alpha_approx(kappa) if alpha is None else alpha, "approx", kappa=kappa)

    @property
    def certified(self) -> bool:
        return self.alpha >= min_alpha(self) * (1 - 1e-12)

    def success_bound(self) -> float:
        """Largest beta counted as success: 1 exact, kappa approx, delta for BDD."""
        if self.mode == "approx":
            return self.kappa
        if self.mode == "bdd":
            return self.delta
        return 1.0

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "mode": self.mode, "delta": self.delta, "kappa": self.kappa}


def min_alpha(mode: CvppParams | str, param: float | None = None) -> float:
    """Smallest list radius factor for the mode ("exact", "bdd" + delta, "approx" + kappa)."""
    if isinstance(mode, CvppParams):
        mode, param = mode.mode, (mode.delta if mode.mode == "bdd" else mode.kappa)
    if mode == "exact":
        return math.sqrt(2)
    if mode == "bdd":
        return asymptotics.alpha_bdd(param)
    if mode == "approx":
        return asymptotics.alpha_approx(param)
    raise InputError(f"unknown mode {mode!r}")


expected_beta = asymptotics.expected_beta


def reducibility_probability(v_norm: float, w_norm: float, dimension: int) -> float:
    """Leading-order P(||v - w|| < ||v||) for w uniform on a sphere: (1 - (w/2v)^2)^(d/2)."""
    if not (v_norm > 0 and w_norm > 0):
        raise DomainError("norms must be positive")
    r = w_norm / (2 * v_norm)
    if r >= 1:
        return 0.0
    return (1 - r * r) ** (dimension / 2)


# ---------------------------------------------------------------------------
# Preprocessed list


@dataclass(frozen=True)
class LsfConfig:
    seed: int
    theta: float
    u: float
    num_filters: int


@dataclass(eq=False)
class PreprocessedList:
    basis: Basis
    alpha: float
    lambda1: Lambda1Estimate
    list: SieveList
    lsf: LsfConfig | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        bound = self.alpha * self.lambda1.value * NORM_SLACK
        if len(self.list) and float(np.sqrt(self.list.sq_norms.max())) > bound * (1 + 1e-12):
            raise InputError("preprocessed list holds a vector longer than alpha * lambda1 * 1.02")
        self._index = None

    @property
    def fingerprint(self) -> bytes:
        return self.basis.fingerprint

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    def __len__(self):
        return len(self.list)

    @property
    def index(self) -> LsfIndex | None:
        """Filter index over the list rows (ids are row numbers), built lazily from the seed."""
        if self.lsf is None:
            return None
        if self._index is None:
            cfg = self.lsf
            idx = LsfIndex(self.dimension, LsfParams(cfg.theta, cfg.u, cfg.num_filters), cfg.seed)
            for i, x in enumerate(self.list.coords):
                idx.insert(i, x)
            self._index = idx
        return self._index

    def check_basis(self, basis: Basis | None):
        if basis is not None and basis.fingerprint != self.fingerprint:
            raise WrongLatticeError("basis fingerprint does not match the preprocessed list")

    # -- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        d = self.dimension
        parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, d, float(self.alpha), float(self.lambda1.value),
                              _SOURCE_TAGS[self.lambda1.source], self.fingerprint, len(self.list))]
        parts.append(np.ascontiguousarray(self.list.coeffs, dtype="<i8").tobytes())
        if self.lsf is None:
            parts.append(b"\x00")
        else:
            c = self.lsf
            parts.append(b"\x01" + _LSF.pack(c.seed, c.theta, c.u, c.num_filters))
        meta = dict(self.metadata)
        meta["basis"] = format_basis(self.basis)
        blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
        parts.append(struct.pack("<I", len(blob)) + blob)
        return b"".join(parts)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes, basis: Basis | None = None) -> PreprocessedList:
        try:
            magic, version, d, alpha, lam, tag, fp, n = _HEADER.unpack_from(data, 0)
            pos = _HEADER.size
        except struct.error:
            raise FormatError("truncated preprocessed-list header") from None
        if magic != MAGIC:
            raise FormatError("not a preprocessed-list file (bad magic)")
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported format version {version}")
        sources = {v: k for k, v in _SOURCE_TAGS.items()}
        if tag not in sources:
            raise FormatError(f"unknown lambda1 source tag {tag}")
        size = n * d * 8
        if len(data) < pos + size + 1:
            raise FormatError("truncated coefficient block")
        coeffs = np.frombuffer(data, dtype="<i8", count=n * d, offset=pos).reshape(n, d).astype(np.int64)
        pos += size
        lsf = None
        if data[pos] == 1:
            try:
                seed, theta, u, nf = _LSF.unpack_from(data, pos + 1)
            except struct.error:
                raise FormatError("truncated LSF section") from None
            lsf = LsfConfig(seed, theta, u, nf)
            pos += 1 + _LSF.size
        elif data[pos] == 0:
            pos += 1
        else:
            raise FormatError("bad LSF flag")
        try:
            (mlen,) = struct.unpack_from("<I", data, pos)
            meta = json.loads(data[pos + 4 : pos + 4 + mlen].decode())
        except (struct.error, ValueError):
            raise FormatError("bad metadata block") from None
        if pos + 4 + mlen != len(data):
            raise FormatError("trailing bytes after metadata")
        stored = parse_basis(meta.pop("basis"))
        if stored.fingerprint != fp:
            raise FormatError("embedded basis does not match the stored fingerprint")
        if basis is not None and basis.fingerprint != fp:
            raise WrongLatticeError("basis fingerprint does not match the preprocessed list")
        lst = SieveList.from_coeffs(stored, coeffs)
        if len(lst) != n:
            raise FormatError("coefficient block holds zero or duplicate vectors")
        return cls(stored, alpha, Lambda1Estimate(lam, sources[tag]), lst, lsf, meta)

    @classmethod
    def load(cls, path, basis: Basis | None = None) -> PreprocessedList:
        return cls.from_bytes(Path(path).read_bytes(), basis)


def lambda1_estimate(basis: Basis) -> Lambda1Estimate:
    """Exact value by enumeration up to the oracle cap, Gaussian heuristic beyond."""
    if basis.dimension <= ORACLE_MAX_DIM:
        return Lambda1Estimate(enumerate_svp(basis).norm, Lambda1Source.ENUMERATED)
    return gaussian_heuristic_lambda1(basis)


def preprocess(basis: Basis, params: CvppParams | None = None, rng_seed: int = 0, use_lsf: bool = False, *,
               override: bool = False, lsf_u: float = 1.0, termination: TerminationRule | None = None,
               spread: float | None = None, progress=None) -> PreprocessedList:
    """Phase 1: relaxed GaussSieve, truncated to norm <= alpha * lambda1 * 1.02.

    Radii below the mode threshold need ``override`` (uncertified runs).
    """
    params = params or CvppParams.exact()
    if not params.certified and not override:
        raise CertificationError(
            f"alpha={params.alpha:.6f} is below the {params.mode} threshold {min_alpha(params):.6f}")
    lam = lambda1_estimate(basis)
    if spread is None:
        spread = PHASE1_SPREAD * gaussian_heuristic_lambda1(basis).value
    termination = termination or PHASE1_TERMINATION
    raw = relaxed_gauss_sieve(basis, params.alpha, termination, rng_seed, spread=spread, use_lsf=use_lsf,
                              progress=progress)
    keep = raw.sq_norms <= (params.alpha * lam.value * NORM_SLACK) ** 2
    coeffs = raw.coeffs[keep]
    # shortest first, ties by canonical coefficients, so the byte image is seed-determined
    order = np.lexsort(coeffs.T[::-1])
    order = order[np.argsort(raw.sq_norms[keep][order], kind="stable")]
    lst = SieveList.from_coeffs(basis, coeffs[order])
    lsf = None
    if use_lsf:
        theta = math.asin(1 / max(params.alpha, 1 + 1e-12))
        nf = default_num_filters(basis.dimension, theta, lsf_u)
        lsf = LsfConfig(int(np.random.default_rng(rng_seed).integers(2**62)), theta, lsf_u, nf)
    meta = {
        "seed": int(rng_seed),
        "params": params.as_dict(),
        "certified": params.certified,
        "samples": int(raw.meta["samples"]),
        "collisions": int(raw.meta["collisions"]),
        "sieve_list_size": len(raw),
        "sieve_saturated": bool(raw.meta["certified"]),
        "reduction_factor": float(raw.meta["reduction_factor"]),
    }
    return PreprocessedList(basis, float(params.alpha), lam, lst, lsf, meta)


# ---------------------------------------------------------------------------
# Phase 2


@dataclass(frozen=True)
class ReducedTarget:
    t_prime: np.ndarray
    coeffs: np.ndarray
    beta: float
    reduction_count: int


@dataclass(frozen=True)
class Certificate:
    beta: float
    bound: float
    within_bound: bool
    reduction_count: int
    lsf: bool
    mode: str


def _first_reducer(coords, sq, tp, need):
    """Row index of the first w with ||t' - s w||^2 <= ||t'||^2 - need, and the sign s."""
    dots = coords @ tp
    gain = 2 * np.abs(dots) - sq
    hit = np.flatnonzero(gain >= need)
    if not len(hit):
        return None, 0
    r = int(hit[0])
    return r, 1 if dots[r] > 0 else -1


def reduce_target(plist: PreprocessedList, target, *, basis: Basis | None = None, use_lsf: bool | None = None,
                  max_reductions: int | None = None) -> ReducedTarget:
    """Subtract list vectors (either sign) from t while that shortens it.

    After every reduction the scan restarts from the first list row; with an
    LSF index the restart is a fresh candidate query for the new t'.
    """
    plist.check_basis(basis)
    t = as_target(target, plist.dimension)
    lst = plist.list
    use_lsf = plist.lsf is not None if use_lsf is None else use_lsf
    index = plist.index if use_lsf else None
    if use_lsf and index is None:
        raise InputError("this list was preprocessed without an LSF index")
    need = REDUCTION_SLACK * plist.lambda1.value ** 2
    tp = np.array(t)
    coeffs = np.zeros(plist.dimension, dtype=np.int64)
    count = 0
    limit = max_reductions if max_reductions is not None else 1_000_000
    while len(lst) and tp.any() and count < limit:
        if index is None:
            r, s = _first_reducer(lst.coords, lst.sq_norms, tp, need)
        else:
            rows = np.array(sorted(index.candidate_set(tp, both_signs=True)), dtype=np.int64)
            r, s = (None, 0) if not len(rows) else _first_reducer(lst.coords[rows], lst.sq_norms[rows], tp, need)
            r = None if r is None else int(rows[r])
        if r is None:
            break
        tp = tp - s * lst.coords[r]
        coeffs += s * lst.coeffs[r]
        count += 1
    tp.setflags(write=False)
    coeffs.setflags(write=False)
    beta = float(np.linalg.norm(tp)) / plist.lambda1.value
    return ReducedTarget(tp, coeffs, beta, count)


def solve(plist: PreprocessedList, target, params: CvppParams | None = None, *, basis: Basis | None = None,
          use_lsf: bool | None = None) -> tuple[LatticeVector, Certificate]:
    """s = t - t' plus a certificate comparing beta with the mode's bound."""
    params = params or CvppParams(plist.alpha)
    red = reduce_target(plist, target, basis=basis, use_lsf=use_lsf)
    s = LatticeVector.from_coeffs(plist.basis, red.coeffs)
    bound = params.success_bound()
    lsf = plist.lsf is not None if use_lsf is None else use_lsf
    cert = Certificate(red.beta, bound, red.beta <= bound * (1 + 1e-9), red.reduction_count, lsf, params.mode)
    return s, cert


def collision_experiment(basis: Basis, plist: PreprocessedList, trials: int, rng_seed: int = 0,
                         deltas=(0.01, 0.1, 0.5)) -> dict:
    """Recovery rate of planted v from t = v + e with ||e|| = delta * lambda1."""
    plist.check_basis(basis)
    rng = np.random.default_rng(rng_seed)
    out = {}
    for delta in deltas:
        hits = 0
        for _ in range(trials):
            t, v = planted_target(basis, rng, delta * plist.lambda1.value)
            red = reduce_target(plist, t)
            hits += bool(np.array_equal(red.coeffs, v.coeffs))
        out[float(delta)] = hits / trials if trials else math.nan
    return out

