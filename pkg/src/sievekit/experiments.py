"""Seeded experiments behind the CLI ``experiment`` command.

Every trial draws its randomness from ``subseed(seed, trial)``, so a record's
config replays to the same per-trial outcomes (wall times aside).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cvpp import CvppParams, collision_experiment, preprocess, solve
from .enumeration import enumerate_cvp, enumerate_svp
from .lattice import random_lattice
from .lsf import LsfIndex, LsfParams, default_num_filters
from .sieve import SQRT_4_3, gauss_sieve
from .targets import planted_target, random_target

THREADS_ENV = "SIEVEKIT_THREADS"
VOLATILE_KEYS = ("wall_time",)


def subseed(seed: int, trial: int) -> int:
    """64-bit per-trial seed: first 8 bytes of sha256("seed:trial")."""
    digest = hashlib.sha256(f"{int(seed)}:{int(trial)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class ExperimentRecord:
    experiment: str
    config: dict
    trials: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def from_json(cls, text: str) -> ExperimentRecord:
        data = json.loads(text)
        return cls(data["experiment"], data["config"], data["trials"], data["summary"])

    @classmethod
    def load(cls, path) -> ExperimentRecord:
        return cls.from_json(Path(path).read_text())

    def outcomes(self) -> list:
        """Per-trial outcomes without wall times, for replay comparison."""
        return [{k: v for k, v in t.items() if k not in VOLATILE_KEYS} for t in self.trials]


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    out["wall_time"] = time.perf_counter() - t0
    return out


def _run_trials(fn, jobs: list) -> list:
    """Run fn(*job) for each job, in a process pool when SIEVEKIT_THREADS > 1."""
    workers = min(worker_count(), len(jobs))
    if workers <= 1:
        return [_timed(fn, *job) for job in jobs]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(_timed, [fn] * len(jobs), *zip(*jobs)))


def _slope(xs, ys) -> tuple[float, float]:
    a, b = np.polyfit(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), 1)
    return float(a), float(b)


# ---------------------------------------------------------------------------
# Trials


def _listsize_trial(d, trial, seed, verify):
    s = subseed(seed, trial)
    basis = random_lattice(d, s)
    v, lst = gauss_sieve(basis, rng_seed=s)
    out = {"dimension": d, "trial": trial, "list_size": len(lst), "log2_list_size": math.log2(len(lst)),
           "min_norm": v.norm, "samples": lst.meta["samples"], "collisions": lst.meta["collisions"],
           "certified": lst.meta["certified"]}
    if verify:
        out["lambda1"] = enumerate_svp(basis).norm
        out["success"] = abs(out["lambda1"] - v.norm) <= 1e-9 * out["lambda1"]
    return out


def _collisions_trial(d, trial, seed, targets, deltas):
    s = subseed(seed, trial)
    basis = random_lattice(d, s)
    plist = preprocess(basis, CvppParams(SQRT_4_3), rng_seed=s, override=True)
    rates = collision_experiment(basis, plist, targets, rng_seed=s, deltas=deltas)
    return {"dimension": d, "trial": trial, "list_size": len(plist),
            "rates": {f"{k:g}": v for k, v in rates.items()}}


def _bdd_trial(d, trial, seed, targets, delta):
    s = subseed(seed, trial)
    basis = random_lattice(d, s)
    params = CvppParams.bdd(delta)
    plist = preprocess(basis, params, rng_seed=s)
    rng = np.random.default_rng(s)
    hits, betas, counts = 0, [], []
    for _ in range(targets):
        t, v = planted_target(basis, rng, delta * plist.lambda1.value)
        sol, cert = solve(plist, t, params)
        hits += bool(np.array_equal(sol.coeffs, v.coeffs))
        betas.append(cert.beta)
        counts.append(cert.reduction_count)
    return {"dimension": d, "trial": trial, "alpha": params.alpha, "list_size": len(plist),
            "success_rate": hits / targets, "median_beta": float(np.median(betas)),
            "max_reductions": int(max(counts))}


def _kappa_trial(d, trial, seed, targets, kappa):
    s = subseed(seed, trial)
    basis = random_lattice(d, s)
    params = CvppParams.approx(kappa)
    plist = preprocess(basis, params, rng_seed=s)
    rng = np.random.default_rng(s)
    ok, trivial, ratios = 0, 0, []
    for _ in range(targets):
        t = random_target(basis, rng)
        sol, _cert = solve(plist, t, params)
        best = enumerate_cvp(basis, t).distance_to(t)
        ratio = sol.distance_to(t) / best if best > 0 else (1.0 if sol.distance_to(t) == 0 else math.inf)
        ratios.append(ratio)
        ok += ratio <= kappa * (1 + 1e-9)
        # would s = 0 already have passed?
        trivial += bool(np.linalg.norm(t) <= kappa * best * (1 + 1e-9))
    return {"dimension": d, "trial": trial, "alpha": params.alpha, "list_size": len(plist),
            "success_rate": ok / targets, "trivial_rate": trivial / targets, "max_ratio": float(max(ratios))}


def lemma2_rate(d: int, samples: int, rng_seed: int, chunk: int = 200_000) -> float:
    """Fraction of uniform unit w with ||v - w|| < ||v|| for a fixed unit v."""
    rng = np.random.default_rng(rng_seed)
    hits = 0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        g = rng.standard_normal((n, d))
        # v = e_1, so ||v - w||^2 < 1 iff <v, w> > 1/2
        cos = g[:, 0] / np.sqrt(np.einsum("ij,ij->i", g, g))
        hits += int(np.count_nonzero(cos > 0.5))
        done += n
    return hits / samples


def _lemma2_trial(d, trial, seed, samples):
    rate = lemma2_rate(d, samples, subseed(seed, trial))
    predicted = 0.75 ** (d / 2)
    return {"dimension": d, "trial": trial, "samples": samples, "rate": rate, "predicted": predicted,
            "ratio": predicted / rate if rate else math.inf}


def planted_pair_recall(d: int, n: int, theta: float, u: float, trials: int, seed: int,
                        gap: float = 0.05) -> float:
    """Fraction of trials where querying one planted point returns its partner at angle theta - gap."""
    nf = default_num_filters(d, theta, u)
    params = LsfParams(theta, u, nf)
    found = 0
    for trial in range(trials):
        rng = np.random.default_rng(subseed(seed, trial))
        pts = rng.standard_normal((n, d))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        x = pts[0]
        y = rng.standard_normal(d)
        y -= (y @ x) * x
        y /= np.linalg.norm(y)
        pts[1] = math.cos(theta - gap) * x + math.sin(theta - gap) * y
        index = LsfIndex(d, params, subseed(seed, trial) ^ 0x5EED)
        index.insert_many(range(n), pts)
        found += 1 in index.candidate_set(x)
    return found / trials


def _recall_trial(d, trial, seed, n, queries):
    rate = planted_pair_recall(d, n, math.pi / 3, 1.0, queries, subseed(seed, trial))
    return {"dimension": d, "trial": trial, "points": n, "queries": queries, "recall": rate}


# ---------------------------------------------------------------------------
# Experiments


def listsize(dims=(30, 35, 40), trials=5, seed=0, verify=False) -> ExperimentRecord:
    jobs = [(d, t, seed, verify) for d in dims for t in range(trials)]
    rows = _run_trials(_listsize_trial, jobs)
    summary = {}
    if len(set(dims)) >= 2:
        slope, icept = _slope([r["dimension"] for r in rows], [r["log2_list_size"] for r in rows])
        summary.update(slope=slope, intercept=icept)
    for d in dims:
        sizes = [r["log2_list_size"] for r in rows if r["dimension"] == d]
        summary[f"mean_log2_list_size_d{d}"] = float(np.mean(sizes))
    if verify:
        summary["success_rate"] = float(np.mean([r["success"] for r in rows]))
    return ExperimentRecord("listsize", {"dims": list(dims), "trials": trials, "seed": seed, "verify": verify},
                            rows, summary)


def collisions(dims=(30,), trials=2, seed=0, targets=50, deltas=(0.01, 0.1, 0.5)) -> ExperimentRecord:
    jobs = [(d, t, seed, targets, tuple(deltas)) for d in dims for t in range(trials)]
    rows = _run_trials(_collisions_trial, jobs)
    summary = {f"rate_{k}": float(np.mean([r["rates"][k] for r in rows])) for k in rows[0]["rates"]}
    return ExperimentRecord("collisions", {"dims": list(dims), "trials": trials, "seed": seed,
                                           "targets": targets, "deltas": list(deltas)}, rows, summary)


def bdd_sweep(dims=(28,), trials=2, seed=0, targets=25, delta=0.5) -> ExperimentRecord:
    jobs = [(d, t, seed, targets, delta) for d in dims for t in range(trials)]
    rows = _run_trials(_bdd_trial, jobs)
    summary = {"success_rate": float(np.mean([r["success_rate"] for r in rows])),
               "max_reductions": int(max(r["max_reductions"] for r in rows))}
    return ExperimentRecord("bdd-sweep", {"dims": list(dims), "trials": trials, "seed": seed,
                                          "targets": targets, "delta": delta}, rows, summary)


def kappa_sweep(dims=(28,), trials=2, seed=0, targets=25, kappa=2.0) -> ExperimentRecord:
    jobs = [(d, t, seed, targets, kappa) for d in dims for t in range(trials)]
    rows = _run_trials(_kappa_trial, jobs)
    summary = {"success_rate": float(np.mean([r["success_rate"] for r in rows])),
               "trivial_rate": float(np.mean([r["trivial_rate"] for r in rows]))}
    return ExperimentRecord("kappa-sweep", {"dims": list(dims), "trials": trials, "seed": seed,
                                            "targets": targets, "kappa": kappa}, rows, summary)


def lemma2_mc(dims=(20, 40), trials=1, seed=0, samples=None) -> ExperimentRecord:
    """Default sample counts: 10^5 at d <= 20, 10^7 above."""
    jobs = [(d, t, seed, samples or (10**5 if d <= 20 else 10**7)) for d in dims for t in range(trials)]
    rows = _run_trials(_lemma2_trial, jobs)
    summary = {}
    for d in dims:
        rs = [r for r in rows if r["dimension"] == d]
        rate = float(np.mean([r["rate"] for r in rs]))
        summary[f"d{d}"] = {"rate": rate, "predicted": 0.75 ** (d / 2),
                            "ratio": 0.75 ** (d / 2) / rate if rate else math.inf}
    return ExperimentRecord("lemma2-mc", {"dims": list(dims), "trials": trials, "seed": seed,
                                          "samples": samples}, rows, summary)


def lsf_recall(dims=(40,), trials=1, seed=0, points=2000, queries=100) -> ExperimentRecord:
    jobs = [(d, t, seed, points, queries) for d in dims for t in range(trials)]
    rows = _run_trials(_recall_trial, jobs)
    summary = {"recall": float(np.mean([r["recall"] for r in rows]))}
    return ExperimentRecord("lsf-recall", {"dims": list(dims), "trials": trials, "seed": seed,
                                           "points": points, "queries": queries}, rows, summary)


EXPERIMENTS = {
    "listsize": listsize,
    "collisions": collisions,
    "bdd-sweep": bdd_sweep,
    "kappa-sweep": kappa_sweep,
    "lemma2-mc": lemma2_mc,
    "lsf-recall": lsf_recall,
}


def run_experiment(name: str, **config) -> ExperimentRecord:
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}")
    return EXPERIMENTS[name](**config)


def replay(record: ExperimentRecord) -> ExperimentRecord:
    cfg = dict(record.config)
    for key in ("dims", "deltas"):
        if key in cfg:
            cfg[key] = tuple(cfg[key])
    return run_experiment(record.experiment, **cfg)
