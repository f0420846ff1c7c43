"""Command-line entry point: ``sievekit <command> ...``.

Exit codes: 0 success, 2 input error, 3 verification mismatch, 4 resource
cap or exhausted budget.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import asymptotics as asy
from .adaptive import solve_cvp_adaptive
from .cvpp import CvppParams, PreprocessedList, preprocess, solve
from .enumeration import ORACLE_MAX_DIM, enumerate_cvp, enumerate_svp
from .errors import InputError, ListStarvationError, OracleCapError, SievekitError
from .experiments import EXPERIMENTS, run_experiment
from .lattice import read_basis, read_targets
from .sieve import gauss_sieve, json_progress, run_nv_sieve

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MISMATCH = 3
EXIT_RESOURCE = 4

log = logging.getLogger("sievekit")


def _emit(report: dict, as_json: bool, out=None) -> None:
    out = out or sys.stdout
    if as_json:
        out.write(json.dumps(report, sort_keys=True, default=_jsonable) + "\n")
        return
    for key, val in report.items():
        if isinstance(val, float):
            val = f"{val:.6f}"
        elif isinstance(val, (list, dict)):
            val = json.dumps(val, default=_jsonable)
        out.write(f"{key}: {val}\n")


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def _can_verify(d: int) -> bool:
    if d > ORACLE_MAX_DIM:
        log.warning("d=%d exceeds the enumeration cap %d; skipping --verify", d, ORACLE_MAX_DIM)
        return False
    return True


def _same_distance(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(1.0, b)


# ---------------------------------------------------------------------------
# Commands


def cmd_svp(args) -> int:
    basis = read_basis(args.basis)
    use_lsf = args.nns == "lsf"
    progress = json_progress() if args.progress else None
    if args.algo == "nv":
        lst = run_nv_sieve(basis, rng_seed=args.seed, use_lsf=use_lsf, progress=progress)
        v = lst.meta["shortest"]
        telemetry = {"iterations": lst.meta["iterations"], "initial_size": lst.meta["initial_size"],
                     "peak_list_size": lst.meta["peak_list_size"]}
    else:
        v, lst = gauss_sieve(basis, rng_seed=args.seed, use_lsf=use_lsf, progress=progress)
        telemetry = {k: lst.meta[k] for k in ("samples", "collisions", "iterations", "certified")}
        telemetry["list_size"] = len(lst)
    report = {"dimension": basis.dimension, "algo": args.algo, "nns": args.nns, "seed": args.seed,
              "norm": v.norm, "coeffs": v.coeffs.tolist(), "vector": v.coords.astype(np.int64).tolist(),
              **telemetry}
    status = EXIT_OK
    if args.verify and _can_verify(basis.dimension):
        ref = enumerate_svp(basis).norm
        report["oracle_norm"] = ref
        report["verified"] = _same_distance(v.norm, ref)
        status = EXIT_OK if report["verified"] else EXIT_MISMATCH
    _emit(report, args.json)
    return status


def cmd_cvp(args) -> int:
    basis = read_basis(args.basis)
    targets = read_targets(args.targets, basis.dimension)
    progress = json_progress() if args.progress else None
    status = EXIT_OK
    results = []
    for k, t in enumerate(targets):
        s = solve_cvp_adaptive(basis, t, rng_seed=args.seed + k, use_lsf=args.nns == "lsf", progress=progress)
        run = solve_cvp_adaptive.last_run
        rec = {"target": k, "distance": s.distance_to(t), "coeffs": s.coeffs.tolist(),
               "iterations": run["iterations"], "peak_list_zero": run["peak_list_zero"],
               "peak_list_target": run["peak_list_target"], "pair_checks": run["pair_checks"]}
        if args.verify and _can_verify(basis.dimension):
            ref = enumerate_cvp(basis, t).distance_to(t)
            rec["oracle_distance"] = ref
            rec["verified"] = _same_distance(rec["distance"], ref)
            if not rec["verified"]:
                status = EXIT_MISMATCH
        results.append(rec)
    report = {"dimension": basis.dimension, "seed": args.seed, "results": results}
    if args.json:
        _emit(report, True)
    else:
        for rec in results:
            _emit(rec, False)
    return status


def _params_from_args(args) -> CvppParams:
    if args.mode == "bdd":
        if args.delta is None:
            raise InputError("--mode bdd needs --delta")
        return CvppParams.bdd(args.delta, args.alpha_override)
    if args.mode == "approx":
        if args.kappa is None:
            raise InputError("--mode approx needs --kappa")
        return CvppParams.approx(args.kappa, args.alpha_override)
    return CvppParams.exact(args.alpha_override)


def cmd_cvpp_preprocess(args) -> int:
    basis = read_basis(args.basis)
    params = _params_from_args(args)
    progress = json_progress() if args.progress else None
    plist = preprocess(basis, params, rng_seed=args.seed, use_lsf=args.lsf_u is not None,
                       override=args.alpha_override is not None, lsf_u=args.lsf_u or 1.0, progress=progress)
    plist.save(args.out)
    report = {"out": str(args.out), "dimension": basis.dimension, "mode": params.mode, "alpha": plist.alpha,
              "certified": params.certified, "lambda1": plist.lambda1.value,
              "lambda1_source": plist.lambda1.source.value, "list_size": len(plist),
              "lsf_filters": plist.lsf.num_filters if plist.lsf else 0}
    _emit(report, args.json)
    return EXIT_OK


def _beta_histogram(betas, bins=10) -> dict:
    counts, edges = np.histogram(betas, bins=bins)
    return {"edges": [round(float(e), 6) for e in edges], "counts": counts.tolist()}


def cmd_cvpp_query(args) -> int:
    basis = read_basis(args.basis) if args.basis else None
    plist = PreprocessedList.load(args.list, basis)
    targets = read_targets(args.targets, plist.dimension)
    if len(targets) > 1 and not args.batch:
        raise InputError(f"{len(targets)} targets given; pass --batch to query them all")
    stored = plist.metadata.get("params", {})
    mode = args.mode or stored.get("mode", "exact")
    params = CvppParams(plist.alpha, mode, delta=args.delta if args.delta is not None else stored.get("delta"),
                        kappa=args.kappa if args.kappa is not None else stored.get("kappa"))
    status = EXIT_OK
    results = []
    verify = args.verify and _can_verify(plist.dimension)
    for k, t in enumerate(targets):
        s, cert = solve(plist, t, params)
        rec = {"target": k, "distance": s.distance_to(t), "beta": cert.beta, "within_bound": cert.within_bound,
               "reductions": cert.reduction_count, "coeffs": s.coeffs.tolist()}
        if verify:
            ref = enumerate_cvp(plist.basis, t).distance_to(t)
            rec["oracle_distance"] = ref
            if mode == "approx":
                rec["verified"] = rec["distance"] <= params.kappa * ref * (1 + 1e-9) + 1e-12
            else:
                rec["verified"] = _same_distance(rec["distance"], ref)
            if not rec["verified"]:
                status = EXIT_MISMATCH
        results.append(rec)
    betas = [r["beta"] for r in results]
    report = {"dimension": plist.dimension, "alpha": plist.alpha, "mode": mode, "queries": len(results),
              "results": results, "beta_histogram": _beta_histogram(betas)}
    if verify:
        report["success_rate"] = float(np.mean([r["verified"] for r in results]))
    if args.json:
        _emit(report, True)
    else:
        for rec in results:
            _emit({k: v for k, v in rec.items() if k != "coeffs"}, False)
        _emit({"queries": len(results), "beta_histogram": report["beta_histogram"],
               **({"success_rate": report["success_rate"]} if verify else {})}, False)
    return status


def _point_row(problem: str, param, u):
    if problem == "adaptive":
        p = asy.adaptive_exponents() if u is None else asy.adaptive_tradeoff(u)
        return (p.space_exp, p.preproc_exp, p.query_exp, math.nan if u is None else u)
    lo, _ = asy.curve_u_range(problem, param)
    u = lo if u is None else u
    if problem == "cvpp":
        p = asy.cvpp_tradeoff(u)
    elif problem == "bdd":
        p = asy.bdd_tradeoff(param, u)
    else:
        p = asy.approx_tradeoff(param, u)
    return (p.space_exp, p.preproc_exp, p.query_exp, u)


def _curve_label(problem: str, param) -> str:
    if problem == "bdd":
        return f"bdd delta={param:g}"
    if problem == "approx":
        return f"approx kappa={param:g}"
    return problem


def cmd_asymptotics(args) -> int:
    problem = args.problem
    if problem in ("bdd", "approx") and args.param is None:
        raise InputError(f"--problem {problem} needs --param")
    param = args.param if problem in ("bdd", "approx") else None
    if args.curve is not None:
        rows = asy.tradeoff_curve(problem, param, args.curve)
    else:
        rows = [_point_row(problem, param, args.u)]
    if args.json:
        keys = asy.CSV_HEADER
        _emit({"problem": problem, "param": param, "rows": [dict(zip(keys, r)) for r in rows]}, True)
    else:
        sys.stdout.write(asy.to_csv(rows))
    if args.plot:
        from .plotting import plot_tradeoff

        n = args.curve or 50
        curves = {_curve_label(problem, param): asy.tradeoff_curve(problem, param, n)}
        if problem != "cvpp":
            curves["cvpp"] = asy.tradeoff_curve("cvpp", None, n)
        plot_tradeoff(curves, args.plot)
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = {"seed": args.seed}
    if args.dims:
        config["dims"] = tuple(args.dims)
    if args.trials is not None:
        config["trials"] = args.trials
    if args.targets is not None:
        if args.name not in ("collisions", "bdd-sweep", "kappa-sweep"):
            raise InputError("--targets applies to collisions, bdd-sweep and kappa-sweep")
        config["targets"] = args.targets
    if args.samples is not None:
        if args.name != "lemma2-mc":
            raise InputError("--samples applies to lemma2-mc only")
        config["samples"] = args.samples
    if args.verify:
        if args.name != "listsize":
            raise InputError("--verify applies to listsize only")
        dims = config.get("dims", (30, 35, 40))
        config["verify"] = all(_can_verify(d) for d in dims)
    record = run_experiment(args.name, **config)
    if args.out:
        record.save(args.out)
    if args.plot:
        from .plotting import plot_experiment

        plot_experiment(record, args.plot)
    if args.json:
        sys.stdout.write(record.to_json() + "\n")
    else:
        _emit({"experiment": record.experiment, **record.summary}, False)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sievekit", description="Lattice sieving for SVP, CVP and CVPP.")
    p.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
        sp.add_argument("--json", action="store_true", help="print one JSON object")

    sp = sub.add_parser("svp", help="shortest vector by sieving")
    sp.add_argument("basis", help="basis file")
    sp.add_argument("--algo", choices=("nv", "gauss"), default="gauss")
    sp.add_argument("--nns", choices=("lsf", "brute"), default="brute")
    sp.add_argument("--verify", action="store_true", help="compare with enumeration (d <= 40)")
    sp.add_argument("--progress", action="store_true", help="JSON-lines progress on stderr")
    common(sp)
    sp.set_defaults(func=cmd_svp)

    sp = sub.add_parser("cvp", help="closest vectors by adaptive sieving")
    sp.add_argument("basis")
    sp.add_argument("targets", help="one target per line")
    sp.add_argument("--nns", choices=("lsf", "brute"), default="brute")
    sp.add_argument("--verify", action="store_true")
    sp.add_argument("--progress", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_cvp)

    sp = sub.add_parser("cvpp-preprocess", help="build and save a preprocessed list")
    sp.add_argument("basis")
    sp.add_argument("--out", required=True, help="output list file")
    sp.add_argument("--mode", choices=("exact", "bdd", "approx"), default="exact")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--alpha-override", type=float, help="use this alpha, even below the mode threshold")
    sp.add_argument("--lsf-u", type=float, help="build an LSF index with this u")
    sp.add_argument("--progress", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_cvpp_preprocess)

    sp = sub.add_parser("cvpp-query", help="answer targets from a preprocessed list")
    sp.add_argument("list", help="preprocessed list file")
    sp.add_argument("targets")
    sp.add_argument("--basis", help="check the list against this basis")
    sp.add_argument("--batch", action="store_true", help="query every target in the file")
    sp.add_argument("--verify", action="store_true")
    sp.add_argument("--mode", choices=("exact", "bdd", "approx"))
    sp.add_argument("--delta", type=float)
    sp.add_argument("--kappa", type=float)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_cvpp_query)

    sp = sub.add_parser("asymptotics", help="closed-form exponents and tradeoff curves (CSV)")
    sp.add_argument("--problem", choices=[x.value for x in asy.Problem], default="cvpp")
    sp.add_argument("--param", type=float, help="delta for bdd, kappa for approx")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--u", type=float, help="single point at this u")
    g.add_argument("--curve", type=int, metavar="N", help="N points sampled uniformly in u")
    sp.add_argument("--plot", metavar="FILE", help="also render the curve to an image file")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_asymptotics)

    sp = sub.add_parser("experiment", help="run a named seeded experiment")
    sp.add_argument("--name", required=True, choices=sorted(EXPERIMENTS))
    sp.add_argument("--dims", type=int, nargs="+")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--targets", type=int, help="targets per lattice")
    sp.add_argument("--samples", type=int, help="Monte-Carlo samples (lemma2-mc)")
    sp.add_argument("--verify", action="store_true", help="oracle-check lambda1 (listsize)")
    sp.add_argument("--out", help="write the ExperimentRecord JSON here")
    sp.add_argument("--plot", metavar="FILE", help="render a summary figure")
    common(sp)
    sp.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except (OracleCapError, ListStarvationError, MemoryError) as exc:
        log.error("%s", exc)
        return EXIT_RESOURCE
    except SievekitError as exc:
        # certification and wrong-lattice errors are caller mistakes
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
