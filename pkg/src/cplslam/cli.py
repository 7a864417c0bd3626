"""``cpl-slam`` command-line interface.

Exit codes: 0 certified, 2 solved but not certified, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .certify import CERTIFIED, build_certificate
from .g2o import G2OParseError, parse_g2o, write_g2o
from .graph import GraphValidationError
from .matrices import ReducedQuadraticForm
from .pipeline import SolveConfig, solve
from .synth import CityParams, TreeParams, generate_city, generate_tree, kappa_from_sigma, tau_from_sigma

log = logging.getLogger("cplslam")

EXIT_OK, EXIT_ERROR, EXIT_UNCERTIFIED = 0, 1, 2
RECOVERY_THRESHOLD = 1e-6

BENCH_COLUMNS = [
    "name",
    "kind",
    "param",
    "value",
    "seed",
    "n",
    "n_l",
    "m",
    "m_l",
    "objective",
    "reference_objective",
    "relative_suboptimality",
    "status",
    "recovered",
    "final_rank",
    "total_seconds",
    "error",
]


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _finite_or_none(x):
    return x if isinstance(x, (int, float)) and math.isfinite(x) else None


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float):
        return _finite_or_none(obj)
    return obj


def write_trajectory_csv(path, translations, rotations, landmarks, pose_ids=None, landmark_ids=None):
    pose_ids = range(len(translations)) if pose_ids is None else pose_ids
    landmark_ids = range(len(landmarks)) if landmark_ids is None else landmark_ids
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "index", "x", "y", "theta"])
        for k, t, z in zip(pose_ids, translations, rotations):
            w.writerow(["pose", k, repr(float(t.real)), repr(float(t.imag)), repr(float(np.angle(z)))])
        for k, s in zip(landmark_ids, landmarks):
            w.writerow(["landmark", k, repr(float(s.real)), repr(float(s.imag)), ""])


# solve ----------------------------------------------------------------------


def cmd_solve(args) -> int:
    try:
        data = parse_g2o(Path(args.input))
    except FileNotFoundError:
        print(f"error: no such file: {args.input}", file=sys.stderr)
        return EXIT_ERROR
    except (G2OParseError, GraphValidationError, UnicodeDecodeError) as exc:
        print(f"error: {args.input}: {exc}", file=sys.stderr)
        return EXIT_ERROR

    cfg = SolveConfig(init=args.init, r0=args.r0, r_max=args.rmax, grad_tol=args.grad_tol, certify=not args.no_certify, seed=args.seed)
    try:
        result = solve(data.graph, cfg, dataset=Path(args.input).stem)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: solve failed: {exc}", file=sys.stderr)
        return EXIT_ERROR

    sol = result.solution
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_g2o(
        data.graph,
        sol.translations,
        sol.rotations,
        sol.landmarks,
        pose_ids=data.pose_ids,
        landmark_ids=data.landmark_ids,
        dest=out / "solution.g2o",
    )
    report = _sanitize(result.report.to_dict())
    (out / "report.json").write_text(json.dumps(report, indent=2, default=_json_default) + "\n")
    write_trajectory_csv(out / "trajectory.csv", sol.translations, sol.rotations, sol.landmarks, data.pose_ids, data.landmark_ids)

    cert = sol.certificate
    print(
        f"{report['dataset']}: objective {sol.objective:.6e}, status {cert.status}, "
        f"relative suboptimality {cert.relative_suboptimality:.3e}, rank {result.staircase.rank}"
    )
    return EXIT_OK if cert.status == CERTIFIED else EXIT_UNCERTIFIED


def cmd_certify(args) -> int:
    """Certify the vertex estimate stored in a g2o file."""
    try:
        data = parse_g2o(Path(args.input))
    except FileNotFoundError:
        print(f"error: no such file: {args.input}", file=sys.stderr)
        return EXIT_ERROR
    except (G2OParseError, GraphValidationError) as exc:
        print(f"error: {args.input}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if data.initial_rotations is None:
        print("error: the file carries no VERTEX_SE2 estimates to certify", file=sys.stderr)
        return EXIT_ERROR
    form = ReducedQuadraticForm(data.graph)
    cert = build_certificate(form, data.initial_rotations)
    print(json.dumps(_sanitize(cert.as_dict()), indent=2, default=_json_default))
    return EXIT_OK if cert.status == CERTIFIED else EXIT_UNCERTIFIED


# generate -------------------------------------------------------------------


def _generate(kind: str, opts: dict):
    if kind == "city":
        return generate_city(CityParams(**opts))
    return generate_tree(TreeParams(**opts))


def _params_from_args(args) -> dict:
    opts = {"seed": args.seed, "grid_side": args.grid_side, "cell_m": args.cell, "noiseless": args.noiseless, "vmf_convention": args.vmf_convention}
    if args.n is not None:
        opts["n"] = args.n
    if args.sigma_t is not None:
        opts["tau"] = tau_from_sigma(args.sigma_t)
    if args.sigma_r is not None:
        opts["kappa"] = kappa_from_sigma(args.sigma_r)
    if args.kind == "city":
        if args.pc is not None:
            opts["p_C"] = args.pc
    else:
        if args.nl is not None:
            opts["n_l"] = args.nl
        if args.pl is not None:
            opts["p_L"] = args.pl
        if args.sigma_l is not None:
            opts["nu"] = tau_from_sigma(args.sigma_l)
    return opts


def cmd_generate(args) -> int:
    try:
        opts = _params_from_args(args)
        ds = _generate(args.kind, opts)
    except (ValueError, ZeroDivisionError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = Path(args.out or f"{args.kind}_seed{args.seed}.g2o")
    out.parent.mkdir(parents=True, exist_ok=True)
    g = ds.graph
    # measurements plus the ground truth as the vertex estimate
    write_g2o(g, ds.translations, ds.rotations, ds.landmarks, dest=out)
    gt = out.with_name(out.stem + ".gt.g2o")
    text = write_g2o(g, ds.translations, ds.rotations, ds.landmarks)
    gt.write_text("".join(line + "\n" for line in text.splitlines() if line.startswith("VERTEX")))
    print(f"wrote {out} and {gt} (n={g.n}, n_l={g.n_l}, m={g.m}, m_l={g.m_l}, seed={args.seed})")
    return EXIT_OK


# bench ----------------------------------------------------------------------


def _bench_jobs(spec: dict, base: Path) -> list[dict]:
    jobs = []
    for d in spec.get("datasets", []):
        path = Path(d["path"]) if isinstance(d, dict) else Path(d)
        if not path.is_absolute():
            path = base / path
        name = d.get("name", path.stem) if isinstance(d, dict) else path.stem
        ref = d.get("reference_objective") if isinstance(d, dict) else None
        jobs.append({"type": "file", "name": name, "path": str(path), "reference_objective": ref, "init": spec.get("init", "chordal")})
    for sw in spec.get("sweeps", []):
        kind = sw.get("kind", "city")
        param = sw.get("param")
        values = sw.get("values", [None])
        seeds = sw.get("seeds", [0])
        fixed = dict(sw.get("fixed", {}))
        for v in values:
            for seed in seeds:
                jobs.append(
                    {
                        "type": "synth",
                        "name": f"{kind}-{param}={v}-seed{seed}" if param else f"{kind}-seed{seed}",
                        "kind": kind,
                        "param": param,
                        "value": v,
                        "seed": seed,
                        "fixed": fixed,
                        "init": spec.get("init", "chordal"),
                    }
                )
    return jobs


_SIGMA_PARAMS = {"sigma_t": ("tau", tau_from_sigma), "sigma_r": ("kappa", kappa_from_sigma), "sigma_l": ("nu", tau_from_sigma)}


def _synth_opts(kind: str, fixed: dict, param, value, seed) -> dict:
    opts = {"seed": seed}
    items = dict(fixed)
    if param is not None:
        items[param] = value
    for k, v in items.items():
        if k in _SIGMA_PARAMS:
            name, conv = _SIGMA_PARAMS[k]
            opts[name] = conv(v)
        else:
            opts[k] = v
    return opts


def run_bench_job(job: dict) -> dict:
    row = {c: "" for c in BENCH_COLUMNS}
    row.update({"name": job["name"], "kind": job.get("kind", "file"), "param": job.get("param") or "", "value": job.get("value", ""), "seed": job.get("seed", "")})
    try:
        if job["type"] == "file":
            g = parse_g2o(Path(job["path"])).graph
        else:
            g = _generate(job["kind"], _synth_opts(job["kind"], job["fixed"], job["param"], job["value"], job["seed"])).graph
        res = solve(g, SolveConfig(init=job.get("init", "chordal")), dataset=job["name"])
        cert = res.solution.certificate
        ref = job.get("reference_objective")
        row.update(
            {
                "n": g.n,
                "n_l": g.n_l,
                "m": g.m,
                "m_l": g.m_l,
                "objective": repr(res.solution.objective),
                "reference_objective": "" if ref is None else repr(float(ref)),
                "relative_suboptimality": repr(cert.relative_suboptimality),
                "status": cert.status,
                "recovered": int(cert.relative_suboptimality < RECOVERY_THRESHOLD),
                "final_rank": res.staircase.rank,
                "total_seconds": f"{res.report.timings['total']:.4f}",
            }
        )
    except Exception as exc:  # a failed run must not stop the batch
        row["error"] = f"{type(exc).__name__}: {exc}"
        row["status"] = "error"
        row["recovered"] = 0
    return row


def bench_workers(n_jobs: int) -> int:
    cap = os.environ.get("CPL_SLAM_THREADS")
    try:
        limit = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        limit = 1
    return max(1, min(limit, max(n_jobs, 1)))


def recovery_summary(rows: list[dict]) -> list[dict]:
    groups: dict = {}
    for r in rows:
        key = (r["kind"], r["param"], r["value"])
        groups.setdefault(key, []).append(r)
    out = []
    for (kind, param, value), rs in groups.items():
        ok = sum(int(r["recovered"] or 0) for r in rs)
        out.append({"kind": kind, "param": param, "value": value, "runs": len(rs), "recovered": ok, "recovery_rate": ok / len(rs)})
    return out


def cmd_bench(args) -> int:
    try:
        spec_path = Path(args.spec)
        spec = json.loads(spec_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read bench spec: {exc}", file=sys.stderr)
        return EXIT_ERROR
    jobs = _bench_jobs(spec, spec_path.parent)
    workers = bench_workers(len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(run_bench_job, jobs))
    else:
        rows = [run_bench_job(j) for j in jobs]

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    out = args.out or spec.get("out")
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(buf.getvalue())
        summ = recovery_summary(rows)
        if summ:
            sp = Path(out).with_name(Path(out).stem + ".summary.csv")
            with open(sp, "w", newline="") as fh:
                sw = csv.DictWriter(fh, fieldnames=list(summ[0]), lineterminator="\n")
                sw.writeheader()
                sw.writerows(summ)
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


# entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpl-slam", description="Planar pose-graph and landmark SLAM with optimality certificates.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a g2o dataset and certify the result")
    s.add_argument("input")
    s.add_argument("--init", choices=["chordal", "odometry"], default="chordal")
    s.add_argument("--r0", type=int, default=2)
    s.add_argument("--rmax", type=int, default=None)
    s.add_argument("--grad-tol", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="out")
    s.add_argument("--no-certify", action="store_true")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("certify", help="certify the vertex estimate stored in a g2o file")
    c.add_argument("input")
    c.set_defaults(func=cmd_certify)

    gen = sub.add_parser("generate", help="generate a synthetic City or Tree dataset")
    gen.add_argument("kind", choices=["city", "tree"])
    gen.add_argument("--n", type=int)
    gen.add_argument("--nl", type=int, help="landmarks (tree)")
    gen.add_argument("--pc", type=float, help="loop-closure probability (city)")
    gen.add_argument("--pl", type=float, help="observation probability (tree)")
    gen.add_argument("--sigma-t", type=float, help="translational RMSE [m]")
    gen.add_argument("--sigma-r", type=float, help="angular RMSE [rad]")
    gen.add_argument("--sigma-l", type=float, help="landmark RMSE [m] (tree)")
    gen.add_argument("--grid-side", type=int, default=25)
    gen.add_argument("--cell", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--noiseless", action="store_true")
    gen.add_argument("--vmf-convention", choices=["rmse", "density"], default="rmse")
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_generate)

    b = sub.add_parser("bench", help="run a benchmark spec (JSON) and emit CSV")
    b.add_argument("spec")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
