"""Command-line drivers for the experiment reports (JSON on stdout or ``--out``)."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from ..calibration import read_scenarios_csv, write_scenarios_csv
from ..errors import SmoothROError
from ..solver import METHODS
from . import crossval, setcompare, spath, transship


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays unwrapped, non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_report(report: dict, out: str | None) -> None:
    text = json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def write_table(rows: list[dict], path: str) -> None:
    """Flat CSV of ``rows``; nested values are dropped."""
    flat = [{k: v for k, v in _clean(r).items() if not isinstance(v, (dict, list))} for r in rows]
    fields = sorted({k for r in flat for k in r})
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(flat)


def cmd_set_compare(a) -> dict:
    rep = setcompare.set_comparison_report(a.n, a.p, a.rho, a.samples, a.seed)
    if a.csv:
        write_table(rep["rows"], a.csv)
    return rep


def cmd_transship(a) -> dict:
    rep = transship.transshipment_report(a.n, a.p, a.method, a.seed, a.scenarios, a.instances, a.edges)
    if a.csv:
        write_table(rep["rows"], a.csv)
    return rep


def cmd_spath(a) -> dict:
    D = read_scenarios_csv(a.scenarios)
    inst = spath.ShortestPathInstance.load(a.graph, D)
    edges = None if a.edges == "complete" else np.zeros((0, 2), dtype=np.int64)
    full = spath.ShortestPathInstance(inst.n_nodes, inst.tail, inst.head, D.mean(axis=0), inst.origin,
                                      inst.target, D, edges, a.scheme, a.lam, a.lam2)
    path, cost = spath.robust_shortest_path(full)
    nom, nom_cost = spath.nominal_path(full)
    if a.grid:
        settings = spath.default_settings()
    else:
        settings = [{"family": "smooth_" + a.scheme if a.edges == "complete" else "box_" + a.scheme,
                     "scheme": a.scheme, "lam": a.lam, "lam2": a.lam2, "box": a.edges == "none"}]
    study = spath.shortest_path_study(full, a.splits, a.train_frac, a.seed, settings)
    if a.csv:
        write_table(study["rows"], a.csv)
    return {"scheme": a.scheme, "lambda": a.lam, "lambda2": a.lam2, "edges": a.edges,
            "robust_path": path.tolist(), "robust_cost": cost, "nominal_path": nom.tolist(),
            "nominal_cost": nom_cost, "study": study}


def cmd_crossval(a) -> dict:
    D = read_scenarios_csv(a.scenarios)
    rep = crossval.crossval_membership_study(D, a.folds, a.alpha_grid, a.beta_grid, a.rho_grid, a.omega_grid,
                                             a.seed, level=a.level)
    rep["smooth_smaller"] = crossval.smooth_smaller_at_level(rep)
    if a.csv:
        write_table(rep["smooth"] + rep["ellipsoid"], a.csv)
    return rep


def cmd_synth(a) -> dict:
    if a.kind == "spath":
        inst = spath.synthetic_layered_instance(seed=a.seed, scenarios=a.rows)
        if a.graph is None:
            raise SmoothROError("synth spath needs --graph")
        Path(a.graph).write_text(json.dumps(inst.to_dict(), indent=2) + "\n")
        D = inst.scenarios
    else:
        D = crossval.low_rank_scenarios(S=a.rows, seed=a.seed)
    write_scenarios_csv(a.scenarios, D)
    return {"kind": a.kind, "seed": a.seed, "rows": int(D.shape[0]), "columns": int(D.shape[1]),
            "scenarios": a.scenarios, "graph": a.graph}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smoothro", description="Smooth uncertainty set experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("set-compare", help="volume and diameter table for Toeplitz covariances")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--p", type=float, default=0.01)
    p.add_argument("--rho", type=float, default=0.2)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(run=cmd_set_compare)

    p = sub.add_parser("transship", help="transshipment with affine recourse")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--p", type=_floats, default=[0.01, 0.1, 0.5])
    p.add_argument("--method", choices=METHODS, default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenarios", type=int, default=10_000)
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--edges", choices=("complete", "none"), default="complete")
    p.set_defaults(run=cmd_transship)

    p = sub.add_parser("spath", help="robust shortest path train/test study")
    p.add_argument("--graph", required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--scheme", choices=spath.SCHEMES, default="max")
    p.add_argument("--lambda", dest="lam", type=float, default=0.2)
    p.add_argument("--lambda2", dest="lam2", type=float, default=0.1)
    p.add_argument("--edges", choices=("complete", "none"), default="complete")
    p.add_argument("--splits", type=int, default=10)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--grid", action="store_true", help="run the default calibration grid instead of one setting")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(run=cmd_spath)

    p = sub.add_parser("crossval", help="cross-validated membership of smooth sets and ellipsoids")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--folds", type=int, default=7)
    p.add_argument("--alpha-grid", type=_floats, default=list(crossval.DEFAULT_ALPHA))
    p.add_argument("--beta-grid", type=_floats, default=list(crossval.DEFAULT_BETA))
    p.add_argument("--rho-grid", type=_floats, default=list(crossval.DEFAULT_RHO))
    p.add_argument("--omega-grid", type=_floats, default=list(crossval.DEFAULT_OMEGA))
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(run=cmd_crossval)

    p = sub.add_parser("synth", help="write synthetic stand-in data")
    p.add_argument("kind", choices=("spath", "crossval"))
    p.add_argument("--scenarios", required=True, help="CSV output path")
    p.add_argument("--graph", help="graph JSON output path (spath)")
    p.add_argument("--rows", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(run=cmd_synth)

    for p in sub.choices.values():
        p.add_argument("--out", help="JSON report path (stdout if omitted)")
        if p.prog.split()[-1] != "synth":
            p.add_argument("--csv", help="optional flat CSV table of the report rows")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    if a.command == "synth" and a.rows is None:
        a.rows = 200 if a.kind == "spath" else 42
    try:
        report = a.run(a)
    except (SmoothROError, ValueError, OSError) as exc:
        print(f"smoothro {a.command}: error: {exc}", file=sys.stderr)
        return 2
    write_report(report, a.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
