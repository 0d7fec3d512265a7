"""Command-line interface: gen, build-db, query, eval, constraints, fuse.

Exit codes: 0 success, 2 validation error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import replace
from typing import Dict, Optional, Sequence

import numpy as np

from .config import ConfigError, PipelineConfig, config_from_items, read_key_values
from .evaluation import EvalRecord, evaluate, format_pr_csv, format_report, pr_curve
from .geometry import RigidTransform
from .inventory import (Inventory, InventoryError, global_from_inventory, inventory_from_global,
                        parse_inventory, radius_query, serialize_inventory)
from .pipeline import (DatabaseError, build_database, build_grid_database, export_constraints,
                       format_result, load_database, localize, parse_results, save_database, fuse_sessions)
from .synthetic import (ForestParams, GenerationError, PerturbationParams, generate_forest, perturb_scene,
                        philox, random_transform)

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 2, 3
log = logging.getLogger("treeloc")


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _pose_line(tag: str, key: int, T: RigidTransform) -> str:
    return f"{tag} {key} " + " ".join(repr(float(v)) for v in (*T.translation, *T.quat))


def parse_pose_lines(text: str, tag: str) -> Dict[int, RigidTransform]:
    out = {}
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        p = line.split()
        if p[0] != tag or len(p) != 9:
            raise ValueError(f"line {lineno}: expected '{tag} id tx ty tz qw qx qy qz'")
        v = [float(x) for x in p[2:]]
        out[int(p[1])] = RigidTransform.from_quat(v[:3], v[3:])
    return out


def load_config(path: Optional[str], seed: Optional[int]) -> PipelineConfig:
    cfg = config_from_items(read_key_values(_read(path))) if path else PipelineConfig()
    return cfg.with_seed(seed) if seed is not None else cfg


def forest_params(path: Optional[str], seed: Optional[int]) -> ForestParams:
    kv = read_key_values(_read(path)) if path else {}
    base = ForestParams()
    kw = {}
    ex = list(base.extent)
    dbh = list(base.dbh_range)
    for key, text in kv.items():
        if key == "extent_x":
            ex[0] = float(text)
        elif key == "extent_y":
            ex[1] = float(text)
        elif key == "dbh_min":
            dbh[0] = float(text)
        elif key == "dbh_max":
            dbh[1] = float(text)
        elif key in ("density", "min_spacing", "lean_max", "terrain_amplitude"):
            kw[key] = float(text)
        elif key == "seed":
            kw[key] = int(text)
        else:
            raise ConfigError(f"unknown forest parameter: {key}")
    if seed is not None:
        kw["seed"] = seed
    return replace(base, extent=tuple(ex), dbh_range=tuple(dbh), **kw)


# ------------------------------------------------------------------ commands

def cmd_gen(a) -> int:
    p = forest_params(a.params, a.seed)
    g = generate_forest(p)
    _write(a.out, serialize_inventory(inventory_from_global(g)))
    if a.queries:
        os.makedirs(a.query_dir, exist_ok=True)
        rng = philox(p.seed, 7)
        margin = min(a.radius, min(p.extent) / 2)
        gt = []
        for k in range(a.queries):
            c = rng.uniform((margin, margin), (p.extent[0] - margin, p.extent[1] - margin))
            scene = radius_query(g, c, a.radius, scene_id=k)
            T = random_transform(rng, a.max_tilt, 0.0)
            pert = PerturbationParams(T, center_noise_sigma=a.noise, seed=int(rng.integers(2 ** 31)))
            q = perturb_scene(scene, pert)
            gt.append(_pose_line("GT", k, q.pose))
            q = Inventory(k, RigidTransform.identity(), q.trees)
            _write(os.path.join(a.query_dir, f"query_{k:04d}.dfi"), serialize_inventory(q))
        _write(os.path.join(a.query_dir, "ground_truth.txt"), "\n".join(gt) + "\n")
    return EXIT_OK


def cmd_build_db(a) -> int:
    cfg = load_config(a.config, a.seed)
    invs = [parse_inventory(_read(f)) for f in a.inputs]
    if a.grid is not None:
        if len(invs) != 1:
            raise ValueError("--grid takes exactly one global inventory")
        db = build_grid_database(global_from_inventory(invs[0]), a.grid, a.radius, cfg)
    else:
        db = build_database(invs, cfg)
    save_database(db, a.out)
    log.info("wrote %d scenes to %s", len(db), a.out)
    return EXIT_OK


def cmd_query(a) -> int:
    db = load_database(a.db)
    if a.config or a.seed is not None:
        db.config = load_config(a.config, a.seed)
    lines = []
    for f in a.queries:
        r = localize(parse_inventory(_read(f)), db)
        lines.append(format_result(r))
        log.info("query %d: %.1f us", r.query_id, r.timings["total"])
    _write(a.out, "".join(s + "\n" for s in lines))
    return EXIT_OK


def cmd_eval(a) -> int:
    results = parse_results(_read(a.results))
    gt = parse_pose_lines(_read(a.gt), "GT")
    db = load_database(a.db)
    scene_xy = np.array([s.pose.translation[:2] for s in db.scenes if not s.descriptorless]).reshape(-1, 2)
    records = []
    for r in results:
        if r.query_id not in gt:
            raise ValueError(f"no ground truth for query {r.query_id}")
        qp = gt[r.query_id]
        near = float(np.min(np.hypot(*(scene_xy - qp.translation[:2]).T))) if len(scene_xy) else math.inf
        sp = db.pose_of(r.best_scene_id) if r.best_scene_id is not None else None
        records.append(EvalRecord(r.query_id, qp, r, a.tp_distance, sp, near))
    rep = evaluate(records)
    _write(a.out, format_report(rep))
    if a.pr_csv:
        _write(a.pr_csv, format_pr_csv(pr_curve(records)))
    return EXIT_OK


def cmd_constraints(a) -> int:
    results = parse_results(_read(a.results))
    export_constraints(results, a.min_overlap, a.out)
    return EXIT_OK


def cmd_fuse(a) -> int:
    sessions = [parse_inventory(_read(f)) for f in a.sessions]
    if a.transforms:
        tf = parse_pose_lines(_read(a.transforms), "T")
        missing = [i for i in range(len(sessions)) if i not in tf]
        if missing:
            raise ValueError(f"no transform for session(s) {missing}")
        pairs = [(s, tf[i]) for i, s in enumerate(sessions)]
    else:
        pairs = [(s, s.pose) for s in sessions]
    pairs = [(Inventory(s.scene_id, RigidTransform.identity(), s.trees), T) for s, T in pairs]
    g = fuse_sessions(pairs, a.assoc_radius, a.tau_dbh, a.resolution if a.resolution > 0 else None)
    _write(a.out, serialize_inventory(inventory_from_global(g)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treeloc", description="Tree-based localization toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="synthetic forest (and optional queries) to .dfi")
    p.add_argument("--params", help="key=value forest parameter file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--queries", type=int, default=0, help="number of perturbed query scenes")
    p.add_argument("--query-dir", default="queries")
    p.add_argument("--radius", type=float, default=15.0)
    p.add_argument("--max-tilt", type=float, default=90.0, help="degrees")
    p.add_argument("--noise", type=float, default=0.02, help="center noise sigma, m")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("build-db", help="scene .dfi files or one global .dfi to .tdb")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--grid", type=float, help="grid spacing over a global inventory, m")
    p.add_argument("--radius", type=float, default=15.0)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_db)

    p = sub.add_parser("query", help="localize query .dfi files against a .tdb")
    p.add_argument("queries", nargs="+")
    p.add_argument("--db", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="metrics table and PR curve from results and ground truth")
    p.add_argument("--results", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--tp-distance", type=float, default=5.0)
    p.add_argument("--pr-csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("constraints", help="loop-closure constraints from results")
    p.add_argument("--results", required=True)
    p.add_argument("--min-overlap", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_constraints)

    p = sub.add_parser("fuse", help="merge session inventories into one global .dfi")
    p.add_argument("sessions", nargs="+")
    p.add_argument("--transforms", help="lines 'T index tx ty tz qw qx qy qz'; default: each file's POSE")
    p.add_argument("--assoc-radius", type=float, default=0.5)
    p.add_argument("--tau-dbh", type=float, default=0.1)
    p.add_argument("--resolution", type=float, default=1e-3, help="storage rounding, m; 0 disables")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return a.func(a)
    except OSError as exc:
        print(f"treeloc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ConfigError, InventoryError, DatabaseError, GenerationError) as exc:
        print(f"treeloc: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
