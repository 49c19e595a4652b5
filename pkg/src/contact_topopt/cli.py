"""Command line entry point: ``contact-topopt run|check-gradient|mesh-info``."""
import argparse
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .config import build_problem, echo_config, parse_config
from .errors import ContactTopoptError
from .history import History
from .io import write_history_csv, write_vtk

log = logging.getLogger("contact_topopt")

THREADS_ENV = "CONTACT_TOPOPT_THREADS"


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    try:
        n = int(value)
    except ValueError:
        raise ContactTopoptError(f"{THREADS_ENV} must be an integer, got {value!r}") from None
    return threadpool_limits(limits=max(1, n))


def _parser():
    ap = argparse.ArgumentParser(prog="contact-topopt", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the configured optimization")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", type=Path, default=Path("out"))
    run.add_argument("--seed", type=int, default=None, help="override the configured seed")
    chk = sub.add_parser("check-gradient", help="finite-difference checks for the configured problem")
    chk.add_argument("--config", required=True, type=Path)
    info = sub.add_parser("mesh-info", help="summary of the configured mesh")
    info.add_argument("--config", required=True, type=Path)
    return ap


def _runner(algorithm):
    if algorithm == "shape":
        from .shape_opt import run_shape_optimization
        return run_shape_optimization
    if algorithm == "pf-td":
        from .topo_deriv import run_pf_td
        return run_pf_td
    from .phase_field import run_pf1, run_pf2
    return run_pf1 if algorithm == "pf1" else run_pf2


def cmd_run(args):
    config = parse_config(args.config)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(echo_config(config))
    hist = History(config.domain_volume)
    stride = config.snapshot_every
    fixed = {}

    def snapshot(n, *fields):
        if stride and n % stride == 0:
            write_vtk(*_vtk_fields(config.algorithm, n, fields, fixed), out / f"snapshot_{n:04d}.vtk")

    if config.algorithm != "shape":
        fixed["mesh"] = build_problem(config).mesh
    try:
        hist = _runner(config.algorithm)(config, history=hist, callback=snapshot)
    finally:
        write_history_csv(hist, out / "history.csv")
    if hist.mesh is not None:
        fields = {"phi": hist.phi} if hist.phi is not None else {}
        write_vtk(hist.mesh, fields, out / "final.vtk")
    last = hist[-1]
    print(f"{config.algorithm}: {len(hist)} rows, objective {last.objective:.6g}, "
          f"volume fraction {last.volume_fraction:.4f}; results in {out}")
    return 0


def _vtk_fields(algorithm, n, fields, fixed):
    if algorithm == "shape":
        mesh, u = fields
        return mesh, {"displacement": u}
    mesh = fixed["mesh"]
    data = {"phi": fields[0], "displacement": fields[1]}
    if len(fields) > 2:
        data["topological_derivative"] = fields[2]
    return mesh, data


def cmd_check_gradient(args):
    from .checks import gradient_checks
    config = parse_config(args.config)
    ok = True
    for res in gradient_checks(config):
        print(f"{'PASS' if res.passed else 'FAIL'}  {res.name}: {res.detail}")
        ok &= res.passed
    return 0 if ok else 1


def cmd_mesh_info(args):
    from .mesh import mesh_quality
    config = parse_config(args.config)
    mesh = build_problem(config).mesh
    print(f"domain      {config.domain} {config.domain_params}")
    print(f"vertices    {mesh.n_vertices}")
    print(f"triangles   {mesh.n_triangles}")
    for tag in ("D", "N", "C", "F"):
        edges = mesh.edges_with(tag)
        print(f"edges {tag}     {len(edges)} (length {np.sum(mesh.edge_lengths(edges)) if len(edges) else 0.0:.6g})")
    print(f"area        {mesh.volume:.9g}")
    print(f"max edge    {mesh.max_edge_length():.6g} (h = {config.h:g})")
    print(f"quality     {mesh_quality(mesh):.4f}")
    return 0


COMMANDS = {"run": cmd_run, "check-gradient": cmd_check_gradient, "mesh-info": cmd_mesh_info}


def main(argv=None):
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            return COMMANDS[args.command](args)
    except ContactTopoptError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
