"""``nodalbif`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import continuation as cont
from .config import load_config
from .coupled import circle_solutions, coupled_morse_index, predicted_morse_index, residual
from .diagram import DiagramSpec, load_branch_file, render_svg
from .errors import NodalBifError
from .grid import nodal_count
from .report import cmd_compare_nodal, cmd_verify, report_json, summary_lines
from .scalar import find_w, scalar_morse_index
from .spectral import bifurcation_table, weighted_eigs


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _window(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"window must look like LO:HI, got {text!r}") from exc
    return lo, hi


def _ids(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _emit(args, payload: dict, lines: list[str]):
    print(_dump(payload) if args.json else "\n".join(lines))


def _out_path(cfg, name: str) -> Path:
    path = Path(name)
    if not path.is_absolute() and path.parent == Path("."):
        path = Path(cfg.out_dir) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


# -- subcommands -----------------------------------------------------------------

def do_solve_scalar(args, cfg):
    w = find_w(args.k, cfg.n)
    index, _ = scalar_morse_index(w)
    meta = {"k": w.k, "n": cfg.n, "amplitude": w.amplitude, "residual_sup": w.residual_sup,
            "morse_index": index, "nodal_count": nodal_count(w.profile)}
    if args.out:
        path = _out_path(cfg, args.out)
        if path.suffix == ".csv":
            path.write_text("".join(f"# {k}={meta[k]!r}\n" for k in sorted(meta)) + w.profile.to_csv())
        elif path.suffix == ".json":
            path.write_text(_dump({"metadata": meta, "profile": json.loads(w.profile.to_json())}) + "\n")
        else:
            raise ValueError("--out must end in .csv or .json")
        meta = {**meta, "out": str(path)}
    _emit(args, meta, [f"w_{w.k}: a = {w.amplitude:.12g}, residual = {w.residual_sup:.2e}, "
                       f"nodes = {meta['nodal_count']}, Morse index = {index}"])


def do_spectrum(args, cfg):
    spec = weighted_eigs(find_w(args.k, cfg.n), args.m)
    table = bifurcation_table(spec)
    lines = [f"{'i':>3} {'lambda':>14} {'beta':>14} {'beta_tilde':>14}  window"]
    lines += [f"{r.i:>3} {r.lam:>14.9f} {r.beta:>14.9f} {r.beta_tilde:>14.9f}  {r.window}" for r in table.rows]
    _emit(args, table.to_dict(), lines)


def do_morse(args, cfg):
    if args.beta is None:
        idx, gap = scalar_morse_index(find_w(args.k, cfg.n))
        payload = {"k": args.k, "n": cfg.n, "index": idx, "min_abs_eigenvalue": gap}
        line = f"scalar Morse index of w_{args.k}: {idx} (smallest |eigenvalue| {gap:.4g})"
    else:
        idx = coupled_morse_index(args.k, args.beta, cfg.n)
        pred = predicted_morse_index(args.k, args.beta, cfg.n)
        payload = {"k": args.k, "n": cfg.n, "beta": args.beta, "index": idx, "predicted": pred}
        line = f"coupled Morse index at beta={args.beta}: {idx} (table predicts {pred})"
    _emit(args, payload, [line])


def do_verify_circle(args, cfg):
    thetas = np.linspace(0.0, 2.0 * math.pi, args.samples, endpoint=False)
    worst = max(residual(circle_solutions(args.k, float(t), cfg.n))[2] for t in thetas)
    _emit(args, {"k": args.k, "n": cfg.n, "samples": args.samples, "max_residual": worst},
          [f"circle k={args.k}: max residual over {args.samples} angles = {worst:.3e}"])


def do_continue(args, cfg):
    fam = cont.Family(args.family.upper(), args.k, args.i)
    window = args.window if args.window is not None else fam.window(cfg.n, cfg.width)
    branch = cont.trace_branch(args.k, args.i, fam.kind, n=cfg.n, window=window, max_points=args.max_points)
    path = _out_path(cfg, args.out)
    path.write_text(json.dumps(branch.to_dict(profiles=not args.no_profiles)) + "\n")
    b = branch.betas
    payload = {"family": fam.kind, "k": fam.k, "i": fam.i, "points": len(branch.points),
               "beta_min": float(b.min()), "beta_max": float(b.max()), "stop": branch.meta["stop"],
               "out": str(path)}
    _emit(args, payload, [f"{fam.label}: {len(branch.points)} points, beta in [{b.min():.6g}, {b.max():.6g}], "
                          f"stop = {branch.meta['stop']}, written to {path}"])


def do_diagram(args, cfg):
    branches = [load_branch_file(p) for p in args.branches]
    ks = sorted({b["k"] for b in branches} | set(args.marker_k or []))
    tables = tuple(bifurcation_table(weighted_eigs(find_w(k, cfg.n), args.m)).to_dict() for k in ks)
    spec = DiagramSpec(vertical=args.axis, tables=tables, beta_range=args.beta_range)
    path = _out_path(cfg, args.out)
    path.write_text(render_svg(spec, branches))
    _emit(args, {"out": str(path), "branches": len(branches)}, [f"wrote {path}"])


def do_compare_nodal(args, cfg):
    r = cmd_compare_nodal(args.k, args.i, cfg.n)
    _emit(args, r, [f"n(w_{args.k} - w_{args.i}) = {r['n_diff']}, n(w_{args.k} + w_{args.i}) = {r['n_sum']} "
                    f"(expected {r['expected']})"])


def do_verify(args, cfg):
    report, results = cmd_verify(cfg, args.only)
    path = _out_path(cfg, args.report)
    path.write_text(report_json(report))
    if args.json:
        print(report_json(report), end="")
    else:
        print("\n".join(summary_lines(results)))
        print(f"report written to {path}")
    if not report["passed"]:
        f = report["first_failure"]
        print(f"verify failed: criterion {f['id']} ({f['name']})", file=sys.stderr)
        return 1
    return 0


def do_probe(args, cfg):
    rep = cont.nonexistence_probe(args.P, args.Q, args.window, args.attempts or cfg.probe_attempts, cfg.n, cfg.seed)
    _emit(args, rep.to_dict(), [f"(P,Q)=({args.P},{args.Q}) beta in {list(args.window)}: "
                                f"{len(rep.converged)}/{rep.attempts} converged, {rep.hits} hits "
                                "(no hits is evidence, not proof)"])


# -- parser ---------------------------------------------------------------------

def _common(suppress: bool) -> argparse.ArgumentParser:
    # subcommand copies use SUPPRESS so they do not overwrite flags given before the subcommand
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file", **kw)
    common.add_argument("--n", type=int, help="interior grid points", **kw)
    common.add_argument("--tol", type=float, help="residual tolerance for accepted branch points", **kw)
    common.add_argument("--seed", type=int, help="random seed for probes", **kw)
    common.add_argument("--out-dir", help="directory for output files", **kw)
    common.add_argument("--json", action="store_true", help="machine-readable output", **kw)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common(suppress=True)
    p = argparse.ArgumentParser(prog="nodalbif", parents=[_common(suppress=False)],
                                description="Nodal solutions and their bifurcations for a coupled cubic system on the unit ball.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve-scalar", parents=[common], help="nodal solution w_k")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--out", help="write the profile to FILE.csv or FILE.json")
    s.set_defaults(func=do_solve_scalar)

    s = sub.add_parser("spectrum", parents=[common], help="weighted spectrum and bifurcation table")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--m", type=int)
    s.set_defaults(func=do_spectrum)

    s = sub.add_parser("morse", parents=[common], help="scalar or coupled Morse index")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--beta", type=float, help="coupled index on the synchronized curve")
    s.set_defaults(func=do_morse)

    s = sub.add_parser("verify-circle", parents=[common], help="residual of the beta=1 circle")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--samples", type=int, default=64)
    s.set_defaults(func=do_verify_circle)

    s = sub.add_parser("continue", parents=[common], help="switch onto and continue a branch")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--i", type=int, required=True)
    s.add_argument("--family", choices=["u", "w", "U", "W"], required=True)
    s.add_argument("--window", type=_window, help="LO:HI (use --window=LO:HI for negative LO)")
    s.add_argument("--out", default="branch.json")
    s.add_argument("--no-profiles", action="store_true")
    s.add_argument("--max-points", type=int, default=20000)
    s.set_defaults(func=do_continue)

    s = sub.add_parser("diagram", parents=[common], help="render branch files to SVG")
    s.add_argument("branches", nargs="*")
    s.add_argument("--out", default="diagram.svg")
    s.add_argument("--axis", choices=["sup_u", "sup_v", "h1_norm"], default="sup_u")
    s.add_argument("--marker-k", type=_ids, help="extra k values whose markers are drawn, e.g. 1,2")
    s.add_argument("--m", type=int)
    s.add_argument("--beta-range", type=_window)
    s.set_defaults(func=do_diagram)

    s = sub.add_parser("compare-nodal", parents=[common], help="nodal numbers of w_k -/+ w_i")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--i", type=int, required=True)
    s.set_defaults(func=do_compare_nodal)

    s = sub.add_parser("verify", parents=[common], help="run the acceptance criteria")
    s.add_argument("--only", type=_ids, help="comma-separated criterion ids")
    s.add_argument("--k-max", type=int)
    s.add_argument("--report", default="verify.json")
    s.set_defaults(func=do_verify)

    s = sub.add_parser("probe-nonexistence", parents=[common], help="randomized Newton search for (P,Q) solutions")
    s.add_argument("--P", type=int, required=True)
    s.add_argument("--Q", type=int, required=True)
    s.add_argument("--window", type=_window, default=(3.0, 3.0))
    s.add_argument("--attempts", type=int)
    s.set_defaults(func=do_probe)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, n=args.n, tol=args.tol, seed=args.seed, out_dir=args.out_dir,
                          k_max=getattr(args, "k_max", None))
        rc = args.func(args, cfg)
    except (NodalBifError, ValueError, OSError) as exc:
        print(f"nodalbif {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return int(rc or 0)


if __name__ == "__main__":
    sys.exit(main())
