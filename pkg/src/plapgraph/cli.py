"""Command-line entry point.

Exit codes: 0 success, 1 configuration or I/O error, 2 non-convergence,
3 failed self-check.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from importlib import resources
from pathlib import Path

from . import config as cfgmod
from .energy import ConvergenceWarning, EnergyModel, ModelError, estimate_lambda_p
from .graph import GraphError
from .mountain_pass import PathCollapseError, mpa_solve, write_path_profile
from .nehari import ProjectionError, SolveError, ground_state_solve, truncation_profile
from .nonlinearity import NonlinearityError
from .records import summary, write_lambda, write_result
from .verify import format_table, run_checks
from .well import SWEEP_COLUMNS, SweepError, WellError, sweep_csv, theta_sweep

log = logging.getLogger("plapgraph")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_VERIFY = 0, 1, 2, 3
BUNDLED_PREFIX = "bundled:"

# errors that mean the run was misconfigured rather than that it failed to converge
CONFIG_ERRORS = (cfgmod.ConfigError, GraphError, ModelError, NonlinearityError, WellError, OSError)


def bundled_config(name: str) -> Path:
    """Path of a configuration shipped with the package (e.g. ``"k2"``)."""
    path = Path(str(resources.files("plapgraph") / "data" / f"{name}.yaml"))
    if not path.is_file():
        raise cfgmod.ConfigError(f"no bundled config named {name!r}; see 'plapgraph --list-bundled'")
    return path


def list_bundled() -> list[str]:
    root = resources.files("plapgraph") / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def _load(args):
    if args.config is None:
        raise cfgmod.ConfigError("--config is required for this command")
    src = args.config
    path = bundled_config(src[len(BUNDLED_PREFIX):]) if src.startswith(BUNDLED_PREFIX) else Path(src)
    cfg, base = cfgmod.load_config(path)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.workers is not None:
        if args.workers < 1:
            raise cfgmod.ConfigError("--workers must be >= 1")
        updates["workers"] = args.workers
    if updates:
        cfg = cfg.model_copy(update=updates)
    out = Path(args.out) if args.out else Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise cfgmod.ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return cfg, base, out


def _meta(cfg, model: EnergyModel, command: str, full=None, keep=None) -> dict:
    # worker count is deliberately left out: outputs must not depend on it
    meta = {"command": command, "seed": cfg.seed, "p": model.p, "n_vertices": model.n,
            "nonlinearity": model.nonlinearity.to_dict()}
    if cfg.graph.radius is not None and full is not None:
        meta["truncation"] = {"radius": cfg.graph.radius, "center": full.label_of(full.root),
                              "vertices": [full.label_of(int(v)) for v in keep],
                              "unknowns": [bool(s) for s in model.support]}
    return meta


def _emit(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _write_profile(rows, path) -> str:
    lines = ["radius,unknowns,energy,residual,converged"]
    lines += [f"{r.radius},{r.unknowns},{r.energy!r},{r.residual!r},{int(r.converged)}" for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return "truncation profile m(R)\n" + "".join(f"  R={r.radius:<3d} m={r.energy!r}\n" for r in rows)


def cmd_solve(args) -> int:
    cfg, base, out = _load(args)
    model, full, keep = cfgmod.build_model_and_index(cfg, base)
    log.info("ground state on %d vertices, p=%g", model.n, model.p)
    code = EXIT_OK
    try:
        result = ground_state_solve(model, cfgmod.solver_config(cfg))
    except SolveError as exc:
        log.error("%s", exc)
        if exc.best is None:
            return EXIT_NONCONVERGED
        result, code = exc.best, EXIT_NONCONVERGED
    write_result(result, out / "result.json", **_meta(cfg, model, "solve", full, keep))
    text = summary(result, "ground state (Nehari minimisation)", model.support)
    R = cfg.graph.radius
    if R is not None:
        # sensitivity of the level to the truncation radius; a diagnostic, not a bound
        rows = truncation_profile(cfgmod.build_full_model(cfg, base, full), range(max(0, R - 2), R + 1),
                                  full.root, cfgmod.solver_config(cfg))
        text += "\n" + _write_profile(rows, out / "truncation_profile.csv").rstrip()
    (out / "summary.txt").write_text(text + "\n")
    _emit(args, text)
    return code


def cmd_mountain_pass(args) -> int:
    cfg, base, out = _load(args)
    model, full, keep = cfgmod.build_model_and_index(cfg, base)
    direction = cfg.mountain_pass.direction
    if direction is not None:
        direction = cfgmod.vertex_data(full, direction, base, "direction")[keep]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        result, path = mpa_solve(model, config=cfgmod.mountain_pass_config(cfg), direction=direction)
    write_result(result, out / "result.json", **_meta(cfg, model, "mountain-pass", full, keep))
    write_path_profile(path, out / "path_profile.csv")
    text = summary(result, "mountain-pass point", model.support)
    (out / "summary.txt").write_text(text + "\n")
    _emit(args, text)
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def cmd_well_sweep(args) -> int:
    cfg, base, out = _load(args)
    g = cfgmod.build_graph(cfg, base)
    well = cfgmod.build_well(cfg, g, base)
    model = EnergyModel(g, cfg.model.p, well.b, cfgmod.build_nonlinearity(cfg, g, base))
    try:
        sweep = theta_sweep(well, model, cfgmod.solver_config(cfg))
    except SweepError as exc:
        log.error("%s", exc)
        lines = [",".join(SWEEP_COLUMNS)] + [",".join(repr(v) for v in r.as_tuple()) for r in exc.rows]
        (out / "sweep_partial.csv").write_text("\n".join(lines) + "\n")
        return EXIT_NONCONVERGED
    table = sweep_csv(sweep)
    (out / "sweep.csv").write_text(table)
    write_result(sweep.limit, out / "limit.json", **_meta(cfg, model, "well-sweep"))
    text = "potential-well sweep\n" + table + "".join(f"caveat: {c}\n" for c in sweep.caveats)
    (out / "summary.txt").write_text(text)
    _emit(args, text.rstrip())
    return EXIT_OK


def cmd_lambda(args) -> int:
    cfg, base, out = _load(args)
    model, full, keep = cfgmod.build_model_and_index(cfg, base)
    lb = cfg.lambda_
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        est = estimate_lambda_p(model, restarts=lb.restarts, tol=lb.tol, max_iter=lb.max_iter,
                                seed=cfg.seed)
    write_lambda(est, out / "lambda.json", **_meta(cfg, model, "lambda", full, keep))
    text = (f"lambda_p estimate (upper bound)\n  value      {est.value!r}\n"
            f"  residual   {est.residual:.3e}\n  converged  {'yes' if est.converged else 'no'}")
    (out / "summary.txt").write_text(text + "\n")
    _emit(args, text)
    return EXIT_OK if est.converged else EXIT_NONCONVERGED


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else 0
    results = run_checks(seed)
    table = format_table(results)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.txt").write_text(table + "\n")
    _emit(args, table)
    failed = [r.name for r in results if not r.passed and not r.skipped]
    if failed:
        print(f"verify failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {
    "solve": (cmd_solve, "Nehari ground state"),
    "mountain-pass": (cmd_mountain_pass, "mountain-pass critical point and path profile"),
    "well-sweep": (cmd_well_sweep, "potential-well theta sweep and Dirichlet limit"),
    "verify": (cmd_verify, "run the invariant self-check suite"),
    "lambda": (cmd_lambda, "estimate the first nonlinear eigenvalue lambda_p"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plapgraph", description=__doc__.splitlines()[0])
    parser.add_argument("--list-bundled", action="store_true", help="list bundled configs and exit")
    sub = parser.add_subparsers(dest="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH",
                       help=f"YAML run configuration, or {BUNDLED_PREFIX}NAME for a bundled one")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, metavar="N", help="random seed (overrides the config)")
        p.add_argument("--workers", type=int, metavar="N", help="worker threads across seeds")
        p.add_argument("--quiet", action="store_true", help="suppress the printed summary")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_bundled:
        print("\n".join(list_bundled()))
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    fn = COMMANDS[args.command][0]
    try:
        return fn(args)
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProjectionError, PathCollapseError, OverflowError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
