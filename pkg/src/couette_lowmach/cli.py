"""Command line entry point: ``run``, ``sweep``, ``baseflow``, ``check``.

Exit status: 0 success, 1 verification or run failure, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from .baseflow import BaseFlowError, build_base_flow
from .checkpoint import CheckpointError, read_checkpoint, write_checkpoint
from .config import ConfigError, RunConfig, format_config, parse_config
from .diagnostics import Monitor, check_uniform_bounds, write_csv
from .experiments import epsilon_sweep, stiffness_benchmark
from .solver import CouetteModel, SolverAbort, make_initial_data, run
from .verification import run_checks, summarize

log = logging.getLogger("couette_lowmach")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def build_parser():
    p = _Parser(prog="couette-lowmach",
                description="Compressible Couette perturbation simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log to stderr at INFO")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (("run", "simulate one perturbation and write diagnostics"),
                       ("sweep", "run the eps sweep or the stiffness benchmark"),
                       ("baseflow", "write the base-state profiles as CSV"),
                       ("check", "run the built-in verification items")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", help="key = value configuration file")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       dest="overrides", help="override one configuration key")
        if name == "run":
            s.add_argument("--restart", help="start from this checkpoint")
    return p


def _load_config(args) -> RunConfig:
    text = ""
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    return parse_config(text, args.overrides)


def _prepare_output(cfg):
    os.makedirs(cfg.output_dir, exist_ok=True)
    with open(os.path.join(cfg.output_dir, "run.log"), "w") as fh:
        fh.write("\n".join(cfg.log) + "\n")
    with open(os.path.join(cfg.output_dir, "config.txt"), "w") as fh:
        fh.write(format_config(cfg))


def cmd_run(cfg, args):
    params, grid = cfg.params(), cfg.grid()
    model = CouetteModel(params, grid, dealias_on=cfg.dealias)
    if args.restart:
        init = read_checkpoint(args.restart)
        grid.check(init.phi)
    else:
        init = make_initial_data(params, grid, cfg.amplitudes)
    mon = Monitor(params, grid, model.base, model)
    _prepare_output(cfg)
    try:
        final = run(cfg.solver_config(), params, grid, init, mon, model=model)
    except SolverAbort as exc:
        write_csv(mon.records, os.path.join(cfg.output_dir, "diagnostics.csv"))
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    write_csv(mon.records, os.path.join(cfg.output_dir, "diagnostics.csv"))
    write_checkpoint(final, os.path.join(cfg.output_dir, "final.clmc"))
    first, last = mon.records[0], mon.last
    bounds = check_uniform_bounds(last, params)
    print(f"eps={params.eps:.6g} grid={grid.n1}x{grid.n2} "
          f"records={len(mon.records)} t={last.time:.6g}")
    print(f"weighted norm {first.weighted:.6e} -> {last.weighted:.6e}")
    print(f"entropy {first.entropy:.6e} -> {last.entropy:.6e}")
    print(f"N(t) {last.n_func:.6e}  mass drift {last.mass - first.mass:.3e}")
    print(f"uniform bound constants: l2 {bounds.measured[0]:.4g}, "
          f"grad {bounds.measured[1]:.4g}")
    print(f"output in {cfg.output_dir}")
    return EXIT_OK


def cmd_sweep(cfg, args):
    params, grid = cfg.params(), cfg.grid()
    _prepare_output(cfg)
    out = cfg.output_dir
    if cfg.experiment == "epsilon_sweep":
        table = epsilon_sweep(cfg.eps_list, params, grid, cfg.solver_config(),
                              cfg.amplitudes, cfg.workers)
        with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "sup_gap_rho", "sup_gap_u", "sup_gap_temp", "runtime_s"])
            for r in table.rows:
                w.writerow([repr(r.eps), repr(r.sup_gap_rho), repr(r.sup_gap_u),
                            repr(r.sup_gap_temp), repr(r.runtime_s)])
        parts = []
        for key in ("rho", "u", "temp"):
            fit = table.slopes.get(key)
            parts.append(f"slope_{key}=nan residual_{key}=nan" if fit is None
                         else f"slope_{key}={fit[0]!r} residual_{key}={fit[2]!r}")
        summary = " ".join(parts)
        for r in table.rows:
            if r.error:
                print(f"eps={r.eps}: {r.error}", file=sys.stderr)
        status = EXIT_FAIL if table.failed else EXIT_OK
    else:
        template = params.replace(reynolds=cfg.stiffness_reynolds)
        table = stiffness_benchmark(template, grid, cfg.eps_list)
        with open(os.path.join(out, "stiffness.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "dt_star", "dt_star_over_eps_dx2", "imex_dt",
                        "imex_stable", "imex_seconds_per_step"])
            for r in table.rows:
                w.writerow([repr(r.eps), repr(r.dt_star), repr(r.dt_star_scaled),
                            repr(r.imex_dt), int(r.imex_stable),
                            repr(r.imex_seconds_per_step)])
        slope, _, resid = table.exponent
        summary = f"exponent={slope!r} residual={resid!r}"
        status = EXIT_OK if all(r.imex_stable for r in table.rows) else EXIT_FAIL
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write(summary + "\n")
    print(summary)
    return status


def cmd_baseflow(cfg, args):
    params, grid = cfg.params(), cfg.grid()
    base = build_base_flow(params, grid)
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "baseflow.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x2", "rho_t", "u1_t", "temp_t", "dtemp_t"])
        for row in zip(base.x2, base.rho_t, base.u1_t, base.temp_t, base.dtemp_t):
            w.writerow([repr(float(v)) for v in row])
    print(f"wrote {path}")
    return EXIT_OK


def cmd_check(cfg, args):
    ok, lines = summarize(run_checks(cfg.params(), cfg.grid()))
    for line in lines:
        print(line)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "baseflow": cmd_baseflow,
            "check": cmd_check}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return EXIT_USAGE
    except SystemExit as exc:     # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
    except (OSError, ConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](cfg, args)
    except (CheckpointError, BaseFlowError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverAbort as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main():
    sys.exit(cli_main())
