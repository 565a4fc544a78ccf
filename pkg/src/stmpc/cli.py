"""Command-line entry point: ``stmpc {synthesize,simulate,compare,verify}``."""
import argparse
import sys
from pathlib import Path

from . import checks, traceio
from .config import ExperimentConfig, dump_terminal
from .discretization import DiscretizationTable
from .exceptions import (ConfigError, ContractViolationError, InitialInfeasibilityError,
                         STMPCError)
from .simulator import simulate, simulate_periodic
from .terminal import synthesize_terminal, verify_terminal

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _out_path(args, cfg):
    return args.out if args.out is not None else cfg.output


def cmd_synthesize(cfg, args):
    sys_ = cfg.system()
    # only the delta-step quantities enter the terminal ingredients
    table = DiscretizationTable.build(sys_, cfg.Q, cfg.R, cfg.delta, cfg.N_p, 1)
    ing = synthesize_terminal(sys_, table)
    report = verify_terminal(ing, sys_, table, seed=cfg.seed)
    print("\n".join(report.lines()))
    out = _out_path(args, cfg)
    if out is not None:
        _emit(dump_terminal(ing, report), out)
    else:
        sys.stdout.write(dump_terminal(ing, report))
    return EXIT_OK if report.passed else EXIT_FAIL


def _run(cfg, mode, beta=None):
    sim_cfg = cfg.simulation_config(beta=beta, terminal=cfg.load_terminal())
    if mode == "periodic":
        return simulate_periodic(sim_cfg, keep_solutions=False)
    return simulate(sim_cfg, keep_solutions=False)


def cmd_simulate(cfg, args):
    trace = _run(cfg, args.mode)
    _emit(traceio.trace_to_csv(trace), _out_path(args, cfg))
    return EXIT_OK


def _parse_betas(raw):
    out = []
    for item in raw or []:
        out.extend(float(v) for v in str(item).split(",") if v.strip())
    return out


def cmd_compare(cfg, args):
    betas = _parse_betas(args.beta) if args.beta else list(cfg.betas or [])
    if len(betas) < 2:
        raise ConfigError("compare needs at least two beta values (--beta 1,10)")
    rows = []
    periodic = _run(cfg, "periodic")
    rows.append({"mode": "periodic", "beta": None, "transmissions": periodic.transmissions,
                 "cumulative_stage_cost": periodic.cumulative_stage_cost,
                 "time_to_radius": periodic.time_to_radius()})
    for beta in betas:
        tr = _run(cfg, "self-triggered", beta=beta)
        rows.append({"mode": "self-triggered", "beta": beta,
                     "transmissions": tr.transmissions,
                     "cumulative_stage_cost": tr.cumulative_stage_cost,
                     "time_to_radius": tr.time_to_radius()})
    print(traceio.compare_rows_to_text(rows))
    out = _out_path(args, cfg)
    if out is not None:
        _emit(traceio.compare_rows_to_csv(rows), out)
    return EXIT_OK


def cmd_verify(cfg, args):
    sim_cfg = cfg.simulation_config(terminal=cfg.load_terminal())
    try:
        trace = simulate(sim_cfg)
    except STMPCError as err:
        print(f"FAIL  closed-loop simulation: {err}")
        return EXIT_FAIL
    results = checks.run_suite(trace, seed=cfg.seed)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_FAIL


COMMANDS = {"synthesize": cmd_synthesize, "simulate": cmd_simulate,
            "compare": cmd_compare, "verify": cmd_verify}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stmpc", description="Self-triggered MPC via multiple discretizations.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment configuration")
        p.add_argument("--out", default=None, help="output file (default: config 'output' or stdout)")
        p.add_argument("--seed", type=int, default=None, help="seed for sampled checks")
        if name == "simulate":
            p.add_argument("--mode", choices=("self-triggered", "periodic"),
                           default="self-triggered")
        if name == "compare":
            p.add_argument("--beta", action="append",
                           help="comma-separated beta values; may be repeated")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        return COMMANDS[args.command](cfg, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except InitialInfeasibilityError as err:
        print(f"error: {err} (event 0)", file=sys.stderr)
        return EXIT_FAIL
    except ContractViolationError as err:
        print(f"error: {err} (event {err.context.get('event')})", file=sys.stderr)
        return EXIT_FAIL
    except STMPCError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
