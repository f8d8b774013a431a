"""Command-line interface.

    ringtrap simulate [--state 8+ ...] [--method linear|ode|jumps]
    ringtrap sweep {reorg,corrlen,approx,deloc,eigen,disorder} [--grid ...] [--out DIR]
    ringtrap validate
    ringtrap spectrum

Exit status: 0 on success, 1 for configuration or usage errors, 2 for
numerical failures and output errors.
"""

from __future__ import annotations

import argparse
import copy
import logging
import math
import sys
import time

import numpy as np

from . import __version__
from .config import load_config, parse_config
from .errors import ConfigError, InvalidInputError, NumericalError, OutputError
from .estimator import assemble_model
from .exciton import eigendecompose, build_hamiltonian

log = logging.getLogger("ringtrap")

SWEEP_ALIASES = {
    "reorg": "reorg_sweep", "corrlen": "corrlen_sweep", "approx": "approx_compare",
    "deloc": "deloc_sweep", "eigen": "eigenstate_scan", "disorder": "disorder_study",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def parse_grid(text):
    """``'0,10,20'`` or ``'start:stop:num'`` (inclusive, like linspace); ``inf`` allowed."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise ValueError
            return [float(v) for v in np.linspace(a, b, n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidInputError(f"bad grid {text!r}; use 'a,b,c' or 'start:stop:num'") from exc


def _length(text):
    try:
        return math.inf if text.strip().lower() in ("inf", "infinity") else float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a length: {text!r}") from exc


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML configuration (default: bundled LH1-RC)")
    common.add_argument("--er", type=float, help="reorganisation energy, cm^-1")
    common.add_argument("--rb", type=_length, help="bath correlation length, Angstrom or 'inf'")
    common.add_argument("--temp", type=float, help="temperature, K")
    common.add_argument("--cutoff", type=float, help="Drude cutoff, cm^-1")
    common.add_argument("--state", action="append", help="initial state: m+, m- or eig:k")
    common.add_argument("--method", choices=("linear", "ode", "jumps"), default="linear")
    common.add_argument("--traj", type=int, default=1000, help="trajectories for --method jumps")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--grid", help="'a,b,c' or 'start:stop:num'")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="ringtrap", description="Trapping yield of a light-harvesting ring.")
    p.add_argument("--version", action="version", version=f"ringtrap {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="yield for one parameter point")
    sw = sub.add_parser("sweep", parents=[common], help="run a sweep family")
    sw.add_argument("kind", choices=sorted(SWEEP_ALIASES) + sorted(SWEEP_ALIASES.values()))
    sw.add_argument("--sigma", type=float, help="disorder width, cm^-1 (disorder sweep)")
    sw.add_argument("--n-disorder", type=int, default=20, help="disorder realisations")
    sub.add_parser("validate", parents=[common], help="run the invariant battery")
    sub.add_parser("spectrum", parents=[common], help="print the exciton spectrum")
    return p


def _load(args):
    """Config with the command-line bath overrides folded into the raw mapping,
    so the stored hash describes what was actually run."""
    base = load_config(args.config)
    raw = copy.deepcopy(base.raw)
    bath = raw.setdefault("bath", {}) or {}
    raw["bath"] = bath
    for key, val in (("reorg_energy", args.er), ("corr_length", args.rb),
                     ("temperature", args.temp), ("cutoff", args.cutoff)):
        if val is not None:
            bath[key] = "inf" if isinstance(val, float) and math.isinf(val) else val
    return parse_config(raw)


def _write(records, config, kind, grid, args, wall, warnings=(), diagnostics=None):
    from .io import RunManifest, write_results

    manifest = RunManifest.create(config, kind, grid, args.method, args.seed, wall,
                                  warnings, diagnostics)
    paths = write_results(records, manifest, args.out)
    for path in paths:
        log.info("wrote %s", path)


def cmd_simulate(args):
    from .experiments import SweepRecord, _state_stats

    config = _load(args)
    states = args.state or ["8+", "8-", "32+", "32-"]
    start = time.perf_counter()
    model = assemble_model(config.system, config.bath, bin_tol=config.bin_tol)
    stats = _state_stats(model, states, args.method, args.traj, args.seed)
    wall = time.perf_counter() - start
    print("state,eta_mean,eta_spread,eta_loss,residual,n_samples")
    records = []
    for d, s in stats.items():
        print(f"{d},{s['mean']:.12f},{s['spread']:.3e},{s['loss']:.12f},"
              f"{s['residual']:.3e},{s['n']}")
        records.append(SweepRecord(config.bath.corr_length, d, s["mean"], s["spread"], s["n"],
                                   args.method, config.hash, s["loss"], s["residual"]))
    if args.out:
        _write(records, config, "simulate", [config.bath.corr_length], args, wall)
    return 0


def cmd_sweep(args):
    from .experiments import SweepSpec, run_sweep

    config = _load(args)
    kind = SWEEP_ALIASES.get(args.kind, args.kind)
    fixed = {}
    if args.er is not None:
        fixed["reorg_energy"] = args.er
    if args.rb is not None:
        fixed["corr_length"] = args.rb
    spec = SweepSpec(kind, grid=parse_grid(args.grid) if args.grid else None,
                     states=tuple(args.state) if args.state else None, fixed=fixed,
                     n_disorder=args.n_disorder, seed=args.seed, method=args.method,
                     n_traj=args.traj, threads=args.threads, sigma=args.sigma)
    result = run_sweep(spec, config)
    log.info("%s: %d records in %.1f s", kind, len(result.records), result.wall_time)
    for key, val in result.diagnostics.items():
        if np.isscalar(val):
            print(f"{key}: {val}")
    if args.out:
        _write(result.records, config, kind, spec.grid, args, result.wall_time,
               result.warnings, result.diagnostics)
    else:
        from .io import records_csv

        sys.stdout.write(records_csv(result.records))
    return 0


def cmd_validate(args):
    from .validation import run_all

    checks = run_all(_load(args))
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 2


def cmd_spectrum(args):
    config = _load(args)
    system = config.system
    basis = eigendecompose(build_hamiltonian(system))
    print("index,energy_cm,participation_ratio,trap_population")
    for k in range(basis.n_states):
        v = np.abs(basis.modes[:, k]) ** 2
        print(f"{k},{basis.energies[k]:.6f},{1.0 / np.sum(v ** 2):.4f},"
              f"{np.sum(v[system.trap_sites]):.6f}")
    return 0


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "validate": cmd_validate,
            "spectrum": cmd_spectrum}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"ringtrap: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, OutputError, np.linalg.LinAlgError) as exc:
        print(f"ringtrap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())
