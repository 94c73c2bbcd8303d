"""Command-line front end: ``slowb <command> [flags]``.

Every command writes its results to ``--out`` and prints a short summary.
Exit status is 0 on success, 1 for invalid input (bad flags, ranges or an
unwritable output path) and 2 when the computation itself fails.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

MC_COMMANDS = ("hydrostatic", "hydrodynamic", "walk", "martingale")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(s: str):
    try:
        return [float(v) for v in str(s).replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


def _ints(s: str):
    vals = _floats(s)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")
    return [int(v) for v in vals]


def _theta(s: str):
    out = []
    for v in str(s).replace(" ", "").lower().split(","):
        if v in ("inf", "infinity"):
            out.append(math.inf)
        elif v:
            out += _floats(v)
    return out


def _bool(s):
    if isinstance(s, bool):
        return s
    if str(s).lower() in ("1", "true", "yes", "on"):
        return True
    if str(s).lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def _default_jobs():
    raw = os.environ.get("SLOWB_JOBS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"SLOWB_JOBS must be a positive integer, got {raw!r}")


def build_parser(jobs_default: int = 1) -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="slowb", description="Exclusion process with slow boundary: "
                "simulations, exact oracles and heat-equation solvers.", formatter_class=fmt)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, mc: bool, multi: bool = False):
        sp.add_argument("--config", help="flat 'key = value' file; flags take precedence")
        sp.add_argument("--alpha", type=float, default=0.2, help="left reservoir density in (0,1)")
        sp.add_argument("--beta", type=float, default=0.8, help="right reservoir density in (0,1)")
        if multi:
            sp.add_argument("--N", type=_ints, default=[50], help="system size(s), comma-separated")
            sp.add_argument("--theta", type=_theta, default=[1.0],
                            help="boundary exponent(s), comma-separated")
        else:
            sp.add_argument("--N", type=int, default=50, help="system size")
            sp.add_argument("--theta", type=float, default=1.0, help="boundary exponent")
        sp.add_argument("--out", default=None, help="output file (required)")
        if mc:
            sp.add_argument("--seed", type=int, default=None, help="master RNG seed (required)")
            sp.add_argument("--seed-from-entropy", action="store_true", default=False,
                            help="draw the master seed from OS entropy and report it")
            sp.add_argument("--jobs", type=int, default=jobs_default,
                            help="worker threads (env SLOWB_JOBS)")

    sp = sub.add_parser("hydrostatic", formatter_class=fmt,
                        help="stationary Monte Carlo vs exact mean/covariance")
    common(sp, True, multi=True)
    sp.add_argument("--burn-in", type=float, default=200.0, help="macroscopic burn-in time")
    sp.add_argument("--samples", type=int, default=500, help="stationary snapshots per cell")
    sp.add_argument("--spacing", type=float, default=2.0, help="macroscopic time between snapshots")
    sp.add_argument("--delta", type=float, default=0.05, help="association tolerance")
    sp.add_argument("--format", choices=("csv", "json"), default=None,
                    help="report format (default: from --out extension)")

    sp = sub.add_parser("hydrodynamic", formatter_class=fmt,
                        help="replica-averaged density vs the heat equation")
    common(sp, True, multi=True)
    sp.add_argument("--gamma", default="0.5",
                    help="initial profile: a constant in [0,1] or 'stationary'")
    sp.add_argument("--t", type=_floats, default=[0.1], help="macroscopic times, comma-separated")
    sp.add_argument("--replicas", type=int, default=100, help="independent replicas (>= 50)")
    sp.add_argument("--window", type=int, default=None, help="box width in sites (default ceil(N/16))")
    sp.add_argument("--M", type=int, default=256, help="PDE grid intervals")
    sp.add_argument("--format", choices=("csv", "json"), default=None,
                    help="report format (default: from --out extension)")

    sp = sub.add_parser("covariance", formatter_class=fmt,
                        help="exact stationary covariance on the triangle (CSV x,y,value)")
    common(sp, False)
    sp.add_argument("--mean-out", default=None, help="optional CSV (x,value) of the exact mean")

    sp = sub.add_parser("pde", formatter_class=fmt, help="heat equation on [0,1] (CSV t,u,value)")
    common(sp, False)
    sp.add_argument("--bc", choices=("dirichlet", "robin", "neumann"), default=None,
                    help="boundary condition (default: chosen from --theta)")
    sp.add_argument("--gamma", default="0.5", help="initial profile: constant or 'stationary'")
    sp.add_argument("--M", type=int, default=200, help="grid intervals")
    sp.add_argument("--dt", type=float, default=None, help="time step (default h^2/2)")
    sp.add_argument("--T-final", type=float, default=0.1, help="final time")
    sp.add_argument("--snapshot-every", type=int, default=10, help="steps between snapshots")
    sp.add_argument("--scheme", choices=("crank-nicolson", "implicit"), default="crank-nicolson",
                    help="time stepper")

    sp = sub.add_parser("walk", formatter_class=fmt,
                        help="diagonal occupation time of the absorbed walk on the triangle")
    common(sp, True)
    sp.add_argument("--x", type=int, default=None, help="start x (default N//4)")
    sp.add_argument("--y", type=int, default=None, help="start y (default N//2)")
    sp.add_argument("--replicas", type=int, default=10000, help="walks to run")
    sp.add_argument("--method", choices=("direct", "coupling"), default="direct",
                    help="walk with conductances or the layered coupling walk")

    sp = sub.add_parser("martingale", formatter_class=fmt,
                        help="Dynkin martingale paths of <pi, H>")
    common(sp, True)
    sp.add_argument("--H", choices=("one", "u", "u2", "sin", "cos"), default="sin",
                    help="test function")
    sp.add_argument("--T", type=float, default=0.1, help="final macroscopic time")
    sp.add_argument("--points", type=int, default=20, help="sampling times in (0, T]")
    sp.add_argument("--replicas", type=int, default=1, help="independent paths")
    sp.add_argument("--gamma", default="0.5", help="initial Bernoulli profile (constant)")
    return p


def read_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror or exc}")
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.lstrip("-").replace("-", "_")] = v
    return out


def _apply_config(parser, argv, args):
    """Re-parse with file values as defaults so explicit flags win."""
    values = read_config_file(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for k, v in values.items():
        if k not in actions or k in ("help", "config", "command"):
            raise UsageError(f"{args.config}: unknown key {k!r} for command {args.command}")
        a = actions[k]
        try:
            if isinstance(a, argparse._StoreTrueAction):
                defaults[k] = _bool(v)
            else:
                defaults[k] = a.type(v) if a.type else v
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"{args.config}: bad value for {k}: {exc}")
        if a.choices is not None and defaults[k] not in a.choices:
            raise UsageError(f"{args.config}: {k} must be one of {list(a.choices)}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _check_out(path: str):
    d = os.path.dirname(os.path.abspath(path)) or "."
    if not os.path.isdir(d):
        raise UsageError(f"output directory does not exist: {d}")
    if os.path.isdir(path):
        raise UsageError(f"output path is a directory: {path}")
    if not os.access(d, os.W_OK) or (os.path.exists(path) and not os.access(path, os.W_OK)):
        raise UsageError(f"output path is not writable: {path}")


def _gamma(text: str, bc=None, alpha=None, beta=None):
    from . import pde
    if text == "stationary":
        return pde.stationary_solution(bc, alpha, beta)
    try:
        g = float(text)
    except ValueError:
        raise UsageError(f"gamma must be a constant in [0,1] or 'stationary', got {text!r}")
    if not 0.0 <= g <= 1.0:
        raise UsageError(f"gamma must lie in [0,1], got {g}")
    return g


def _validate(args):
    from .lattice import ModelParams
    Ns = args.N if isinstance(args.N, list) else [args.N]
    thetas = args.theta if isinstance(args.theta, list) else [args.theta]
    if not Ns or not thetas:
        raise UsageError("N and theta lists must be non-empty")
    for N in Ns:
        for th in thetas:
            try:
                ModelParams(N, args.alpha, args.beta, th)
            except ValueError as exc:
                raise UsageError(str(exc))
    for name in ("samples", "replicas", "M", "points", "snapshot_every", "jobs"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be >= 1, got {v}")
    for name in ("burn_in", "delta", "T", "T_final", "spacing", "dt"):
        v = getattr(args, name, None)
        if v is not None and not v > 0:
            raise UsageError(f"--{name.replace('_', '-')} must be > 0, got {v}")
    if args.command == "hydrodynamic":
        from .experiments import MIN_REPLICAS
        if args.replicas < MIN_REPLICAS:
            raise UsageError(f"--replicas must be >= {MIN_REPLICAS}")
        if any(t <= 0 for t in args.t) or not args.t:
            raise UsageError("--t values must be positive")
    if args.command == "walk":
        N = args.N
        x = args.x if args.x is not None else max(1, N // 4)
        y = args.y if args.y is not None else max(x + 1, N // 2)
        if not 0 < x < y < N:
            raise UsageError(f"start point must satisfy 0 < x < y < N, got ({x}, {y})")
        args.x, args.y = x, y
        if args.method == "coupling" and math.isinf(args.theta):
            raise UsageError("the coupling walk needs a finite theta")
    if args.command == "pde" and args.M < 8:
        raise UsageError("--M must be >= 8")
    _check_out(args.out)
    if getattr(args, "mean_out", None):
        _check_out(args.mean_out)


def _resolve_seed(args):
    if args.command not in MC_COMMANDS:
        return None
    if args.seed is None:
        if not args.seed_from_entropy:
            raise UsageError(f"{args.command} needs --seed (or --seed-from-entropy)")
        args.seed = int(np.random.SeedSequence().entropy % 2**63)
    return args.seed


def _fmt(args):
    if args.format:
        return args.format
    return "json" if args.out.lower().endswith(".json") else "csv"


def _echo(args) -> dict:
    return {k: (v if not isinstance(v, float) or math.isfinite(v) else str(v))
            for k, v in vars(args).items()}


def run(args, out=None) -> None:
    out = out or sys.stdout
    from . import experiments as ex
    from . import hydrostatics as hs
    from . import io, pde
    from .lattice import ModelParams, dynkin_martingale
    from ._rng import stream, streams

    cmd = args.command
    if cmd == "hydrostatic":
        rep = ex.hydrostatic_experiment(args.N, args.theta, args.alpha, args.beta, args.burn_in,
                                        args.samples, args.seed, spacing=args.spacing,
                                        delta=args.delta, jobs=args.jobs)
        rep.config["run"] = _echo(args)
        ex.emit_report(rep, _fmt(args), args.out)
        for r in rep.rows:
            print(f"N={r['N']} theta={r['theta']}: sites |z|<=4 {r['frac_sites_z_ok']:.3f}, "
                  f"assoc {r['assoc_prob']:.3f}", file=out)
    elif cmd == "hydrodynamic":
        thetas = args.theta
        if args.gamma == "stationary" and len({pde.bc_for_theta(t) for t in thetas}) > 1:
            raise UsageError("gamma=stationary needs thetas sharing one boundary regime")
        gamma = _gamma(args.gamma, pde.bc_for_theta(thetas[0]), args.alpha, args.beta)
        rep = ex.hydrodynamic_experiment(args.N, thetas, args.alpha, args.beta, gamma, args.t,
                                         args.replicas, args.seed, window=args.window, M=args.M,
                                         gamma_id=args.gamma, jobs=args.jobs)
        rep.config["run"] = _echo(args)
        ex.emit_report(rep, _fmt(args), args.out)
        for r in rep.rows:
            print(f"N={r['N']} theta={r['theta']} t={r['t']}: L1 {r['l1_annealed']:.4f}", file=out)
    elif cmd == "covariance":
        params = ModelParams(args.N, args.alpha, args.beta, args.theta)
        field = hs.covariance_solve(params)
        io.write_covariance(args.out, field)
        if args.mean_out:
            io.write_mean_profile(args.mean_out, hs.mean_profile_closed_form(params))
        vals = field.interior()[2]
        print(f"N={args.N} theta={args.theta}: covariance min {vals.min():.3e}, "
              f"max {vals.max():.3e}", file=out)
    elif cmd == "pde":
        bc = args.bc or pde.bc_for_theta(args.theta)
        gamma = _gamma(args.gamma, bc, args.alpha, args.beta)
        sol = pde.solve_heat(bc, gamma, args.alpha, args.beta, args.M, dt=args.dt,
                             T_final=args.T_final, snapshot_every=args.snapshot_every,
                             scheme=args.scheme)
        io.write_grid_field(args.out, sol)
        print(f"{bc}: {sol.times.size} snapshots to t={sol.times[-1]:.4g}, "
              f"mass {sol.mass()[-1]:.6f}", file=out)
    elif cmd == "walk":
        params = ModelParams(args.N, args.alpha, args.beta, args.theta)
        rng = stream(args.seed, 0)
        u = (args.x, args.y)
        if args.method == "direct":
            d = hs.occupation_time_samples(u, params, args.replicas, rng)
            y = None
        else:
            y, d = hs.coupling_walk_samples(u, params, args.replicas, rng)
        with open(args.out, "w") as fh:
            fh.write("replica,diagonal_time" + (",levels" if y is not None else "") + "\n")
            for i, v in enumerate(d):
                fh.write(f"{i},{float(v)!r}" + (f",{int(y[i])}" if y is not None else "") + "\n")
        ref = hs.occupation_times(args.N, args.theta)[args.x, args.y]
        print(f"mean {d.mean():.5g} +/- {d.std(ddof=1) / np.sqrt(d.size):.2g} "
              f"(exact {ref:.5g})", file=out)
    elif cmd == "martingale":
        from .experiments import DEFAULT_TEST_FUNCTIONS
        params = ModelParams(args.N, args.alpha, args.beta, args.theta)
        H = DEFAULT_TEST_FUNCTIONS[args.H]
        gamma = _gamma(args.gamma)
        t_grid = np.linspace(0.0, args.T, args.points + 1)
        paths = [dynkin_martingale(params, H, t_grid, r, gamma=gamma, test_function_id=args.H)
                 for r in streams(args.seed, args.replicas, 0)]
        if args.replicas == 1:
            io.write_martingale(args.out, paths[0])
        else:
            with open(args.out, "w") as fh:
                fh.write("replica,t,value,quadratic_variation\n")
                for i, s in enumerate(paths):
                    for t, v, q in zip(s.times, s.values, s.quadratic_variation):
                        fh.write(f"{i},{float(t)!r},{float(v)!r},{float(q)!r}\n")
        final = np.array([s.values[-1] for s in paths])
        print(f"M_T mean {final.mean():.4g} over {final.size} path(s)", file=out)
    if args.command in MC_COMMANDS:
        print(f"seed {args.seed}", file=out)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser(_default_jobs())
        args = parser.parse_args(argv)
        if args.config:
            args = _apply_config(parser, argv, args)
        if args.out is None:
            raise UsageError("an output path is required (--out or 'out' in the config file)")
        _resolve_seed(args)
        _validate(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        run(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
