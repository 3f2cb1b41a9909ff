"""Command-line interface.

::

    abelkit --config eq.toml integrate --y0 0.3 --t-end 50
    abelkit --config eq.toml certify 3.1
    abelkit --config eq.toml find-closed --strategy Thm51 --T 3.14159
    abelkit --config eq.toml sweep --gamma-min -1 --gamma-max 1 --n 2001
    abelkit example 3.3

Exit codes: 0 success (completed / Holds / closed solution found / example
verified), 1 error, 2 blow-up, 3 hypotheses fail, 4 not applicable,
5 invalid bracket.  Artifacts go to ``--out``, else ``$ABELKIT_OUT``, else
``[outputs].dir`` from the config, else the current directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .catalog import EXAMPLES
from .closed import TOL_CLOSED
from .compare import FAILS, HOLDS
from .config import ConfigError, RunConfig, load_config
from .errors import BlowUpInsideBracket, BracketInvalid, MaxIterExceeded, PreconditionError
from .expr import ExprError
from .integrate import BlowUp, solve_ivp, sweep
from .quad import DEFAULT_DENSITY
from .runner import (
    THEOREMS,
    certify_config,
    closed_config,
    closed_span,
    run_example,
    write_envelope_csv,
    write_plot_script,
)
from .serialize import (
    certificate_to_dict,
    closed_result_to_dict,
    fmt,
    write_json,
    write_sweep_csv,
    write_trajectory_csv,
)

OUT_ENV = "ABELKIT_OUT"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BLOWUP = 2
EXIT_FAILS = 3
EXIT_NOT_APPLICABLE = 4
EXIT_BRACKET = 5


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # repeated on every subcommand so the flags work before or after the verb
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", metavar="PATH", default=default(None), help="TOML run configuration")
    parser.add_argument("--out", metavar="DIR", default=default(None), help=f"output directory (default: ${OUT_ENV})")
    parser.add_argument(
        "--grid-density",
        metavar="N",
        type=float,
        default=default(None),
        help=f"certificate grid points per unit time (default {DEFAULT_DENSITY})",
    )
    parser.add_argument(
        "--horizon", metavar="H", type=float, default=default(None), help="cut-off for unbounded intervals"
    )
    parser.add_argument("--tol", metavar="X", type=float, default=default(None), help="integrator relative tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abelkit", description="Bounds, global existence and closed solutions "
                                     "for Abel equations y' + a y^3 + b y^2 + c y + d = 0.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("integrate", help="solve one initial value problem, write traj.csv")
    _global_flags(p, suppress=True)
    p.add_argument("--y0", type=float, required=True, help="initial value at t0")
    p.add_argument("--t-end", type=float, default=None, help="final time (default: interval end or t0 + horizon)")

    p = sub.add_parser("certify", help="check a theorem's hypotheses, write certificate.json")
    _global_flags(p, suppress=True)
    p.add_argument("theorem", help=f"one of {', '.join(THEOREMS)}")
    p.add_argument("--T", type=float, default=None, help="end time for closed-solution strategies")

    p = sub.add_parser("find-closed", help="certify a bracket and bisect for y(T) = y(t0)")
    _global_flags(p, suppress=True)
    p.add_argument("--strategy", default=None, help="closed-solution strategy (default: [closed].strategy)")
    p.add_argument("--T", type=float, default=None, help="end time (default: [closed].T or interval end)")
    p.add_argument("--tol-closed", type=float, default=TOL_CLOSED, help="accepted |y(T) - gamma*|")

    p = sub.add_parser("sweep", help="displacement y(T) - gamma over a grid of initial values")
    _global_flags(p, suppress=True)
    p.add_argument("--gamma-min", type=float, required=True)
    p.add_argument("--gamma-max", type=float, required=True)
    p.add_argument("--n", type=int, default=201, help="number of initial values")
    p.add_argument("--T", type=float, default=None, help="end time (default: [closed].T or interval end)")

    p = sub.add_parser("example", help="reproduce a built-in example")
    _global_flags(p, suppress=True)
    p.add_argument("id", help=f"one of {', '.join(EXAMPLES)}")
    return parser


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _err(msg: str) -> None:
    print(f"abelkit: {msg}", file=sys.stderr)


def _load(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command", "<command line>")
    cfg = load_config(args.config)
    if args.tol is not None:
        cfg.solver = cfg.solver.with_(rel_tol=args.tol, abs_tol=min(cfg.solver.abs_tol, 1e-2 * args.tol))
    return cfg


def _out_dir(args, cfg: Optional[RunConfig] = None) -> Path:
    if args.out is not None:
        out = Path(args.out)
    elif os.environ.get(OUT_ENV):
        out = Path(os.environ[OUT_ENV])
    elif cfg is not None and cfg.outputs is not None:
        out = cfg.outputs
    else:
        out = Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _density(args) -> float:
    return args.grid_density if args.grid_density is not None else DEFAULT_DENSITY


def _verdict_code(verdict: str) -> int:
    if verdict == HOLDS:
        return EXIT_OK
    return EXIT_FAILS if verdict == FAILS else EXIT_NOT_APPLICABLE


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_integrate(args) -> int:
    cfg = _load(args)
    iv = cfg.interval
    t0 = iv.t0 if iv is not None else 0.0
    t_end = args.t_end
    if t_end is None:
        horizon = args.horizon if args.horizon is not None else cfg.horizon
        if iv is not None and iv.bounded:
            t_end = iv.t1
        elif horizon is not None:
            t_end = t0 + horizon
        else:
            raise ConfigError("no final time: give --t-end, a bounded interval or a horizon", cfg.source)
    traj = solve_ivp(cfg.equation, t0, args.y0, t_end, cfg.solver)
    out = _out_dir(args, cfg)
    path = write_trajectory_csv(out / "traj.csv", traj)
    write_plot_script(out / "traj.gp", [path.name], title=cfg.equation.label or "trajectory")
    print(f"{traj.status}: {len(traj.t)} samples, t_final={fmt(traj.t_final)}, y_final={fmt(traj.y_final)} -> {path}")
    if isinstance(traj.status, BlowUp):
        print(f"blow-up: t_escape={fmt(traj.status.t_escape)} direction={traj.status.direction:+d}", file=sys.stderr)
        return EXIT_BLOWUP
    if not traj.completed:
        _err(str(traj.status))
        return EXIT_ERROR
    return EXIT_OK


def cmd_certify(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    try:
        cert = certify_config(cfg, args.theorem, density=_density(args), horizon=args.horizon, T=args.T)
    except BracketInvalid as exc:
        if exc.certificate is not None:
            write_json(out / "certificate.json", certificate_to_dict(exc.certificate))
        _err(f"bracket invalid: {exc}")
        return EXIT_BRACKET
    path = write_json(out / "certificate.json", certificate_to_dict(cert))
    if cert.envelope is not None:
        write_envelope_csv(out / "envelope.csv", cert)
    print(cert.summary())
    print(f"certificate -> {path}")
    return _verdict_code(cert.verdict)


def cmd_find_closed(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    try:
        cc, res = closed_config(cfg, args.strategy, args.T, density=_density(args), tol_closed=args.tol_closed)
    except BracketInvalid as exc:
        if exc.certificate is not None:
            write_json(out / "certificate.json", certificate_to_dict(exc.certificate))
        _err(f"bracket invalid: {exc}")
        return EXIT_BRACKET
    except BlowUpInsideBracket as exc:
        _err(f"a solution inside the bracket escapes: gamma={fmt(exc.gamma)} t_escape={fmt(exc.t_escape)}")
        return EXIT_ERROR
    except MaxIterExceeded as exc:
        _err(str(exc))
        return EXIT_ERROR
    write_json(out / "certificate.json", certificate_to_dict(cc.certificate))
    if res is None:
        print(cc.certificate.summary())
        return _verdict_code(cc.certificate.verdict)
    path = write_json(out / "closed_result.json", closed_result_to_dict(res))
    traj = write_trajectory_csv(out / "traj.csv", res.trajectory)
    write_plot_script(out / "traj.gp", [traj.name], title="closed solution")
    print(
        f"gamma*={fmt(res.gamma_star)} residual={fmt(res.residual)} iterations={res.iterations} "
        f"({res.stop_reason}) -> {path}"
    )
    if not res.converged:
        _err(f"residual {fmt(res.residual)} exceeds {fmt(args.tol_closed)}")
        return EXIT_ERROR
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if args.n < 2:
        raise ValueError("--n must be at least 2")
    t0, T = closed_span(cfg, args.T)
    gammas = np.linspace(args.gamma_min, args.gamma_max, args.n)
    rows = [(g, v if isinstance(v, float) else str(v)) for g, v in sweep(cfg.equation, t0, T, gammas, cfg.solver)]
    out = _out_dir(args, cfg)
    path = write_sweep_csv(out / "sweep.csv", rows)
    write_plot_script(out / "sweep.gp", [path.name], xlabel="gamma", ylabel="y(T) - gamma", title="displacement")
    values = np.array([v for _, v in rows if isinstance(v, float)])
    changes = int(np.count_nonzero(np.diff(np.sign(values)))) if values.size > 1 else 0
    print(f"{len(rows)} initial values, {values.size} completed, {changes} sign change(s) -> {path}")
    return EXIT_OK


def cmd_example(args) -> int:
    if args.id not in EXAMPLES:
        _err(f"unknown example {args.id!r}; available: {', '.join(EXAMPLES)}")
        return EXIT_ERROR
    out = _out_dir(args) / f"example_{args.id}"
    opts = None
    if args.tol is not None:
        from .integrate import SolveOptions

        opts = SolveOptions(rel_tol=args.tol, abs_tol=1e-2 * args.tol)
    rep = run_example(args.id, out, density=_density(args), horizon=args.horizon, opts=opts)
    for c in rep.conclusions:
        print(f"[{'ok' if c.verified else 'FAILED'}] {c.name}: {c.detail}")
    print(f"example {args.id}: {'verified' if rep.ok else 'NOT verified'} -> {out}")
    return EXIT_OK if rep.ok else EXIT_FAILS


COMMANDS = {
    "integrate": cmd_integrate,
    "certify": cmd_certify,
    "find-closed": cmd_find_closed,
    "sweep": cmd_sweep,
    "example": cmd_example,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, PreconditionError, ExprError, ValueError, OSError) as exc:
        _err(str(exc))
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
