"""Command pipelines shared by the CLI: theorem dispatch from a
:class:`RunConfig`, artifact writing and the built-in examples."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .catalog import EXAMPLES, example_config
from .closed import STRATEGIES, TOL_CLOSED, Witnesses, certify_closed, find_closed
from .compare import (
    DEFAULT_HORIZON,
    Certificate,
    certify_thm31,
    certify_thm32,
    certify_thm33,
    certify_thm34,
    certify_thm35,
)
from .config import ConfigError, RunConfig
from .errors import PreconditionError
from .global_existence import certify_thm21, certify_thm41, certify_thm42
from .integrate import SolveOptions, solve_ivp, sweep
from .model import Interval
from .quad import DEFAULT_DENSITY
from .serialize import (
    certificate_to_dict,
    closed_result_to_dict,
    fmt,
    write_json,
    write_sweep_csv,
    write_trajectory_csv,
)

__all__ = [
    "THEOREMS",
    "normalize_theorem",
    "certify_config",
    "closed_config",
    "closed_span",
    "write_plot_script",
    "Conclusion",
    "ExampleReport",
    "run_example",
]

THEOREMS = ("2.1", "3.1", "3.2", "3.3", "3.4", "3.5", "4.1", "4.2") + STRATEGIES


def normalize_theorem(name: str) -> str:
    """``"3.1"``, ``"thm3.1"`` and ``"Thm31"`` all give ``"3.1"``; closed
    strategies give their :data:`STRATEGIES` spelling (``"Thm51"``, ``"Cor52"``)."""
    m = re.fullmatch(r"\s*(thm|cor)?\s*(\d)\.?(\d)\s*", name, flags=re.IGNORECASE)
    if not m:
        raise ValueError(f"unknown theorem {name!r}; expected one of {', '.join(THEOREMS)}")
    prefix, major, minor = (m.group(1) or "").lower(), m.group(2), m.group(3)
    if prefix == "cor":
        key = f"Cor{major}{minor}"
    elif major == "5":
        key = f"Thm{major}{minor}"
    else:
        key = f"{major}.{minor}"
    if key not in THEOREMS:
        raise ValueError(f"unknown theorem {name!r}; expected one of {', '.join(THEOREMS)}")
    return key


def _y(cfg: RunConfig, n: int):
    """Reference solution ``y{n}``: a curve if given, else its initial value."""
    for key in (f"y{n}", f"y{n}_init"):
        if key in cfg.witnesses:
            return cfg.witnesses[key]
    raise ConfigError(f"missing witness: y{n} (or y{n}_init)", cfg.source)


def _gamma(cfg: RunConfig, key: str, y) -> float:
    if key in cfg.witnesses:
        return cfg.witnesses[key]
    from .compare import initial_value

    return initial_value(y, cfg.interval.t0 if cfg.interval else 0.0)


def _interval(cfg: RunConfig) -> Interval:
    if cfg.interval is None:
        raise ConfigError("an [interval] table is required", cfg.source)
    return cfg.interval


def closed_span(cfg: RunConfig, T: Optional[float] = None) -> tuple[float, float]:
    """``(t0, T)`` from the argument, ``[closed].T`` or a bounded interval."""
    t0 = cfg.interval.t0 if cfg.interval else 0.0
    if T is None:
        T = cfg.closed.get("T")
    if T is None and cfg.interval is not None and cfg.interval.bounded:
        T = cfg.interval.t1
    if T is None:
        raise ConfigError("missing period: give T on the command line or in [closed]", cfg.source)
    return t0, float(T)


def _witnesses(cfg: RunConfig) -> Witnesses:
    w = cfg.witnesses
    return Witnesses(
        eta=w.get("eta"),
        reference1=cfg.references[0] if len(cfg.references) > 0 else None,
        reference2=cfg.references[1] if len(cfg.references) > 1 else None,
        y1=w.get("y1", w.get("y1_init")),
        y2=w.get("y2", w.get("y2_init")),
        gamma1=w.get("gamma1"),
        gamma2=w.get("gamma2"),
    )


def certify_config(
    cfg: RunConfig,
    theorem: str,
    *,
    density: float = DEFAULT_DENSITY,
    horizon: Optional[float] = None,
    T: Optional[float] = None,
) -> Certificate:
    """Run the certifier for ``theorem`` with the witnesses in ``cfg``.

    Raises
    ------
    ConfigError
        A witness the theorem needs is missing.
    PreconditionError
        Witnesses are present but inconsistent (e.g. ``y1(t0) > y2(t0)``).
    BracketInvalid
        A closed-solution certificate holds but its bracket fails the
        numerical endpoint check.
    """
    key = normalize_theorem(theorem)
    horizon = horizon if horizon is not None else (cfg.horizon if cfg.horizon is not None else DEFAULT_HORIZON)
    common = dict(density=density, horizon=horizon, opts=cfg.solver)
    eq = cfg.equation
    if key == "2.1":
        return certify_thm21(eq, _interval(cfg), gamma=cfg.witnesses.get("gamma"), density=density, horizon=horizon)
    if key in ("3.1", "3.2"):
        y1 = _y(cfg, 1)
        fn = certify_thm31 if key == "3.1" else certify_thm32
        return fn(
            eq, cfg.reference(0), y1, cfg.witness("eta"), _gamma(cfg, "gamma", y1), _interval(cfg), **common
        )
    if key == "3.3":
        y1, y2 = _y(cfg, 1), _y(cfg, 2)
        return certify_thm33(
            eq,
            cfg.reference(0),
            cfg.reference(1),
            y1,
            y2,
            _gamma(cfg, "gamma1", y1),
            _gamma(cfg, "gamma2", y2),
            _interval(cfg),
            **common,
        )
    if key == "3.4":
        direction = cfg.witnesses.get("direction", "below")
        return certify_thm34(eq, cfg.reference(0), _y(cfg, 1), direction, _interval(cfg), **common)
    if key == "3.5":
        return certify_thm35(eq, cfg.reference(0), cfg.reference(1), _y(cfg, 1), _y(cfg, 2), _interval(cfg), **common)
    if key in ("4.1", "4.2"):
        if cfg.partition is None:
            raise ConfigError("missing witness: partition", cfg.source)
        fn = certify_thm41 if key == "4.1" else certify_thm42
        return fn(eq, cfg.witness("eta"), cfg.partition, horizon, density=density)
    t0, T = closed_span(cfg, T)
    try:
        return certify_closed(eq, t0, T, key, _witnesses(cfg), density=density, opts=cfg.solver).certificate
    except PreconditionError as exc:
        if str(exc).startswith("missing witness"):
            raise ConfigError(str(exc), cfg.source) from None
        raise


def closed_config(
    cfg: RunConfig,
    strategy: Optional[str] = None,
    T: Optional[float] = None,
    *,
    density: float = DEFAULT_DENSITY,
    tol_closed: float = TOL_CLOSED,
):
    """Certify then bisect; returns ``(ClosedCertification, result or None)``.

    The result is ``None`` when the certificate does not hold.
    """
    strategy = strategy or cfg.closed.get("strategy")
    if strategy is None:
        raise ConfigError("missing strategy: give --strategy or [closed].strategy", cfg.source)
    key = normalize_theorem(strategy)
    if key not in STRATEGIES:
        raise ValueError(f"{strategy!r} is not a closed-solution strategy ({', '.join(STRATEGIES)})")
    t0, T = closed_span(cfg, T)
    try:
        cc = certify_closed(cfg.equation, t0, T, key, _witnesses(cfg), density=density, opts=cfg.solver)
    except PreconditionError as exc:
        if str(exc).startswith("missing witness"):
            raise ConfigError(str(exc), cfg.source) from None
        raise
    if cc.bracket is None:
        return cc, None
    res = find_closed(
        cfg.equation,
        t0,
        T,
        cc.bracket,
        orientation=cc.orientation,
        tol_closed=tol_closed,
        opts=cfg.solver,
        certificate=cc.certificate,
    )
    return cc, res


# --------------------------------------------------------------------------
# Plot scripts
# --------------------------------------------------------------------------


def write_plot_script(path, curves: list, *, envelope: Optional[str] = None, xlabel="t", ylabel="y", title="") -> Path:
    """A gnuplot script drawing CSV files that sit next to it.

    ``curves`` are file names with ``x,y`` in the first two columns;
    ``envelope`` names a ``t,lower,upper`` CSV drawn in black.
    """
    path = Path(path)
    lines = [
        "# gnuplot script; run with: gnuplot -p " + path.name,
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key off",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
    ]
    if title:
        lines.append(f"set title '{title}'")
    parts = []
    if envelope is not None:
        parts.append(f"'{envelope}' skip 1 using 1:2 with lines lw 2 lc rgb 'black'")
        parts.append(f"'{envelope}' skip 1 using 1:3 with lines lw 2 lc rgb 'black'")
    parts += [f"'{name}' skip 1 using 1:2 with lines" for name in curves]
    lines.append("plot " + ", \\\n     ".join(parts))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_envelope_csv(path, cert: Certificate) -> Path:
    env = cert.envelope
    lower = env.lower if env.lower is not None else np.full(env.t.shape, -np.inf)
    upper = env.upper if env.upper is not None else np.full(env.t.shape, np.inf)
    rows = ["t,lower,upper"] + [f"{fmt(t)},{fmt(lo)},{fmt(hi)}" for t, lo, hi in zip(env.t, lower, upper)]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(rows) + "\n")
    return path


# --------------------------------------------------------------------------
# Built-in examples
# --------------------------------------------------------------------------


@dataclass
class Conclusion:
    name: str
    verified: bool
    detail: str


@dataclass
class ExampleReport:
    example: str
    conclusions: list = field(default_factory=list)
    files: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return bool(self.conclusions) and all(c.verified for c in self.conclusions)

    def add(self, name, verified, detail=""):
        self.conclusions.append(Conclusion(name, bool(verified), detail))

    def to_dict(self) -> dict:
        return {
            "example": self.example,
            "verified": self.ok,
            "conclusions": [{"name": c.name, "verified": c.verified, "detail": c.detail} for c in self.conclusions],
            "files": [str(f) for f in self.files],
        }


def run_example(
    example_id: str,
    out_dir,
    *,
    density: float = DEFAULT_DENSITY,
    horizon: Optional[float] = None,
    n_trajectories: int = 20,
    slack: float = 1e-6,
    opts: Optional[SolveOptions] = None,
) -> ExampleReport:
    """Certify, simulate and write every artifact for a built-in example.

    Raises
    ------
    KeyError
        Unknown example id.
    """
    spec = EXAMPLES[example_id] if example_id in EXAMPLES else None
    cfg = example_config(example_id)  # raises KeyError for unknown ids
    if opts is not None:
        cfg.solver = opts
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rep = ExampleReport(example_id)

    envelope_file = None
    for theorem in spec.theorems:
        tag = normalize_theorem(theorem).replace(".", "")
        if spec.closed:
            cc, res = closed_config(cfg, theorem, density=density)
            cert = cc.certificate
            rep.files.append(write_json(out / f"certificate_{tag}.json", certificate_to_dict(cert)))
            rep.add(f"{cert.theorem} holds", cert.holds, cert.summary())
            if res is None:
                continue
            rep.files.append(write_json(out / "closed_result.json", closed_result_to_dict(res)))
            rep.files.append(write_trajectory_csv(out / "closed_traj.csv", res.trajectory))
            rep.add(
                "closed solution found",
                res.converged,
                f"gamma*={fmt(res.gamma_star)} residual={fmt(res.residual)} ({res.stop_reason})",
            )
            t0, T = closed_span(cfg)
            lo, hi = float(res.bracket_history[0][0]), float(res.bracket_history[0][1])
            gammas = np.linspace(lo, hi, 201)
            rows = [(g, v if isinstance(v, float) else str(v)) for g, v in sweep(cfg.equation, t0, T, gammas, cfg.solver)]
            rep.files.append(write_sweep_csv(out / "sweep.csv", rows))
        else:
            cert = certify_config(cfg, theorem, density=density, horizon=horizon)
            rep.files.append(write_json(out / f"certificate_{tag}.json", certificate_to_dict(cert)))
            rep.add(f"{cert.theorem} holds", cert.holds, cert.summary())
            if cert.holds and envelope_file is None and cert.envelope is not None:
                envelope_file = write_envelope_csv(out / "envelope.csv", cert)
                rep.files.append(envelope_file)

    # every trajectory from the certified range stays in the stated box
    t0 = cfg.interval.t0
    t_end = cfg.interval.t1
    lo, hi = spec.box
    gammas = np.linspace(spec.initial[0], spec.initial[1], n_trajectories)
    names, worst, completed = [], -math.inf, True
    for i, g in enumerate(gammas):
        traj = solve_ivp(cfg.equation, t0, float(g), t_end, cfg.solver)
        name = f"traj_{i:02d}.csv"
        rep.files.append(write_trajectory_csv(out / name, traj))
        names.append(name)
        completed &= traj.completed
        worst = max(worst, float(np.max(np.maximum(lo - traj.y, traj.y - hi))))
    rep.add(
        f"trajectories stay in [{fmt(lo)}, {fmt(hi)}] up to t={fmt(t_end)}",
        completed and worst <= slack,
        f"{n_trajectories} initial values, largest excursion {fmt(max(worst, 0.0))}, all completed={completed}",
    )
    if spec.closed and (out / "closed_traj.csv").exists():
        names.append("closed_traj.csv")
    rep.files.append(
        write_plot_script(
            out / "plot.gp",
            names,
            envelope=envelope_file.name if envelope_file is not None else None,
            title=f"example {example_id}",
        )
    )
    if spec.closed and (out / "sweep.csv").exists():
        rep.files.append(
            write_plot_script(out / "sweep.gp", ["sweep.csv"], xlabel="gamma", ylabel="y(T) - gamma", title="displacement")
        )
    rep.files.append(write_json(out / "summary.json", rep.to_dict()))
    return rep
