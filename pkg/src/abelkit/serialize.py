"""CSV and JSON artifacts.  Every float is written with 17 significant digits."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .compare import Certificate, Envelope, Hypothesis
from .integrate import Trajectory

__all__ = [
    "fmt",
    "dumps",
    "write_json",
    "read_json",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_sweep_csv",
    "read_sweep_csv",
    "certificate_to_dict",
    "certificate_from_dict",
    "closed_result_to_dict",
    "closed_result_from_dict",
    "ENVELOPE_POINTS",
]

ENVELOPE_POINTS = 2001


def fmt(x: float) -> str:
    """``%.17g`` for finite values; ``inf``, ``-inf`` and ``nan`` otherwise."""
    x = float(x)
    if math.isfinite(x):
        return f"{x:.17g}"
    if math.isnan(x):
        return "nan"
    return "inf" if x > 0 else "-inf"


def _json_float(x: float) -> str:
    if math.isfinite(x):
        text = f"{x:.17g}"
        # keep floats recognisable as floats after a round trip
        return text if any(ch in text for ch in ".en") else text + ".0"
    if math.isnan(x):
        return "NaN"
    return "Infinity" if x > 0 else "-Infinity"


def _encode(obj, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _json_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Fraction):
        return json.dumps(f"{obj.numerator}/{obj.denominator}")
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        # short numeric rows stay on one line
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in seq) and len(seq) <= 4:
            return "[" + ", ".join(_encode(v, indent, level) for v in seq) + "]"
        return "[" + pad + ("," + pad).join(_encode(v, indent, level + 1) for v in seq) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits.

    Non-finite floats use the ``Infinity``/``NaN`` literals that
    :func:`json.loads` accepts.
    """
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def write_trajectory_csv(path, traj: Trajectory) -> Path:
    """Header ``t,y``, one row per accepted sample, then ``# status=...``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["t,y"]
    lines += [f"{fmt(t)},{fmt(y)}" for t, y in zip(traj.t, traj.y)]
    lines.append(f"# status={traj.status}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray, str]:
    """Inverse of :func:`write_trajectory_csv`: ``(t, y, status)``."""
    ts, ys, status = [], [], ""
    for line in Path(path).read_text().splitlines():
        if not line or line == "t,y":
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key == "status":
                status = value
            continue
        t, y = line.split(",")
        ts.append(float(t))
        ys.append(float(y))
    return np.array(ts), np.array(ys), status


def write_sweep_csv(path, rows: Iterable[tuple]) -> Path:
    """Rows of ``(gamma, displacement or status)`` from a displacement sweep."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["gamma,displacement,status"]
    for gamma, value in rows:
        if isinstance(value, (int, float, np.floating)):
            lines.append(f"{fmt(gamma)},{fmt(value)},completed")
        else:
            lines.append(f"{fmt(gamma)},nan,{value}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_sweep_csv(path) -> list[tuple[float, float, str]]:
    rows = []
    for line in Path(path).read_text().splitlines()[1:]:
        if not line:
            continue
        gamma, disp, status = line.split(",", 2)
        rows.append((float(gamma), float(disp), status))
    return rows


# --------------------------------------------------------------------------
# Certificates and closed-solution results
# --------------------------------------------------------------------------


def _subsample(n: int, max_points: int) -> np.ndarray:
    if n <= max_points:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, max_points).round().astype(int))


def _pairs(t, v):
    return None if v is None else [[float(a), float(b)] for a, b in zip(t, v)]


def certificate_to_dict(cert: Certificate, max_points: int = ENVELOPE_POINTS) -> dict:
    """Plain-data form; the envelope is subsampled to ``max_points`` samples."""
    env = None
    if cert.envelope is not None:
        idx = _subsample(len(cert.envelope.t), max_points)
        t = cert.envelope.t[idx]
        lower = None if cert.envelope.lower is None else cert.envelope.lower[idx]
        upper = None if cert.envelope.upper is None else cert.envelope.upper[idx]
        env = {"lower": _pairs(t, lower), "upper": _pairs(t, upper)}
    return {
        "theorem": cert.theorem,
        "verdict": cert.verdict,
        "first_violation": None if cert.first_violation is None else list(cert.first_violation),
        "reason": cert.reason,
        "hypotheses": [
            {"name": h.name, "passed": h.passed, "kind": h.kind, "evidence": h.evidence} for h in cert.hypotheses
        ],
        "envelope": env,
        "grid_spec": cert.grid_spec,
        "initial_interval": None if cert.initial_interval is None else list(cert.initial_interval),
        "extras": cert.extras,
    }


def _unpairs(rows) -> tuple[Optional[np.ndarray], Optional[np.ndarray]]:
    if rows is None:
        return None, None
    arr = np.asarray(rows, dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def certificate_from_dict(data: dict) -> Certificate:
    env = None
    if data.get("envelope"):
        t_lo, lower = _unpairs(data["envelope"].get("lower"))
        t_hi, upper = _unpairs(data["envelope"].get("upper"))
        env = Envelope(t_lo if t_lo is not None else t_hi, lower, upper)
    fv = data.get("first_violation")
    ii = data.get("initial_interval")
    return Certificate(
        theorem=data["theorem"],
        verdict=data["verdict"],
        hypotheses=[
            Hypothesis(h["name"], bool(h["passed"]), h.get("evidence", {}), h.get("kind", "condition"))
            for h in data["hypotheses"]
        ],
        grid_spec=data.get("grid_spec", {}),
        envelope=env,
        first_violation=tuple(fv) if fv is not None else None,
        reason=data.get("reason"),
        initial_interval=tuple(ii) if ii is not None else None,
        extras=data.get("extras", {}),
    )


def closed_result_to_dict(result, max_points: int = ENVELOPE_POINTS) -> dict:
    """``gamma_star``, ``residual``, ``iterations``, the bracket trace (as
    floats and as exact fractions) and the certificate, if any."""
    return {
        "gamma_star": result.gamma_star,
        "residual": result.residual,
        "iterations": result.iterations,
        "converged": result.converged,
        "orientation": result.orientation,
        "stop_reason": result.stop_reason,
        "bracket_history": [[float(lo), float(hi)] for lo, hi in result.bracket_history],
        "bracket_history_exact": [[lo, hi] for lo, hi in result.bracket_history],
        "displacement_history": [[float(a), float(b)] for a, b in result.displacement_history],
        "certificate": None if result.certificate is None else certificate_to_dict(result.certificate, max_points),
    }


def closed_result_from_dict(data: dict) -> dict:
    """Parse a result file; the exact bracket trace comes back as fractions."""
    out = dict(data)
    out["bracket_history_exact"] = [
        (Fraction(lo), Fraction(hi)) for lo, hi in data.get("bracket_history_exact", [])
    ]
    if data.get("certificate") is not None:
        out["certificate"] = certificate_from_dict(data["certificate"])
    return out
