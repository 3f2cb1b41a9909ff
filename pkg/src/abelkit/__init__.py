"""Numerical toolkit for Abel equations of the first kind,

    y' + a(t) y^3 + b(t) y^2 + c(t) y + d(t) = 0,

with coefficients given as expressions in ``t``: adaptive integration with
blow-up detection, certificates for bounds and global existence, and
certified bisection for closed solutions ``y(t0) = y(T)``.
"""

__version__ = "0.1.0"

from .closed import (
    STRATEGIES,
    ClosedCertification,
    ClosedSolutionResult,
    Witnesses,
    certify_closed,
    check_bracket,
    find_closed,
    gamma_upper_bound,
    is_periodic,
    periodic_returns,
    solve_closed,
)
from .compare import (
    FAILS,
    HOLDS,
    NOT_APPLICABLE,
    Certificate,
    Curve,
    Envelope,
    Hypothesis,
    as_curve,
    certify_thm31,
    certify_thm32,
    certify_thm33,
    certify_thm34,
    certify_thm35,
    check_subsolution,
    check_supersolution,
    condition_functional,
    suggest_envelope,
    validate_envelope,
    weighted_functional,
)
from .config import ConfigError, RunConfig, load_config, parse_config
from .errors import BlowUpInsideBracket, BracketInvalid, MaxIterExceeded, NotApplicableError, PreconditionError
from .expr import ExprAst, ExprDomainError, ExprSyntaxError, UnknownIdentifierError, parse
from .global_existence import Partition, certify_thm21, certify_thm41, certify_thm42, suggest_global_envelope
from .integrate import (
    BlowUp,
    Completed,
    DomainError,
    SolveOptions,
    Trajectory,
    displacement,
    solve_ivp,
    solve_many,
    sweep,
)
from .model import AbelEquation, Interval, solve_cubic

__all__ = [name for name in dir() if not name.startswith("_")]
