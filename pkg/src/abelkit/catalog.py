"""Built-in example configurations, runnable with ``abelkit example ID``."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import RunConfig, parse_config

__all__ = ["ExampleSpec", "EXAMPLES", "example_config"]


@dataclass(frozen=True)
class ExampleSpec:
    """An embedded configuration and the conclusions it should reproduce.

    ``theorems`` are certified in order and must all hold; ``box`` bounds
    every sampled trajectory started from ``initial`` (evenly spaced).
    """

    id: str
    title: str
    theorems: tuple
    toml: str
    box: tuple
    initial: tuple
    closed: bool = False


_EX31 = """
[equation]
label = "y' - y^3 + y - lambda sin^2 t = 0, lambda = 2 sqrt(3)/9"
a = "-1"
b = "0"
c = "1"
d = "-(2*sqrt(3)/9) * sin(t)^2"

[[references]]
label = "y' - y^3 + y = 0"
a = "-1"
b = "0"
c = "1"
d = "0"

[interval]
t0 = 0
t1 = 50
horizon = "10*pi"
closed_right = true

[partition]
start = 0
period = "pi"

[witnesses]
eta = "sqrt(3)/3"
y1_init = 0
gamma = 0
"""

_EX32 = """
[equation]
label = "y' - y^3 + y + lambda sin^2 t = 0, lambda = 2 sqrt(3)/9"
a = "-1"
b = "0"
c = "1"
d = "(2*sqrt(3)/9) * sin(t)^2"

[[references]]
label = "y' - y^3 + y = 0"
a = "-1"
b = "0"
c = "1"
d = "0"

[interval]
t0 = 0
t1 = 50
horizon = "10*pi"
closed_right = true

[partition]
start = 0
period = "pi"

[witnesses]
eta = "-sqrt(3)/3"
y1_init = 0
gamma = 0
"""

_EX33 = """
[equation]
label = "y' - y^3 + 3y^2 + 3y - 3 - mu sin t = 0, mu = 2"
a = "-1"
b = "3"
c = "3"
d = "-3 - 2*sin(t)"

[[references]]
label = "y' + y^3 + 3y^2 + 3y + 1 = 0"
a = "1"
b = "3"
c = "3"
d = "1"

[[references]]
label = "y' - y^3 + 3y^2 - 3y + 1 = 0"
a = "-1"
b = "3"
c = "-3"
d = "1"

[interval]
t0 = 0
t1 = 50
closed_right = true

[witnesses]
y1_init = -1
y2_init = 1
gamma1 = -1
gamma2 = 1
"""

_EX34 = """
[equation]
label = "y' + mu sin(t) y^3 + 3y^2 + 3y + lambda(t) = 0, mu = 1, lambda = -3.5 + 1.5 sin t"
a = "sin(t)"
b = "3"
c = "3"
d = "-3.5 + 1.5*sin(t)"

[[references]]
label = "y' + y^3 + 3y^2 + 3y + 1 = 0"
a = "1"
b = "3"
c = "3"
d = "1"

[[references]]
label = "y' - y^3 + 3y^2 - 3y + 1 = 0"
a = "-1"
b = "3"
c = "-3"
d = "1"

[interval]
t0 = 0
t1 = 50
closed_right = true

[witnesses]
y1_init = -1
y2_init = 1
"""

# y1 = -1 solves the reference for any nu; the coefficients satisfy both
# pointwise mirrored conditions and a - b + c - d >= 0.
_EX51 = """
[equation]
label = "y' - y^3 + 0.3 sin(t) y^2 + 1.5 y - 0.5 - 0.3 sin(t) = 0"
a = "-1"
b = "0.3*sin(t)"
c = "1.5"
d = "-0.5 - 0.3*sin(t)"

[[references]]
label = "y' + y^3 + nu y^2 + nu y + 1 = 0, nu = 2"
a = "1"
b = "2"
c = "2"
d = "1"

[interval]
t0 = 0
t1 = "2*pi"
closed_right = true

[witnesses]
y1_init = -1

[closed]
strategy = "Cor52"
T = "2*pi"
"""

_R3 = math.sqrt(3.0) / 3.0

EXAMPLES = {
    "3.1": ExampleSpec(
        "3.1", "bounded solutions under a nonpositive forcing", ("3.1", "4.1"), _EX31, (0.0, _R3), (0.0, _R3)
    ),
    "3.2": ExampleSpec("3.2", "mirror image of 3.1", ("3.2", "4.2"), _EX32, (-_R3, 0.0), (-_R3, 0.0)),
    "3.3": ExampleSpec("3.3", "two reference solutions, |y| <= 1", ("3.3",), _EX33, (-1.0, 1.0), (-1.0, 1.0)),
    "3.4": ExampleSpec(
        "3.4", "sign-changing leading coefficient, |y| <= 1", ("3.5",), _EX34, (-1.0, 1.0), (-1.0, 1.0)
    ),
    "5.1": ExampleSpec(
        "5.1", "closed solution from a mirrored reference", ("Cor5.2",), _EX51, (-1.0, 1.0), (-1.0, 1.0), True
    ),
}


def example_config(example_id: str) -> RunConfig:
    try:
        spec = EXAMPLES[example_id]
    except KeyError:
        raise KeyError(f"unknown example {example_id!r}; available: {', '.join(EXAMPLES)}") from None
    return parse_config(spec.toml, source=f"<example {example_id}>")
