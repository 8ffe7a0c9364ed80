"""Named example metrics used by tests, suites, and configs.

Each name maps to a full metric specification so no fixture files are
needed.  Parameterized names take one positional argument in parentheses,
e.g. ``scaled-disk(4)``.
"""

from __future__ import annotations

import re

from .errors import ConfigError
from .manifold import collar_torus, disk
from .metric import MetricSpec, make_metric_spec

__all__ = ["builtin_names", "make_builtin"]

_PARAM = re.compile(r"^([A-Za-z][A-Za-z-]*)\s*(?:\(\s*([^)]+?)\s*\))?$")


def builtin_names() -> tuple[str, ...]:
    return ("hyperbolic-disk", "scaled-disk(a)", "normal-form-constK(c)",
            "borderline")


def _scaled_disk(a: float, dim: int) -> MetricSpec:
    if a <= 0:
        raise ConfigError("scaled-disk needs a positive scale")
    man = disk(dim)
    comp = {f"g{i}{i}": f"{a * a!r}" for i in range(1, dim + 1)}
    return make_metric_spec(man, comp)


def _normal_form_constk(c: float) -> MetricSpec:
    if not 0 < c:
        raise ConfigError("normal-form-constK needs a positive coefficient")
    man = collar_torus(2)
    comp = {"g11": f"1/{c * c!r}", "g22": "(1 + r/2)^2"}
    return make_metric_spec(man, comp, bdf="r")


def _borderline() -> MetricSpec:
    # transverse coefficient 0.75 + 0.25 cos(y1) touches 1 exactly at y1 = 0
    man = collar_torus(2)
    comp = {"g11": "1/(0.75 + 0.25*cos(y1))", "g22": "1"}
    return make_metric_spec(man, comp, bdf="r")


def make_builtin(name: str, dim: int = 2) -> MetricSpec:
    """Resolve a builtin name (with optional parameter) to a metric spec."""
    m = _PARAM.match(name.strip())
    if not m:
        raise ConfigError(f"malformed builtin name {name!r}")
    base, arg = m.group(1).lower(), m.group(2)

    def need_arg(default: float) -> float:
        if arg is None:
            return default
        try:
            return float(arg)
        except ValueError:
            raise ConfigError(f"builtin parameter {arg!r} is not a number") \
                from None

    if base == "hyperbolic-disk":
        if arg is not None:
            raise ConfigError("hyperbolic-disk takes no parameter")
        return _scaled_disk(2.0, dim)
    if base == "scaled-disk":
        return _scaled_disk(need_arg(4.0), dim)
    if base == "normal-form-constk":
        return _normal_form_constk(need_arg(0.8))
    if base == "borderline":
        if arg is not None:
            raise ConfigError("borderline takes no parameter")
        return _borderline()
    raise ConfigError(f"unknown builtin metric {name!r}; known: "
                      f"{', '.join(builtin_names())}")
