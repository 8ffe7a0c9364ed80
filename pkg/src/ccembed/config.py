"""Plain-text pipeline configuration.

Config files use INI sections: [manifold] and [metric] describe the input
metric (or name a builtin), [bdf] the collar resolution and cutoff, [embed]
the optimizer, [verify] tolerance overrides, [pipeline] the curvature scale
and output directory.  Every tolerance can also be overridden on the
command line with ``--tol name=value``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .builtins import make_builtin
from .embed import OptimizerConfig, default_target_dim
from .errors import CcembedError, ConfigError
from .manifold import ManifoldKind, ModelManifold, collar_torus, disk
from .metric import MetricSpec, make_metric_spec

__all__ = [
    "DEFAULT_TOLERANCES",
    "PipelineConfig",
    "parse_config",
    "parse_tolerance_overrides",
    "default_eps_request",
]

DEFAULT_TOLERANCES: dict[str, float] = {
    "hypothesis": 1e-9,      # strictness of the boundary coefficient gate
    "drift": 1e-8,           # flow depth drift
    "orthogonality": 1e-8,   # normalized flow cross terms
    "quadrature": 1e-10,     # phi integration
    "phi_identity": 1e-8,    # cutoff identity spot check
    "consistency": 1e-9,     # two-way adjusted-tensor assembly
    "isometry": 1e-3,        # compactified isometry residual
    "immersion": 1e-3,       # min singular value of the final Jacobian
    "injectivity": 0.1,      # extrinsic/intrinsic distance ratio
    "transversality": 1e-8,  # boundary dx row norm
    "kappa_match": 2e-3,     # induced vs input curvature at infinity
    "kappa_slack": 1e-6,     # slack on the induced lower bound
}


def default_eps_request(manifold: ModelManifold) -> float:
    """Half the reachable depth of the model's reference bdf."""
    if manifold.kind == ManifoldKind.DISK:
        return 0.5
    if manifold.ends == ("r0",) or manifold.ends == ("rmax",):
        return 0.5 * manifold.r_max
    return 0.125 * manifold.r_max  # two-ended bdf peaks at r_max/4


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one run needs: metric, resolutions, optimizer, tolerances."""

    spec: MetricSpec
    lam: float = 1.0
    eps_request: float | None = None
    n_r: int = 48
    boundary_counts: tuple[int, ...] = (48,)
    cutoff: str = "smoothstep5"
    margin: float = 0.05
    embed: OptimizerConfig | None = None
    tolerances: dict[str, float] = field(default_factory=dict)
    out: str | None = None
    dump_fields: bool = False

    def __post_init__(self):
        if self.lam == 0:
            raise ConfigError("curvature scale lambda must be nonzero")
        if self.n_r < 8 or any(c < 8 for c in self.boundary_counts):
            raise ConfigError("grid resolutions must be at least 8")
        if len(self.boundary_counts) != self.spec.dim - 1:
            raise ConfigError(
                f"need {self.spec.dim - 1} boundary counts for dimension "
                f"{self.spec.dim}, got {len(self.boundary_counts)}")
        if not 0 < self.margin < 1:
            raise ConfigError("margin must lie strictly between 0 and 1")
        if self.eps_request is not None and self.eps_request <= 0:
            raise ConfigError("requested collar depth must be positive")
        for key, val in self.tolerances.items():
            if key not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {key!r}; known: "
                                  f"{', '.join(sorted(DEFAULT_TOLERANCES))}")
            if not (val > 0):
                raise ConfigError(f"tolerance {key!r} must be positive")

    def tol(self, key: str) -> float:
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {key!r}")
        return self.tolerances.get(key, DEFAULT_TOLERANCES[key])

    def embed_config(self) -> OptimizerConfig:
        if self.embed is not None:
            return self.embed
        return OptimizerConfig(n_dim=default_target_dim(self.spec.dim))

    def with_overrides(self, *, out: str | None = None, seed: int | None = None,
                       dump_fields: bool | None = None,
                       tolerances: dict[str, float] | None = None
                       ) -> "PipelineConfig":
        cfg = self
        if out is not None:
            cfg = replace(cfg, out=out)
        if dump_fields is not None:
            cfg = replace(cfg, dump_fields=dump_fields)
        if tolerances:
            merged = dict(cfg.tolerances)
            merged.update(tolerances)
            cfg = replace(cfg, tolerances=merged)
        if seed is not None:
            cfg = replace(cfg, embed=cfg.embed_config().with_seed(seed))
        return cfg


def parse_tolerance_overrides(items) -> dict[str, float]:
    """Parse repeated ``name=value`` strings from the command line."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"tolerance override {item!r} is not name=value")
        key, _, val = item.partition("=")
        key = key.strip()
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {key!r}; known: "
                              f"{', '.join(sorted(DEFAULT_TOLERANCES))}")
        try:
            fval = float(val)
        except ValueError:
            raise ConfigError(f"tolerance {key!r} value {val!r} is not a "
                              f"number") from None
        if not (fval > 0 and math.isfinite(fval)):
            raise ConfigError(f"tolerance {key!r} must be a positive number")
        out[key] = fval
    return out


_KNOWN_KEYS = {
    "manifold": {"kind", "dim", "periods", "r_max", "ends"},
    "metric": {"builtin", "bdf", "file"},   # plus gij entries
    "bdf": {"eps", "n_r", "n_boundary", "cutoff", "margin", "quad_tol"},
    "embed": {"n", "max_iters", "stop_residual", "step_init", "seed",
              "perturb", "weights"},
    "verify": set(DEFAULT_TOLERANCES),
    "pipeline": {"lambda", "out", "dump_fields"},
}


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        if cast is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid "
                          f"{cast.__name__}") from None


def _parse_manifold(parser) -> ModelManifold | None:
    if not parser.has_section("manifold"):
        return None
    kind = _get(parser, "manifold", "kind", str, "disk").strip().lower()
    dim = _get(parser, "manifold", "dim", int, 2)
    if kind == "disk":
        return disk(dim)
    if kind in ("collar-torus", "torus"):
        periods = None
        if parser.has_option("manifold", "periods"):
            periods = tuple(float(p) for p in
                            parser.get("manifold", "periods").split(","))
        r_max = _get(parser, "manifold", "r_max", float, 1.0)
        ends_raw = _get(parser, "manifold", "ends", str, "r0")
        ends = tuple(e.strip() for e in ends_raw.split(",") if e.strip())
        return collar_torus(dim, periods, r_max, ends)
    raise ConfigError(f"[manifold] kind = {kind!r} is not a model manifold")


def _parse_metric(parser, manifold: ModelManifold | None,
                  base_dir: Path) -> MetricSpec:
    if not parser.has_section("metric"):
        raise ConfigError("config needs a [metric] section")
    if parser.has_option("metric", "file"):
        sub_path = base_dir / parser.get("metric", "file")
        sub = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        if not sub.read(sub_path):
            raise ConfigError(f"[metric] file {str(sub_path)!r} not found")
        _check_keys(sub, only={"manifold", "metric"})
        return _parse_metric(sub, _parse_manifold(sub) or manifold, base_dir)
    if parser.has_option("metric", "builtin"):
        name = parser.get("metric", "builtin").strip()
        dim = manifold.dim if manifold is not None else 2
        return make_builtin(name, dim=dim)
    if manifold is None:
        raise ConfigError("inline metrics need a [manifold] section")
    entries = {}
    for key, raw in parser.items("metric"):
        if key == "bdf":
            continue
        entries[key] = raw
    if not entries:
        raise ConfigError("[metric] defines neither builtin nor components")
    bdf = parser.get("metric", "bdf", fallback=None)
    try:
        return make_metric_spec(manifold, entries, bdf=bdf)
    except CcembedError as exc:
        raise ConfigError(f"invalid metric: {exc}") from exc


def _check_keys(parser, only=None):
    for section in parser.sections():
        if only is not None and section not in only:
            raise ConfigError(f"unexpected section [{section}]")
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        allowed = _KNOWN_KEYS[section]
        for key, _ in parser.items(section):
            if key in allowed:
                continue
            if section == "metric" and len(key) == 3 and key[0] == "g":
                continue
            raise ConfigError(f"unknown key {key!r} in section [{section}]")


def parse_config(path) -> PipelineConfig:
    """Read a pipeline configuration file."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not parser.read(path):
        raise ConfigError(f"config file {str(path)!r} not found")
    _check_keys(parser)

    manifold = _parse_manifold(parser)
    spec = _parse_metric(parser, manifold, path.parent)
    m = spec.dim

    n_r = _get(parser, "bdf", "n_r", int, 48)
    nb_raw = _get(parser, "bdf", "n_boundary", str, None)
    if nb_raw is None:
        boundary_counts = (48,) * (m - 1)
    else:
        boundary_counts = tuple(int(c) for c in nb_raw.split(","))
        if len(boundary_counts) == 1 and m - 1 > 1:
            boundary_counts = boundary_counts * (m - 1)

    quad_tol = _get(parser, "bdf", "quad_tol", float, None)

    weights = _get(parser, "embed", "weights", str, "uniform")
    if weights != "uniform":
        raise ConfigError("[embed] weights supports only 'uniform' in "
                          "config files")
    try:
        embed = OptimizerConfig(
            n_dim=_get(parser, "embed", "n", int, default_target_dim(m)),
            max_iters=_get(parser, "embed", "max_iters", int, 20000),
            stop_residual=_get(parser, "embed", "stop_residual", float, 1e-3),
            step_init=_get(parser, "embed", "step_init", float, 1.0),
            seed=_get(parser, "embed", "seed", int, 0),
            perturb=_get(parser, "embed", "perturb", float, 0.01),
        )
    except CcembedError as exc:
        raise ConfigError(f"invalid [embed] settings: {exc}") from exc

    tolerances = {}
    if parser.has_section("verify"):
        for key, raw in parser.items("verify"):
            try:
                tolerances[key] = float(raw)
            except ValueError:
                raise ConfigError(f"[verify] {key} = {raw!r} is not a "
                                  f"number") from None
    if quad_tol is not None:
        tolerances.setdefault("quadrature", quad_tol)

    return PipelineConfig(
        spec=spec,
        lam=_get(parser, "pipeline", "lambda", float, 1.0),
        eps_request=_get(parser, "bdf", "eps", float, None),
        n_r=n_r,
        boundary_counts=boundary_counts,
        cutoff=_get(parser, "bdf", "cutoff", str, "smoothstep5").strip(),
        margin=_get(parser, "bdf", "margin", float, 0.05),
        embed=embed,
        tolerances=tolerances,
        out=_get(parser, "pipeline", "out", str, None),
        dump_fields=_get(parser, "pipeline", "dump_fields", bool, False),
    )
