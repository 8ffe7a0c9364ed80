"""Model manifolds with boundary and the grids sampled on them.

Two chart models are supported, both of dimension 2 or 3:

* ``disk``: the closed unit ball in coordinates ``y1..ym``; the boundary is
  the unit sphere and the default reference boundary defining function is
  ``1 - |y|^2``.
* ``collar-torus``: ``[0, r_max] x T^(m-1)`` in coordinates
  ``(r, y1..y_(m-1))`` with the angular coordinates periodic; boundary ends
  may be declared at ``r = 0`` and/or ``r = r_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import GridError, SpecValidationError

__all__ = [
    "ManifoldKind",
    "ModelManifold",
    "BoundaryGrid",
    "CollarGrid",
    "make_boundary_grid",
    "make_collar_grid",
    "disk",
    "collar_torus",
]

MIN_NODES_PER_DIRECTION = 8


class ManifoldKind(str, Enum):
    DISK = "disk"
    COLLAR_TORUS = "collar-torus"


@dataclass(frozen=True)
class ModelManifold:
    """Chart model of a compact manifold with boundary."""

    kind: ManifoldKind
    dim: int
    periods: tuple[float, ...] = ()
    r_max: float = 1.0
    ends: tuple[str, ...] = ("r0",)

    def __post_init__(self):
        if not 2 <= self.dim <= 3:
            raise SpecValidationError(f"dimension must be 2 or 3, got {self.dim}")
        if self.kind == ManifoldKind.DISK:
            if self.periods:
                raise SpecValidationError("disk model takes no periods")
        else:
            if len(self.periods) != self.dim - 1:
                raise SpecValidationError(
                    f"collar-torus of dimension {self.dim} needs "
                    f"{self.dim - 1} periods, got {len(self.periods)}")
            if any(p <= 0 for p in self.periods):
                raise SpecValidationError("periods must be positive")
            if self.r_max <= 0:
                raise SpecValidationError("r_max must be positive")
            if not self.ends or any(e not in ("r0", "rmax") for e in self.ends):
                raise SpecValidationError(
                    "ends must be a nonempty subset of {'r0', 'rmax'}")

    @property
    def coord_names(self) -> tuple[str, ...]:
        if self.kind == ManifoldKind.DISK:
            return tuple(f"y{i + 1}" for i in range(self.dim))
        return ("r",) + tuple(f"y{i + 1}" for i in range(self.dim - 1))

    @property
    def angular_names(self) -> tuple[str, ...]:
        if self.kind == ManifoldKind.DISK:
            return ()
        return self.coord_names[1:]

    @property
    def boundary_ends(self) -> tuple[str, ...]:
        if self.kind == ManifoldKind.DISK:
            return ("sphere",)
        return self.ends

    def default_bdf_source(self) -> str:
        if self.kind == ManifoldKind.DISK:
            terms = " - ".join(f"{n}^2" for n in self.coord_names)
            return f"1 - {terms}"
        if self.ends == ("r0",):
            return "r"
        if self.ends == ("rmax",):
            return f"{self.r_max!r} - r"
        return f"r * ({self.r_max!r} - r) / {self.r_max!r}"

    def contains(self, nodes: np.ndarray, slack: float = 1e-9) -> np.ndarray:
        """Boolean mask of chart membership for an (n, dim) array."""
        nodes = np.atleast_2d(nodes)
        if self.kind == ManifoldKind.DISK:
            return np.einsum("ni,ni->n", nodes, nodes) <= 1.0 + slack
        r = nodes[:, 0]
        return (r >= -slack) & (r <= self.r_max + slack)


def disk(dim: int = 2) -> ModelManifold:
    return ModelManifold(ManifoldKind.DISK, dim)


def collar_torus(dim: int = 2, periods: tuple[float, ...] | None = None,
                 r_max: float = 1.0, ends: tuple[str, ...] = ("r0",)) -> ModelManifold:
    if periods is None:
        periods = (2 * math.pi,) * (dim - 1)
    return ModelManifold(ManifoldKind.COLLAR_TORUS, dim, tuple(periods),
                         r_max, tuple(ends))


@dataclass(frozen=True)
class BoundaryGrid:
    """Tensor-product grid on one boundary end.

    ``nodes`` holds chart coordinates of the boundary points, flattened
    row-major over ``shape``.  ``tangents[k, :, j]`` is the chart-coordinate
    velocity of the j-th grid parameter at node k; these seed the variational
    flow that transports the boundary frame into the collar.
    """

    manifold: ModelManifold
    end: str
    params: tuple[np.ndarray, ...]
    periods: tuple[float, ...]
    periodic: tuple[bool, ...]
    nodes: np.ndarray
    tangents: np.ndarray
    shape: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(len(p) for p in self.params))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(p[1] - p[0] for p in self.params)


def make_boundary_grid(manifold: ModelManifold, counts,
                       end: str | None = None) -> BoundaryGrid:
    """Uniform periodic grid on a boundary end of the manifold.

    Only fully periodic boundary charts are gridded: the disk in dimension 2
    (circle boundary) and collar-torus ends in any supported dimension.
    Pointwise boundary evaluation (curvature at infinity, limit scans) does
    not need a grid and works for every model.
    """
    if isinstance(counts, int):
        counts = (counts,)
    counts = tuple(int(c) for c in counts)
    if any(c < MIN_NODES_PER_DIRECTION for c in counts):
        raise GridError(f"need at least {MIN_NODES_PER_DIRECTION} nodes per "
                        f"direction, got {counts}")

    if manifold.kind == ManifoldKind.DISK:
        if end not in (None, "sphere"):
            raise GridError(f"disk model has no end {end!r}")
        if manifold.dim != 2:
            raise GridError("boundary grids require a periodic boundary "
                            "chart; the 2-sphere boundary of the 3-disk "
                            "is not covered by one")
        if len(counts) != 1:
            raise GridError("disk boundary grid takes one count")
        theta = np.linspace(0.0, 2 * math.pi, counts[0], endpoint=False)
        nodes = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        tangents = np.stack([-np.sin(theta), np.cos(theta)], axis=1)[:, :, None]
        return BoundaryGrid(manifold, "sphere", (theta,), (2 * math.pi,),
                            (True,), nodes, tangents)

    if end is None:
        end = manifold.ends[0]
    if end not in manifold.ends:
        raise GridError(f"end {end!r} is not a declared boundary end")
    if len(counts) != manifold.dim - 1:
        raise GridError(f"collar-torus boundary grid takes "
                        f"{manifold.dim - 1} counts")
    axes = tuple(np.linspace(0.0, p, c, endpoint=False)
                 for p, c in zip(manifold.periods, counts))
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = [m.reshape(-1) for m in mesh]
    n = flat[0].size if flat else 1
    r0 = 0.0 if end == "r0" else manifold.r_max
    nodes = np.column_stack([np.full(n, r0)] + flat)
    tangents = np.zeros((n, manifold.dim, manifold.dim - 1))
    for j in range(manifold.dim - 1):
        tangents[:, j + 1, j] = 1.0
    return BoundaryGrid(manifold, end, axes, manifold.periods,
                        (True,) * (manifold.dim - 1), nodes, tangents)


@dataclass(frozen=True)
class CollarGrid:
    """Product grid (flow depth) x (boundary grid) on a collar."""

    manifold: ModelManifold
    boundary: BoundaryGrid
    r_nodes: np.ndarray

    def __post_init__(self):
        r = self.r_nodes
        if len(r) < MIN_NODES_PER_DIRECTION:
            raise GridError(f"need at least {MIN_NODES_PER_DIRECTION} depth "
                            f"nodes, got {len(r)}")
        if r[0] != 0.0:
            raise GridError("depth nodes must start at 0")
        if np.any(np.diff(r) <= 0):
            raise GridError("depth nodes must be strictly increasing")

    @property
    def eps(self) -> float:
        return float(self.r_nodes[-1])

    @property
    def n_r(self) -> int:
        return len(self.r_nodes)

    @property
    def n_b(self) -> int:
        return self.boundary.n_nodes

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_r,) + self.boundary.shape

    @property
    def dr(self) -> float:
        return float(self.r_nodes[1] - self.r_nodes[0])


def make_collar_grid(manifold: ModelManifold, eps: float, n_r: int,
                     boundary_counts, end: str | None = None) -> CollarGrid:
    if eps <= 0:
        raise GridError("collar depth must be positive")
    boundary = make_boundary_grid(manifold, boundary_counts, end)
    r_nodes = np.linspace(0.0, eps, int(n_r))
    return CollarGrid(manifold, boundary, r_nodes)
