"""Small symmetric-tensor utilities: frames, pullbacks, closed-form
eigenvalues for 2x2 and 3x3 symmetric matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CcembedError

__all__ = [
    "Frame",
    "SymTensorField",
    "ZeroOneForm",
    "pullback",
    "min_eigenvalue",
    "min_eigenvalue_field",
    "sym_eigenvalues",
]


class Frame(str, Enum):
    """Frame tag for tensor component arrays.

    ``COORDINATE`` components are taken against the chart coordinate frame.
    ``ZERO`` components are taken against the frame rescaled by the boundary
    defining function, in which a conformally compact metric stays finite up
    to the boundary; for the metric itself these equal the coordinate
    components of the compactified metric.
    """

    COORDINATE = "coordinate"
    ZERO = "zero"


@dataclass(frozen=True)
class SymTensorField:
    """Per-node symmetric 2-tensor components plus their frame tag."""

    values: np.ndarray  # (..., m, m)
    frame: Frame

    def __post_init__(self):
        v = self.values
        if v.ndim < 2 or v.shape[-1] != v.shape[-2]:
            raise CcembedError("tensor values must have square trailing axes")
        if not np.allclose(v, np.swapaxes(v, -1, -2), rtol=0.0, atol=1e-12 * (1.0 + np.abs(v).max(initial=0.0))):
            raise CcembedError("tensor values must be symmetric")

    @property
    def dim(self) -> int:
        return self.values.shape[-1]


@dataclass(frozen=True)
class ZeroOneForm:
    """Covector components against the rescaled coframe, one row per node."""

    components: np.ndarray  # (..., m)

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.components).max())


def pullback(h: np.ndarray, jac: np.ndarray) -> np.ndarray:
    """Pull back a symmetric bilinear form through a linear map.

    ``h`` is (..., N, N) and ``jac`` (..., N, m); the result J^T h J is
    symmetrized exactly so downstream eigenvalue code never sees asymmetric
    roundoff.
    """
    h = np.asarray(h, dtype=float)
    jac = np.asarray(jac, dtype=float)
    out = np.einsum("...ab,...ai,...bj->...ij", h, jac, jac, optimize=True)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def _eig_sym2(a: np.ndarray) -> np.ndarray:
    q = 0.5 * (a[..., 0, 0] + a[..., 1, 1])
    s = np.sqrt((0.5 * (a[..., 0, 0] - a[..., 1, 1])) ** 2 + a[..., 0, 1] ** 2)
    return np.stack([q - s, q + s], axis=-1)


def _eig_sym3(a: np.ndarray) -> np.ndarray:
    # Trigonometric closed form for the characteristic cubic.
    a = np.asarray(a, dtype=float)
    p1 = a[..., 0, 1] ** 2 + a[..., 0, 2] ** 2 + a[..., 1, 2] ** 2
    diag = np.stack([a[..., 0, 0], a[..., 1, 1], a[..., 2, 2]], axis=-1)
    q = diag.sum(axis=-1) / 3.0
    p2 = ((diag - q[..., None]) ** 2).sum(axis=-1) + 2.0 * p1
    p = np.sqrt(np.maximum(p2, 0.0) / 6.0)
    eye = np.eye(3)
    safe_p = np.where(p > 0.0, p, 1.0)
    b = (a - q[..., None, None] * eye) / safe_p[..., None, None]
    detb = (b[..., 0, 0] * (b[..., 1, 1] * b[..., 2, 2] - b[..., 1, 2] * b[..., 2, 1])
            - b[..., 0, 1] * (b[..., 1, 0] * b[..., 2, 2] - b[..., 1, 2] * b[..., 2, 0])
            + b[..., 0, 2] * (b[..., 1, 0] * b[..., 2, 1] - b[..., 1, 1] * b[..., 2, 0]))
    r = np.clip(detb / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = q + 2.0 * p * np.cos(phi)
    e3 = q + 2.0 * p * np.cos(phi + 2.0 * math.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    eigs = np.stack([e3, e2, e1], axis=-1)
    # p == 0 means the matrix is already scalar
    scalar = np.broadcast_to((p == 0.0)[..., None], eigs.shape)
    return np.where(scalar, np.broadcast_to(q[..., None], eigs.shape), eigs)


def sym_eigenvalues(a: np.ndarray) -> np.ndarray:
    """All eigenvalues of symmetric matrices of size 1..3, ascending."""
    a = np.asarray(a, dtype=float)
    m = a.shape[-1]
    if m == 1:
        return a[..., 0, :].copy()
    if m == 2:
        return _eig_sym2(a)
    if m == 3:
        return _eig_sym3(a)
    raise CcembedError("closed-form eigenvalues support dimensions 1..3 only")


def min_eigenvalue(a: np.ndarray) -> float:
    """Smallest eigenvalue of one symmetric matrix (size 1..3)."""
    return float(sym_eigenvalues(a)[..., 0])


def min_eigenvalue_field(values: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue per node of an (..., m, m) array."""
    return sym_eigenvalues(values)[..., 0]
