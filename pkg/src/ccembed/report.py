"""Run reports: structured text, delimited dumps, and figures.

Everything written here is deterministic for a fixed run except the single
``# generated:`` timestamp line at the top of the text report, so reports
diff cleanly between runs.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "CheckResult",
    "StageRecord",
    "RunReport",
    "write_csv",
    "plot_profile",
    "plot_kappa",
    "plot_min_eigenvalue",
    "plot_trace",
    "plot_residual",
]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float) or isinstance(value, np.floating):
        return f"{float(value):.12g}"
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class CheckResult:
    """One named verification with its measured value and threshold."""

    name: str
    passed: bool
    value: float | None = None
    tolerance: float | None = None
    detail: str = ""

    def line(self) -> str:
        mark = "ok  " if self.passed else "FAIL"
        parts = [f"  {mark} {self.name}"]
        if self.value is not None:
            parts.append(f"value={_fmt(self.value)}")
        if self.tolerance is not None:
            parts.append(f"tol={_fmt(self.tolerance)}")
        if self.detail:
            parts.append(f"({self.detail})")
        return " ".join(parts)


@dataclass
class StageRecord:
    """Facts recorded by one pipeline stage, in insertion order."""

    name: str
    status: str = "ok"
    items: list = field(default_factory=list)

    def add(self, key: str, value) -> None:
        self.items.append((key, value))


@dataclass
class RunReport:
    title: str
    stages: list = field(default_factory=list)
    checks: list = field(default_factory=list)

    def stage(self, name: str) -> StageRecord:
        rec = StageRecord(name)
        self.stages.append(rec)
        return rec

    def check(self, name: str, passed: bool, value=None, tolerance=None,
              detail: str = "") -> CheckResult:
        res = CheckResult(name, bool(passed), value, tolerance, detail)
        self.checks.append(res)
        return res

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def render(self) -> str:
        now = datetime.datetime.now(datetime.timezone.utc)
        lines = [f"# {self.title}",
                 f"# generated: {now.isoformat(timespec='seconds')}",
                 ""]
        for stage in self.stages:
            lines.append(f"[stage {stage.name}] {stage.status}")
            for key, value in stage.items:
                lines.append(f"  {key}: {_fmt(value)}")
            lines.append("")
        if self.checks:
            lines.append("[checks]")
            lines.extend(check.line() for check in self.checks)
            lines.append("")
        lines.append(f"[result] {'PASS' if self.passed else 'FAIL'}")
        lines.append("")
        return "\n".join(lines)

    def write(self, path) -> None:
        Path(path).write_text(self.render())


def write_csv(path, header: str, rows) -> None:
    """Write comma-delimited rows under a fixed header line.

    Floats keep full precision so dumps can be reloaded without loss.
    """
    n_cols = len(header.split(","))
    lines = [header]
    for row in rows:
        if len(row) != n_cols:
            raise ValueError(f"row width {len(row)} does not match header "
                             f"width {n_cols}")
        lines.append(",".join(f"{float(v):.17g}" for v in row))
    lines.append("")
    Path(path).write_text("\n".join(lines))


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_profile(sample_rows, path) -> None:
    """Depth reparametrization: phi, x and the cutoff identity vs r."""
    rows = np.asarray(sample_rows, dtype=float)
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2))
    axes[0].plot(rows[:, 0], rows[:, 1])
    axes[0].set_ylabel("phi")
    axes[1].plot(rows[:, 0], rows[:, 2])
    axes[1].set_ylabel("x")
    axes[2].plot(rows[:, 0], rows[:, 3])
    axes[2].set_ylabel("1 + r phi'")
    for ax in axes:
        ax.set_xlabel("r")
    _finish(fig, path)


def plot_kappa(params, values, path) -> None:
    """Curvature at infinity over the boundary grid."""
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    if len(params) == 1:
        ax.plot(params[0], values.reshape(-1))
        ax.set_xlabel("y1")
    else:
        mesh = ax.pcolormesh(params[0], params[1],
                             values.reshape(len(params[0]), len(params[1])).T,
                             shading="nearest")
        fig.colorbar(mesh, ax=ax)
        ax.set_xlabel("y1")
        ax.set_ylabel("y2")
    ax.set_title("curvature at infinity")
    _finish(fig, path)


def plot_min_eigenvalue(r_nodes, min_eig, path) -> None:
    """Smallest eigenvalue of the adjusted tensor across the collar.

    ``min_eig`` has shape (n_r, n_boundary...); boundary axes are flattened
    and shown against depth.
    """
    vals = np.asarray(min_eig, dtype=float).reshape(len(r_nodes), -1)
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    mesh = ax.pcolormesh(np.arange(vals.shape[1]), r_nodes, vals,
                         shading="nearest")
    fig.colorbar(mesh, ax=ax, label="min eigenvalue")
    ax.set_xlabel("boundary node index")
    ax.set_ylabel("r")
    _finish(fig, path)


def plot_trace(trace, path) -> None:
    """Optimizer residual history on a log scale."""
    rows = np.asarray(trace, dtype=float)
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.semilogy(rows[:, 0], rows[:, 1])
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual")
    _finish(fig, path)


def plot_residual(r_nodes, defect_norms, path) -> None:
    """Pointwise isometry defect, reduced over boundary nodes per depth."""
    vals = np.asarray(defect_norms, dtype=float).reshape(len(r_nodes), -1)
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.semilogy(r_nodes, vals.max(axis=1), label="max over boundary")
    ax.semilogy(r_nodes, vals.mean(axis=1), label="mean over boundary")
    ax.set_xlabel("r")
    ax.set_ylabel("defect norm")
    ax.legend()
    _finish(fig, path)
