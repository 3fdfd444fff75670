"""Static SVG figures: merge paths in the road plane, motion states over time and potential-field snapshots."""

from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import TYPE_CHECKING

import matplotlib as mpl

mpl.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

if TYPE_CHECKING:
    from planner.domain import LaneGeometry
    from sim.trace import StepRecord

# Fixed salt and no date so the same run renders to identical SVG bytes.
plt.rcParams["svg.hashsalt"] = "merge-planner"
SVG_METADATA = {"Date": None}


def _series(records: "Sequence[StepRecord]", vid: str, attr: str) -> tuple[np.ndarray, np.ndarray]:
    rows = [r for r in records if r.vid == vid]
    return np.array([r.t for r in rows]), np.array([getattr(r, attr) for r in rows])


def _vehicle_ids(records: "Sequence[StepRecord]") -> list[str]:
    return list(dict.fromkeys(r.vid for r in records))


def _draw_lanes(ax: plt.Axes, lane: "LaneGeometry", x_min: float, x_max: float) -> None:
    ax.axhline(lane.y_left, color="black", linewidth=1.2)
    ax.axhline(lane.y_right, color="black", linewidth=1.2)
    centers = lane.lane_centers
    for lower, upper in zip(centers, centers[1:], strict=False):
        ax.axhline((lower + upper) / 2, color="grey", linestyle="--", linewidth=0.8)
    ax.axvline(lane.side_lane_end_x, color="firebrick", linestyle=":", linewidth=0.8)
    ax.set_xlim(x_min, x_max)


def save_xy_paths(
    trajectories: Mapping[str, tuple[np.ndarray, np.ndarray]],
    lane: "LaneGeometry",
    out: Path,
    planned: Sequence[tuple[str, np.ndarray]] = (),
    title: str = "Lane-merge paths",
) -> Path:
    """Overlay driven trajectories (label -> xs, ys) and planned waypoint arrays on the road."""
    fig, ax = plt.subplots(figsize=(12, 4))
    xs_all = np.concatenate([xs for xs, _ in trajectories.values()]) if trajectories else np.array([0.0, 1.0])
    _draw_lanes(ax, lane, float(xs_all.min()), float(xs_all.max()))
    for label, waypoints in planned:
        ax.plot(waypoints[:, 0], waypoints[:, 1], linestyle="--", linewidth=0.8, alpha=0.7, label=label)
    for label, (xs, ys) in trajectories.items():
        ax.plot(xs, ys, linewidth=1.5, label=label)
    ax.set_xlabel("X (m)")
    ax.set_ylabel("Y (m)")
    ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    return out


def save_run_paths(
    records: "Sequence[StepRecord]",
    lane: "LaneGeometry",
    out: Path,
    planned: Sequence[tuple[str, np.ndarray]] = (),
) -> Path:
    trajectories = {}
    for vid in _vehicle_ids(records):
        _, xs = _series(records, vid, "x")
        _, ys = _series(records, vid, "y")
        trajectories[vid] = (xs, ys)
    return save_xy_paths(trajectories, lane, out, planned)


def save_motion_states(records: "Sequence[StepRecord]", ego_id: str, out: Path) -> Path:
    """Sideslip, yaw and speed of the ego over time, with obstacle speeds on the last panel."""
    fig, (ax_beta, ax_psi, ax_v) = plt.subplots(3, 1, figsize=(10, 8), sharex=True)
    t, beta = _series(records, ego_id, "beta")
    _, psi = _series(records, ego_id, "psi")
    ax_beta.plot(t, beta, label=ego_id)
    ax_beta.set_ylabel("Sideslip (rad)")
    ax_psi.plot(t, psi, label=ego_id)
    ax_psi.set_ylabel("Yaw (rad)")
    for vid in _vehicle_ids(records):
        tv, v = _series(records, vid, "v")
        ax_v.plot(tv, v, label=vid, linewidth=1.5 if vid == ego_id else 1.0)
    ax_v.set_ylabel("Speed (m/s)")
    ax_v.set_xlabel("t (s)")
    ax_v.legend(loc="best", fontsize="small")
    for ax in (ax_beta, ax_psi, ax_v):
        ax.grid(visible=True, linewidth=0.3)
    fig.suptitle("Motion states of the ego and obstacle vehicles")
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    return out


def save_field(
    grid: np.ndarray,
    forces: np.ndarray,
    lane: "LaneGeometry",
    out: Path,
    p_c: float | None = None,
) -> Path:
    """Filled contours of ``(x, y, P)`` grid rows with unit force arrows on top."""
    xs = np.unique(grid[:, 0])
    ys = np.unique(grid[:, 1])
    values = grid[:, 2].reshape(len(ys), len(xs))
    fig, ax = plt.subplots(figsize=(12, 4))
    filled = ax.contourf(xs, ys, values, levels=40, cmap="viridis")
    fig.colorbar(filled, ax=ax, label="Potential")
    _draw_lanes(ax, lane, float(xs.min()), float(xs.max()))
    norm = np.hypot(forces[:, 2], forces[:, 3])
    norm = np.where(norm > 0, norm, 1.0)
    ax.quiver(forces[:, 0], forces[:, 1], forces[:, 2] / norm, forces[:, 3] / norm, color="white", pivot="mid")
    if p_c is not None:
        ax.axvline(p_c, color="orange", linewidth=1.0, label=f"P_c = {p_c:.1f} m")
        ax.legend(loc="upper right", fontsize="small")
    ax.set_xlabel("X (m)")
    ax.set_ylabel("Y (m)")
    ax.set_title("Potential field at merge planning")
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    return out
