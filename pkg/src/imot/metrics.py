"""Trajectory-error metrics and their CSV reports.

All metrics first resample the estimate onto the ground-truth timestamps by
linear interpolation (clamped at the ends), then compare positions.  The
relative metrics look ahead a fixed time span (T-RTE) or a fixed traveled
ground-truth distance (D-RTE); anchors whose horizon leaves the recording
are excluded, except that a recording shorter than the T-RTE span is scored
over its full span and scaled up.
"""

from __future__ import annotations

import numpy as np

from .types import Trajectory

_TOL = 1e-9


def _aligned(gt: Trajectory, est: Trajectory):
    est = est.resampled(gt.times)
    return gt.times, gt.positions, est.positions


def ate(gt: Trajectory, est: Trajectory) -> float:
    """Root-mean-square absolute position error."""
    _, p_gt, p_est = _aligned(gt, est)
    return float(np.sqrt(np.mean(np.sum((p_gt - p_est) ** 2, axis=1))))


def t_rte(gt: Trajectory, est: Trajectory, span_s: float = 60.0) -> float:
    """RMSE of relative-displacement error over a fixed time span."""
    if span_s <= 0:
        raise ValueError(f"span_s must be > 0, got {span_s}")
    times, p_gt, p_est = _aligned(gt, est)
    end = times[-1]
    if times[0] + span_s > end + _TOL:
        # Recording shorter than the span: score the full span, scaled up.
        if len(times) < 2:
            return 0.0
        diff = (p_gt[-1] - p_gt[0]) - (p_est[-1] - p_est[0])
        return float(np.linalg.norm(diff) * (span_s / (end - times[0])))
    errors = []
    for i in range(times.size):
        target = times[i] + span_s
        if target > end + _TOL:
            break
        j = int(np.searchsorted(times, target - _TOL, side="left"))
        diff = (p_gt[j] - p_gt[i]) - (p_est[j] - p_est[i])
        errors.append(diff @ diff)
    return float(np.sqrt(np.mean(errors)))


def d_rte(gt: Trajectory, est: Trajectory, span_m: float = 1.0) -> float:
    """RMSE of relative-displacement error over a fixed traveled distance.

    The horizon of an anchor is the first sample where the ground-truth arc
    length has grown by span_m; anchors without one are excluded.  Returns
    nan when the path moves but stays shorter than the span; a ground truth
    that never moves at all is an error.
    """
    if span_m <= 0:
        raise ValueError(f"span_m must be > 0, got {span_m}")
    times, p_gt, p_est = _aligned(gt, est)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(p_gt, axis=0), axis=1))])
    if arc[-1] <= _TOL:
        raise ValueError("ground-truth path length is zero")
    errors = []
    for i in range(times.size):
        target = arc[i] + span_m
        if target > arc[-1] + _TOL:
            break
        j = int(np.searchsorted(arc, target - _TOL, side="left"))
        diff = (p_gt[j] - p_gt[i]) - (p_est[j] - p_est[i])
        errors.append(diff @ diff)
    if not errors:
        return float("nan")
    return float(np.sqrt(np.mean(errors)))


def pde(gt: Trajectory, est: Trajectory) -> float:
    """Final-position drift divided by the ground-truth path length."""
    _, p_gt, p_est = _aligned(gt, est)
    path = gt.path_length()
    if path <= _TOL:
        raise ValueError("ground-truth path length is zero")
    return float(np.linalg.norm(p_gt[-1] - p_est[-1]) / path)


def trajectory_metrics(gt: Trajectory, est: Trajectory,
                       t_span_s: float = 60.0, d_span_m: float = 1.0) -> dict:
    return {
        "ate": ate(gt, est),
        "t_rte": t_rte(gt, est, t_span_s),
        "d_rte": d_rte(gt, est, d_span_m),
        "pde": pde(gt, est),
    }


METRIC_NAMES = ("ate", "t_rte", "d_rte", "pde")


def write_metrics_csv(rows: dict, path) -> None:
    """Per-trajectory metric rows plus mean/median aggregate rows.

    rows maps trajectory id -> metric dict.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("traj_id," + ",".join(METRIC_NAMES) + "\n")
        for traj_id in rows:
            values = rows[traj_id]
            fh.write(traj_id + "," + ",".join(f"{values[m]:.9g}" for m in METRIC_NAMES) + "\n")
        if rows:
            table = {m: np.array([rows[t][m] for t in rows]) for m in METRIC_NAMES}
            for label, reducer in (("mean", np.nanmean), ("median", np.nanmedian)):
                fh.write(label + "," + ",".join(
                    f"{float(reducer(table[m])):.9g}" for m in METRIC_NAMES) + "\n")


def read_metrics_csv(path) -> dict:
    """Inverse of write_metrics_csv; aggregate rows are skipped."""
    rows = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != ["traj_id", *METRIC_NAMES]:
            raise ValueError(f"{path}: unexpected metrics header {header}")
        for line in fh:
            parts = line.strip().split(",")
            if not parts or not parts[0]:
                continue
            if parts[0] in ("mean", "median"):
                continue
            rows[parts[0]] = dict(zip(METRIC_NAMES, (float(v) for v in parts[1:])))
    return rows


def aggregate_metrics(rows: dict) -> dict:
    """Mean and median per metric over per-trajectory rows (nan-aware)."""
    out = {}
    for m in METRIC_NAMES:
        values = np.array([rows[t][m] for t in rows], dtype=np.float64)
        out[m] = {
            "mean": float(np.nanmean(values)) if values.size else float("nan"),
            "median": float(np.nanmedian(values)) if values.size else float("nan"),
        }
    return out


def cdf_points(values) -> list:
    """Empirical CDF of finite values: sorted (value, k/n) pairs."""
    finite = sorted(v for v in values if np.isfinite(v))
    n = len(finite)
    return [(v, (k + 1) / n) for k, v in enumerate(finite)]


def write_cdf_csv(rows: dict, path) -> None:
    """Plot-ready CDF table across trajectories, one block per metric."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("metric,value,cum_fraction\n")
        for m in METRIC_NAMES:
            for value, fraction in cdf_points(rows[t][m] for t in rows):
                fh.write(f"{m},{value:.9g},{fraction:.9g}\n")


def plot_cdf_svg(rows: dict, path) -> None:
    """Optional SVG rendering of the CDF tables (deterministic output)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "imot"
    fig, axes = plt.subplots(1, len(METRIC_NAMES), figsize=(4 * len(METRIC_NAMES), 3))
    for axis, m in zip(axes, METRIC_NAMES):
        points = cdf_points(rows[t][m] for t in rows)
        if points:
            xs, ys = zip(*points)
            axis.step(xs, ys, where="post")
        axis.set_xlabel(m)
        axis.set_ylabel("fraction")
        axis.set_ylim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
