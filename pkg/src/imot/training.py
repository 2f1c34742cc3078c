"""Training loop, evaluation pipeline, and ablation runner.

Everything here is deterministic given the config seed: model initialization
is seeded through torch, shuffling and splits through numpy, and no wall
clock enters any output.  The exported artifacts are a per-step loss log
("step,j_vel,j_ent,lr"), a byte-reproducible checkpoint, and the metric
reports from the metrics module.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, save_config, validate_config
from .datasets import (
    DatasetError,
    load_dataset,
    window_dataset,
    window_sequence,
    write_normalization,
)
from .metrics import (
    METRIC_NAMES,
    aggregate_metrics,
    trajectory_metrics,
    write_cdf_csv,
    write_metrics_csv,
)
from .model import MotionTransformer
from .odometry import integrate_velocities, pdr_reconstruct, sins_reconstruct

log = logging.getLogger("imot")


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"loss became non-finite at step {step}")
        self.step = step


def set_determinism(seed: int) -> np.random.Generator:
    torch.manual_seed(seed)
    torch.set_num_threads(max(1, torch.get_num_threads()))
    return np.random.default_rng(seed)


def normalization_stats(X: np.ndarray):
    """Per-channel mean/std over windows and time, with a variance floor."""
    mean = X.mean(axis=(0, 2))
    std = X.std(axis=(0, 2))
    return mean, np.maximum(std, 1e-8)


def split_groups(groups: np.ndarray, val_fraction: float, rng: np.random.Generator):
    """Split window indices by group label (sequence), never by window."""
    labels = np.unique(groups)
    if val_fraction <= 0 or labels.size < 2:
        return np.arange(groups.size), np.zeros(0, dtype=np.int64)
    n_val = int(round(val_fraction * labels.size))
    n_val = min(max(n_val, 1), labels.size - 1)
    shuffled = rng.permutation(labels)
    val_labels = set(shuffled[:n_val].tolist())
    mask = np.array([g in val_labels for g in groups])
    return np.nonzero(~mask)[0], np.nonzero(mask)[0]


@dataclass
class FitResult:
    log_rows: list = field(default_factory=list)   # (step, j_vel, j_ent, lr)
    history: list = field(default_factory=list)    # per-epoch dicts
    steps: int = 0
    best_val: float = float("inf")


def _epoch_loss(model: MotionTransformer, X, y, batch_size: int) -> float:
    """Mean velocity loss over a labelled set, without gradient tracking."""
    if len(X) == 0:
        return float("nan")
    total, count = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(X), batch_size):
            xb = torch.from_numpy(X[start : start + batch_size])
            yb = torch.from_numpy(y[start : start + batch_size])
            j_vel, _ = model.training_losses(xb, yb)
            total += float(j_vel) * len(xb)
            count += len(xb)
    return total / count


def fit_model(model: MotionTransformer, cfg: RunConfig, X, y,
              X_val=None, y_val=None, max_steps: Optional[int] = None,
              target_j_vel: Optional[float] = None) -> FitResult:
    """Adam optimization of the window-to-velocity objective.

    Minimizes j_vel (learned scorer) or j_vel + j_ent (legacy scoring).
    Tracks the best validation loss, restores those parameters at the end,
    and stops early after cfg.patience epochs without improvement.  Optional
    hard stops: a step budget, or a per-step training j_vel to reach.
    """
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    result = FitResult()
    has_val = X_val is not None and len(X_val) > 0
    best_state = None
    stale = 0
    step = 0
    reached_target = False
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(X))
        epoch_vel, epoch_ent, seen = 0.0, 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = torch.from_numpy(X[idx])
            yb = torch.from_numpy(y[idx])
            j_vel, j_ent = model.training_losses(xb, yb)
            loss = j_vel + j_ent
            if not torch.isfinite(loss):
                raise TrainingDiverged(step)
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            optimizer.step()
            vel_value, ent_value = float(j_vel.detach()), float(j_ent.detach())
            result.log_rows.append((step, vel_value, ent_value, cfg.learning_rate))
            epoch_vel += vel_value * len(idx)
            epoch_ent += ent_value * len(idx)
            seen += len(idx)
            step += 1
            if target_j_vel is not None and vel_value < target_j_vel:
                reached_target = True
                break
            if max_steps is not None and step >= max_steps:
                break
        val = _epoch_loss(model, X_val, y_val, cfg.batch_size) if has_val else epoch_vel / seen
        result.history.append({
            "epoch": epoch,
            "train_j_vel": epoch_vel / seen,
            "train_j_ent": epoch_ent / seen,
            "val_j_vel": val if has_val else float("nan"),
        })
        log.info("epoch %d: train j_vel %.6g, selection loss %.6g", epoch, epoch_vel / seen, val)
        if val < result.best_val:
            result.best_val = val
            best_state = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience > 0:
                log.info("early stop at epoch %d", epoch)
                break
        if reached_target or (max_steps is not None and step >= max_steps):
            break
    if best_state is not None:
        model.load_state_dict(best_state)
    result.steps = step
    return result


def write_training_log(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,j_vel,j_ent,lr\n")
        for step, j_vel, j_ent, lr in rows:
            fh.write(f"{step},{j_vel:.9g},{j_ent:.9g},{lr:.9g}\n")


def train_run(cfg: RunConfig, data_dir, out_dir, max_steps: Optional[int] = None) -> dict:
    """Full training entry point: dataset in, checkpoint and logs out."""
    validate_config(cfg)
    sequences, rate = load_dataset(data_dir)
    if not sequences:
        raise DatasetError(f"no training sequences under {data_dir}")
    if rate is not None and cfg.token_len != int(round(rate)):
        raise DatasetError(
            f"config token_len {cfg.token_len} does not match dataset sample rate {rate:g}"
        )
    rng = set_determinism(cfg.seed)
    X, y, groups, _ = window_dataset(sequences, cfg.token_len, cfg.train_stride_eff)
    train_idx, val_idx = split_groups(groups, cfg.val_fraction, rng)
    X_train, y_train = X[train_idx], y[train_idx]
    X_val, y_val = X[val_idx], y[val_idx]
    if len(X_train) == 0:
        raise DatasetError("training split produced no windows (sequences shorter than 1 s?)")
    mean, std = normalization_stats(X_train)
    write_normalization(data_dir, mean, std)

    torch.manual_seed(cfg.seed)
    model = MotionTransformer(cfg)
    model.set_normalization(mean, std)
    log.info("training on %d windows (%d validation), %d parameters",
             len(X_train), len(X_val), model.parameter_count())
    result = fit_model(model, cfg, X_train, y_train, X_val, y_val, max_steps=max_steps)

    os.makedirs(out_dir, exist_ok=True)
    write_training_log(result.log_rows, os.path.join(out_dir, "log.csv"))
    save_checkpoint(os.path.join(out_dir, "checkpoint.zip"), model)
    save_config(cfg, os.path.join(out_dir, "config.json"))
    report = {
        "parameter_count": model.parameter_count(),
        "steps": result.steps,
        "epochs": len(result.history),
        "best_val_j_vel": result.best_val,
        "train_windows": int(len(X_train)),
        "val_windows": int(len(X_val)),
        "history": result.history,
    }
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


def predict_windows(model: MotionTransformer, X, batch_size: int = 256) -> np.ndarray:
    out = []
    with torch.no_grad():
        for start in range(0, len(X), batch_size):
            xb = torch.from_numpy(np.ascontiguousarray(X[start : start + batch_size]))
            out.append(model.predict_velocity(xb).numpy())
    return np.concatenate(out) if out else np.zeros((0, 2))


def model_trajectory(model: MotionTransformer, seq) -> "Trajectory":
    """Window a sequence at stride T, predict, and integrate the segments."""
    X, _, t0 = window_sequence(seq, model.cfg.token_len, model.cfg.token_len)
    velocities = predict_windows(model, X)
    return integrate_velocities(
        velocities, dt=1.0, t0=float(seq.times[0]), origin=seq.positions[0]
    )


def _baseline_trajectory(method: str, seq, cfg: Optional[RunConfig] = None):
    if method == "sins":
        return sins_reconstruct(seq.times, seq.accel, seq.orientation, origin=seq.positions[0])
    if method == "pdr":
        pdr_cfg = cfg or RunConfig()
        return pdr_reconstruct(
            seq.times, seq.accel, seq.orientation, seq.rate,
            stride_m=pdr_cfg.pdr_stride_m, cutoff_hz=pdr_cfg.pdr_cutoff_hz,
            min_gap_s=pdr_cfg.pdr_min_gap_s, prominence=pdr_cfg.pdr_prominence,
            origin=seq.positions[0],
        )
    raise ValueError(f"unknown baseline method {method!r}")


def _emit_method_reports(out_dir, method, metric_rows, svg=False):
    write_metrics_csv(metric_rows, os.path.join(out_dir, f"metrics_{method}.csv"))
    write_cdf_csv(metric_rows, os.path.join(out_dir, f"cdf_{method}.csv"))
    if svg and metric_rows:
        from .metrics import plot_cdf_svg

        plot_cdf_svg(metric_rows, os.path.join(out_dir, f"cdf_{method}.svg"))


def evaluate_run(checkpoint_path, data_dir, out_dir, svg=False) -> dict:
    """Evaluate a checkpoint plus both baselines on every test sequence."""
    model = load_checkpoint(checkpoint_path)
    model.eval()
    sequences, rate = load_dataset(data_dir)
    if sequences and rate is not None and model.cfg.token_len != int(round(rate)):
        raise DatasetError(
            f"checkpoint token_len {model.cfg.token_len} does not match "
            f"dataset sample rate {rate:g}"
        )
    os.makedirs(out_dir, exist_ok=True)
    traj_dir = os.path.join(out_dir, "trajectories")
    os.makedirs(traj_dir, exist_ok=True)
    methods = {"model": {}, "sins": {}, "pdr": {}}
    for seq in sequences:
        gt = seq.ground_truth()
        estimates = {
            "model": model_trajectory(model, seq),
            "sins": _baseline_trajectory("sins", seq, model.cfg),
            "pdr": _baseline_trajectory("pdr", seq, model.cfg),
        }
        for method, est in estimates.items():
            est.save_csv(os.path.join(traj_dir, f"{seq.seq_id}_{method}.csv"))
            methods[method][seq.seq_id] = trajectory_metrics(gt, est)
        gt.save_csv(os.path.join(traj_dir, f"{seq.seq_id}_gt.csv"))
        log.info("evaluated %s", seq.seq_id)
    for method, rows in methods.items():
        _emit_method_reports(out_dir, method, rows, svg=svg)
    summary = {m: aggregate_metrics(rows) for m, rows in methods.items()}
    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("method,metric,mean,median\n")
        for method in methods:
            for metric in METRIC_NAMES:
                block = summary[method][metric]
                fh.write(f"{method},{metric},{block['mean']:.9g},{block['median']:.9g}\n")
    return summary


def baseline_run(method: str, data_dir, out_dir, cfg: Optional[RunConfig] = None,
                 svg=False) -> dict:
    """Run SINS and/or PDR without a model."""
    sequences, _ = load_dataset(data_dir)
    os.makedirs(out_dir, exist_ok=True)
    traj_dir = os.path.join(out_dir, "trajectories")
    os.makedirs(traj_dir, exist_ok=True)
    names = ("sins", "pdr") if method == "both" else (method,)
    summary = {}
    for name in names:
        rows = {}
        for seq in sequences:
            est = _baseline_trajectory(name, seq, cfg)
            est.save_csv(os.path.join(traj_dir, f"{seq.seq_id}_{name}.csv"))
            rows[seq.seq_id] = trajectory_metrics(seq.ground_truth(), est)
        _emit_method_reports(out_dir, name, rows, svg=svg)
        summary[name] = aggregate_metrics(rows)
    return summary


ABLATION_TOGGLES = ("psd", "asc", "ape", "particles", "dsm")


def ablate_run(base_cfg: RunConfig, matrix: list, data_dir, out_dir) -> list:
    """Train and evaluate one model per toggle row on a fixed train/test split.

    data_dir must contain train/ and test/ subdirectories.  Rows may
    override any RunConfig field; an optional "name" key labels the row.
    Emits ablation.csv with Table-style columns (config id, the five
    toggles, then ATE / T-RTE / D-RTE means on the test set).
    """
    train_dir = os.path.join(data_dir, "train")
    test_dir = os.path.join(data_dir, "test")
    if not (os.path.isdir(train_dir) and os.path.isdir(test_dir)):
        raise DatasetError(f"{data_dir} must contain train/ and test/ subdirectories")
    os.makedirs(out_dir, exist_ok=True)
    results = []
    for index, row in enumerate(matrix):
        row = dict(row)
        name = row.pop("name", f"row{index:02d}")
        cfg = validate_config(dataclasses.replace(base_cfg, **row))
        row_dir = os.path.join(out_dir, "rows", name)
        log.info("ablation row %s: %s", name, row)
        train_run(cfg, train_dir, row_dir)
        summary = evaluate_run(os.path.join(row_dir, "checkpoint.zip"), test_dir, row_dir)
        results.append({
            "config_id": name,
            **{t: getattr(cfg, t) for t in ABLATION_TOGGLES},
            "ate": summary["model"]["ate"]["mean"],
            "t_rte": summary["model"]["t_rte"]["mean"],
            "d_rte": summary["model"]["d_rte"]["mean"],
        })
    with open(os.path.join(out_dir, "ablation.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("config_id," + ",".join(ABLATION_TOGGLES) + ",ate,t_rte,d_rte\n")
        for res in results:
            toggles = ",".join("on" if res[t] else "off" for t in ABLATION_TOGGLES)
            fh.write(f"{res['config_id']},{toggles},"
                     f"{res['ate']:.9g},{res['t_rte']:.9g},{res['d_rte']:.9g}\n")
    return results
