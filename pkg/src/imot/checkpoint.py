"""Deterministic model checkpoints.

A checkpoint is a zip holding config.json plus one .npy per parameter or
buffer.  Zip entries carry a fixed timestamp so that identical states always
produce byte-identical files, which the determinism contract depends on.
"""

from __future__ import annotations

import io
import zipfile

import numpy as np
import torch

from .config import config_from_json, config_to_json
from .model import MotionTransformer

_EPOCH = (1980, 1, 1, 0, 0, 0)


class CheckpointError(ValueError):
    """Unreadable or mismatched checkpoint contents."""


def save_checkpoint(path, model: MotionTransformer) -> None:
    state = model.state_dict()
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        def add(name, payload):
            info = zipfile.ZipInfo(name, date_time=_EPOCH)
            info.external_attr = 0o644 << 16
            zf.writestr(info, payload)

        add("config.json", config_to_json(model.cfg))
        for name in sorted(state):
            buf = io.BytesIO()
            np.save(buf, state[name].detach().cpu().contiguous().numpy())
            add(f"params/{name}.npy", buf.getvalue())


def load_checkpoint(path) -> MotionTransformer:
    try:
        zf = zipfile.ZipFile(path, "r")
    except (OSError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    with zf:
        names = set(zf.namelist())
        if "config.json" not in names:
            raise CheckpointError(f"{path}: missing config.json")
        cfg = config_from_json(zf.read("config.json").decode("utf-8"))
        model = MotionTransformer(cfg)
        state = {}
        for name in names:
            if not name.startswith("params/") or not name.endswith(".npy"):
                continue
            key = name[len("params/") : -len(".npy")]
            array = np.load(io.BytesIO(zf.read(name)))
            state[key] = torch.from_numpy(array)
        try:
            model.load_state_dict(state, strict=True)
        except RuntimeError as exc:
            raise CheckpointError(f"{path}: parameter mismatch: {exc}") from exc
    return model
