"""Versioned JSON checkpoints: parameters + optimizer state + rng states."""

from __future__ import annotations

import json
import os

import numpy as np

from .adamw import AdamwState
from .errors import DataError
from .gru import GruParameters
from .mlp import MlpParameters
from .model import GrnnModel

CHECKPOINT_FORMAT_VERSION = 1


def save_checkpoint(
    path: str,
    model: GrnnModel,
    optimizer: AdamwState | None = None,
    rng_states: dict[str, dict] | None = None,
) -> None:
    payload = {
        "version": CHECKPOINT_FORMAT_VERSION,
        "model": {
            "m": model.m,
            "feat_dim": model.feat_dim,
            "task": model.task,
            "symmetric": model.symmetric,
            "params": {name: p.tolist() for name, p in model.named_params().items()},
        },
        "optimizer": None if optimizer is None else optimizer.to_dict(),
        "rng_states": rng_states,
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def _gru_from(params: dict, prefix: str, m: int, d_in: int) -> GruParameters:
    def arr(name, shape):
        return np.asarray(params[prefix + name], dtype=np.float64).reshape(shape)

    return GruParameters(
        wz=arr("wz", (m, m + d_in)),
        wr=arr("wr", (m, m + d_in)),
        wn=arr("wn", (m, m + d_in)),
        bz=arr("bz", (m,)),
        br=arr("br", (m,)),
        bn=arr("bn", (m,)),
    )


def load_checkpoint(path: str) -> tuple[GrnnModel, AdamwState | None, dict | None]:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version {payload.get('version')}")
    md = payload["model"]
    m, feat_dim = md["m"], md["feat_dim"]
    d_in = m + feat_dim
    params = md["params"]
    hidden = m
    in_dim = len(params["mlp.w1"]) and len(params["mlp.w1"][0]) or 0
    mlp = MlpParameters(
        w1=np.asarray(params["mlp.w1"], dtype=np.float64).reshape(hidden, in_dim),
        b1=np.asarray(params["mlp.b1"], dtype=np.float64).reshape(hidden),
        w2=np.asarray(params["mlp.w2"], dtype=np.float64).reshape(hidden),
        b2=np.asarray(params["mlp.b2"], dtype=np.float64).reshape(1),
    )
    model = GrnnModel(
        gru=_gru_from(params, "gru.", m, d_in),
        gru_dst=None if md["symmetric"] else _gru_from(params, "gru_dst.", m, d_in),
        mlp=mlp,
        m=m,
        feat_dim=feat_dim,
        task=md["task"],
    )
    optimizer = None
    if payload["optimizer"] is not None:
        optimizer = AdamwState.from_dict(payload["optimizer"], model.named_params())
    return model, optimizer, payload.get("rng_states")
