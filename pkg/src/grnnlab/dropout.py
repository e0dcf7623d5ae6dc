"""Dropout variants for node states and MLP hiddens.

Two kinds:
  regular   - zero each element with probability `rate`, scale survivors by
              1/(1-rate) (inverted dropout).
  recurrent - each element keeps the *previous* state's value with
              probability `rate` instead of taking the newly computed one.
              No rescaling: the output mixes two valid states, so scaling
              would bias state magnitudes.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .rng import Rng

KINDS = ("regular", "recurrent")


def make_keep_mask(rng: Rng, size: int, rate: float) -> np.ndarray:
    """Boolean mask; True marks elements kept (probability 1 - rate each)."""
    return np.array([not rng.bernoulli(rate) for _ in range(size)])


def regular_dropout(vec: np.ndarray, rate: float, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    mask = make_keep_mask(rng, vec.size, rate)
    return vec * mask / (1.0 - rate), mask


def recurrent_mix(
    new: np.ndarray, prev: np.ndarray, rate: float, rng: Rng
) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise: prev where the mask drops, new where it keeps."""
    keep = make_keep_mask(rng, new.size, rate)
    return np.where(keep, new, prev), keep


def dropout_apply(
    vec: np.ndarray,
    prev: np.ndarray | None,
    rate: float,
    kind: str,
    rng: Rng,
    training: bool,
) -> np.ndarray:
    if kind not in KINDS:
        raise ParameterError(f"unknown dropout kind {kind!r}")
    # rate = 1 is well-defined only for the recurrent mix (always keep prev);
    # the regular kind's 1/(1-rate) rescale diverges there.
    limit_ok = rate <= 1.0 if kind == "recurrent" else rate < 1.0
    if not (0.0 <= rate and limit_ok):
        raise ParameterError(f"dropout rate {rate} out of range for kind {kind!r}")
    if kind == "recurrent" and prev is None:
        raise ParameterError("recurrent dropout requires the previous state")
    if not training or rate == 0.0:
        return vec
    if kind == "regular":
        out, _ = regular_dropout(vec, rate, rng)
    else:
        out, _ = recurrent_mix(vec, prev, rate, rng)
    return out
