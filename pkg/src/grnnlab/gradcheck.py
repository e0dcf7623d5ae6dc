"""Finite-difference verification of analytic gradients.

Central differences (f(t+eps) - f(t-eps)) / 2eps per coordinate, compared
against the analytic gradient with relative error normalized by
max(|analytic|, |numeric|, 1e-8). Coordinates can be subsampled for large
parameter trees; the check perturbs parameters in place and restores them.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import NumericalError
from .rng import Rng

REL_ERR_FLOOR = 1e-8


def finite_diff_check(
    f: Callable[[], float],
    params: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    eps: float = 1e-5,
    max_coords_per_tensor: int | None = None,
    rng: Rng | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    f must be deterministic and evaluate the loss at the current params;
    analytic holds the gradient to verify, shape-matched to params.
    """
    worst = 0.0
    for name, p in params.items():
        grad = analytic[name]
        flat = p.reshape(-1)
        coords = range(flat.size)
        if max_coords_per_tensor is not None and flat.size > max_coords_per_tensor:
            picker = rng if rng is not None else Rng(0)
            coords = sorted(
                {picker.randrange(flat.size) for _ in range(max_coords_per_tensor)}
            )
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = f()
            flat[i] = orig - eps
            f_minus = f()
            flat[i] = orig
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise NumericalError(f"non-finite loss while perturbing {name}[{i}]")
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(grad.reshape(-1)[i])
            denom = max(abs(a), abs(numeric), REL_ERR_FLOOR)
            worst = max(worst, abs(a - numeric) / denom)
    return worst
