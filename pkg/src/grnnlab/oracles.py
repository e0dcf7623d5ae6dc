"""Independent reference implementations used only for verification.

These deliberately re-derive the forward math in a separate, straight-line
style (and in a caller-chosen dtype, so finite differences can run in
extended precision where float64 roundoff would drown small gradient
coordinates). They share no code with the engine or cell modules beyond the
parameter values themselves.
"""

from __future__ import annotations

import numpy as np

from .events import Event


def _sig(v):
    out = np.empty_like(v)
    for i, x in enumerate(v):
        if x >= 0:
            out[i] = 1.0 / (1.0 + np.exp(-x))
        else:
            e = np.exp(x)
            out[i] = e / (1.0 + e)
    return out


def gru_forward_reference(weights: dict, h_prev, x_in, dtype=np.float64):
    """Scalar-by-scalar recomputation of one cell application.

    weights maps {wz, wr, wn, bz, br, bn} to arrays (any prefix stripped).
    """
    wz = np.asarray(weights["wz"], dtype=dtype)
    wr = np.asarray(weights["wr"], dtype=dtype)
    wn = np.asarray(weights["wn"], dtype=dtype)
    bz = np.asarray(weights["bz"], dtype=dtype)
    br = np.asarray(weights["br"], dtype=dtype)
    bn = np.asarray(weights["bn"], dtype=dtype)
    h = np.asarray(h_prev, dtype=dtype)
    x = np.asarray(x_in, dtype=dtype)
    m = h.shape[0]
    joint = np.concatenate((h, x))
    z = _sig(wz @ joint + bz)
    r = _sig(wr @ joint + br)
    gated = np.concatenate((r * h, x))
    n = np.tanh(wn @ gated + bn)
    out = np.empty(m, dtype=dtype)
    for i in range(m):
        out[i] = (1 - z[i]) * h[i] + z[i] * n[i]
    return out


def mlp_forward_reference(weights: dict, x, dtype=np.float64):
    w1 = np.asarray(weights["w1"], dtype=dtype)
    b1 = np.asarray(weights["b1"], dtype=dtype)
    w2 = np.asarray(weights["w2"], dtype=dtype)
    b2 = np.asarray(weights["b2"], dtype=dtype)
    hidden = w1 @ np.asarray(x, dtype=dtype) + b1
    hidden = np.where(hidden > 0, hidden, dtype(0.0))
    return w2 @ hidden + b2[0]


def _tbatch_indices(events: list[Event]) -> list[list[int]]:
    last: dict[int, int] = {}
    buckets: list[list[int]] = []
    for pos, ev in enumerate(events):
        b = max(last.get(ev.src, -1), last.get(ev.dst, -1)) + 1
        if b == len(buckets):
            buckets.append([])
        buckets[b].append(pos)
        last[ev.src] = b
        last[ev.dst] = b
    return buckets


def epoch_loss_reference(
    params: dict[str, np.ndarray],
    events: list[Event],
    num_nodes: int,
    m: int,
    strategy: str,
    batch_size: int | None,
    dtype=np.float64,
) -> float:
    """Total regression loss of an epoch, recomputed from first principles.

    Predictions read the states each event's batch semantics expose
    (live states when sequential, batch-start states otherwise); parallel
    batches apply only each node's last in-batch update.
    """
    params = {k.split(".", 1)[-1] if "." in k else k: v for k, v in params.items()}
    gru_w = {k: params[k] for k in ("wz", "wr", "wn", "bz", "br", "bn")}
    mlp_w = {k: params[k] for k in ("w1", "b1", "w2", "b2")}

    if strategy == "t_batch":
        groups = _tbatch_indices(events)
    elif batch_size is None:
        groups = [list(range(len(events)))]
    else:
        groups = [
            list(range(i, min(i + batch_size, len(events))))
            for i in range(0, len(events), batch_size)
        ]

    states = np.zeros((num_nodes, m), dtype=dtype)
    total = dtype(0.0)
    for group in groups:
        if strategy == "sequential":
            for pos in group:
                ev = events[pos]
                h_s = states[ev.src].copy()
                h_d = states[ev.dst].copy()
                feats = np.asarray(ev.features, dtype=dtype)
                pred = mlp_forward_reference(mlp_w, np.concatenate((h_s, h_d, feats)), dtype)
                total = total + (pred - dtype(ev.y)) ** 2
                states[ev.src] = gru_forward_reference(
                    gru_w, h_s, np.concatenate((h_d, feats)), dtype
                )
                states[ev.dst] = gru_forward_reference(
                    gru_w, h_d, np.concatenate((h_s, feats)), dtype
                )
        else:
            snapshot = states.copy()
            last_of_node: dict[int, int] = {}
            for pos in group:
                last_of_node[events[pos].src] = pos
                last_of_node[events[pos].dst] = pos
            for pos in group:
                ev = events[pos]
                h_s = snapshot[ev.src]
                h_d = snapshot[ev.dst]
                feats = np.asarray(ev.features, dtype=dtype)
                pred = mlp_forward_reference(mlp_w, np.concatenate((h_s, h_d, feats)), dtype)
                total = total + (pred - dtype(ev.y)) ** 2
                if last_of_node[ev.src] == pos:
                    states[ev.src] = gru_forward_reference(
                        gru_w, h_s, np.concatenate((h_d, feats)), dtype
                    )
                if last_of_node[ev.dst] == pos:
                    states[ev.dst] = gru_forward_reference(
                        gru_w, h_d, np.concatenate((h_s, feats)), dtype
                    )
    return total
