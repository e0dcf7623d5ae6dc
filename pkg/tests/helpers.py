"""Shared test utilities: random problem instances and independent oracles."""

from __future__ import annotations

import numpy as np

import grnnlab as g


def random_instance(seed: int, max_events: int = 20, max_m: int = 8):
    """A random synthetic graph + model + batching config, fully seeded."""
    rng = g.Rng(seed)
    m = 2 + rng.randrange(max_m - 1)
    n_events = 3 + rng.randrange(max_events - 2)
    n_nodes = 4 + rng.randrange(5)
    memory = 1 + rng.randrange(3)
    cfg = g.SyntheticConfig(memory=memory, num_nodes=n_nodes, edges_per_epoch=n_events)
    events = g.generate_epoch(cfg, rng.substream("data"))
    model = g.init_model(rng.substream("init"), m, 1, "regression")
    strategy = ("sequential", "t_batch", "fixed_parallel")[seed % 3]
    if strategy == "sequential":
        size = None if seed % 2 else 1 + rng.randrange(6)
    elif strategy == "t_batch":
        size = None
    else:
        size = 1 + rng.randrange(6)
    batching = g.BatchingConfig(strategy=strategy, batch_size=size)
    return cfg, events, model, batching


def epoch_loss_fn(events, model, n_nodes, batching):
    """Engine-path epoch loss with a fresh zero store each call."""

    def f():
        store = g.NodeStateStore.zeros(n_nodes, model.m)
        return g.forward_epoch(events, model, store, batching, record=False).total_loss

    return f


def fifo_targets_bruteforce(pairs, xs, memory):
    """Independent FIFO-buffer simulation using plain Python lists.

    Deliberately structured differently from the package oracle: buffers are
    per-node lists that are popped/inserted rather than numpy-shifted.
    """
    buffers: dict[int, list[float]] = {}
    targets = []
    for (s, d), x in zip(pairs, xs):
        bs = buffers.setdefault(s, [0.0] * (memory + 1))
        bd = buffers.setdefault(d, [0.0] * (memory + 1))
        tail_s, tail_d = bs[-1], bd[-1]
        targets.append(tail_s + tail_d)
        bs.pop()
        bs.insert(0, 0.5 * tail_d + 0.5 * x)
        bd.pop()
        bd.insert(0, 0.5 * tail_s + 0.5 * x)
    return targets


def events_from_pairs(pairs, xs, memory):
    """Events with brute-force targets attached."""
    ys = fifo_targets_bruteforce(pairs, xs, memory)
    return [
        g.Event(index=k, src=s, dst=d, time=float(k), features=np.array([x]), y=y)
        for k, ((s, d), x, y) in enumerate(zip(pairs, xs, ys))
    ]


def params_equal(a: dict, b: dict) -> bool:
    return set(a) == set(b) and all(np.array_equal(a[k], b[k]) for k in a)
