"""The three event-stream batching strategies.

Fixed-size slicing serves both the parallel (last-event-wins) regime and
plain sequential chunking; t-batches are variable-sized and built greedily
so that no node appears twice in a batch, which makes parallel processing
exact.
"""

from __future__ import annotations

from .errors import ParameterError
from .events import Batch, Event


def make_batches_fixed(
    events: list[Event], batch_size: int, strategy: str = "fixed_parallel"
) -> list[Batch]:
    """Consecutive slices of the global order; the final batch may be short."""
    if batch_size < 1:
        raise ParameterError(f"batch_size must be >= 1, got {batch_size}")
    if strategy not in ("fixed_parallel", "sequential"):
        raise ParameterError(f"unsupported strategy {strategy!r} for fixed batching")
    return [
        Batch(events=events[i : i + batch_size], strategy=strategy, index=b)
        for b, i in enumerate(range(0, len(events), batch_size))
    ]


def make_batches_tbatch(events: list[Event]) -> list[Batch]:
    """Greedy earliest-feasible assignment.

    Event k goes to batch 1 + max(batch of src's previous event, batch of
    dst's previous event), so each batch holds at most one event per node
    and within-batch order follows the global order.
    """
    last_batch: dict[int, int] = {}
    buckets: list[list[Event]] = []
    for ev in events:
        b = max(last_batch.get(ev.src, -1), last_batch.get(ev.dst, -1)) + 1
        if b == len(buckets):
            buckets.append([])
        buckets[b].append(ev)
        last_batch[ev.src] = b
        last_batch[ev.dst] = b
    return [Batch(events=evs, strategy="t_batch", index=b) for b, evs in enumerate(buckets)]


def assert_tbatch_valid(batch: Batch) -> None:
    """No node id may appear twice within a t-batch."""
    seen: set[int] = set()
    for ev in batch.events:
        for node in (ev.src, ev.dst):
            if node in seen:
                raise AssertionError(f"node {node} repeats in t-batch {batch.index}")
            seen.add(node)
