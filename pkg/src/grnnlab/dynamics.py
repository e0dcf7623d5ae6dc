"""Applying event batches to the node-state store.

Three update regimes share one entry point, run_batch:

  sequential     - events in order; each event reads the live store, so
                   updates are visible to later events in the same batch.
  t_batch        - all reads come from the batch-start snapshot; since no
                   node repeats, this is exactly sequential processing.
  fixed_parallel - all reads come from the batch-start snapshot and only a
                   node's last in-batch event updates its state; earlier
                   same-batch updates to that node are never computed
                   (the "inconsistent history").

Within one event the two endpoint updates are coupled but simultaneous:
both consume the pre-update states of both endpoints.

Every state read is tagged with the step record that produced the value
(or None for the epoch-initial zero state), which is what lets the engine
run exact reverse-mode sweeps across batch boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dropout import recurrent_mix, regular_dropout
from .errors import ParameterError
from .events import Batch, Event, NodeStateStore
from .gru import GruCache, gru_forward
from .mlp import MlpCache
from .model import GrnnModel
from .rng import Rng

Slot = tuple["StepRecord", str]  # (producing record, "src" | "dst")


@dataclass
class StateDropout:
    """Training-time dropout on the node states modified in each batch."""

    rate: float
    kind: str  # "regular" | "recurrent"
    rng: Rng

    def __post_init__(self):
        if self.kind not in ("regular", "recurrent"):
            raise ParameterError(f"unknown state dropout kind {self.kind!r}")
        if not 0.0 <= self.rate < 1.0:
            raise ParameterError(f"state dropout rate {self.rate} out of [0, 1)")


@dataclass(eq=False)
class StepRecord:
    """Everything the forward pass of one event leaves behind.

    Identity (not value) semantics: records double as dataflow-graph nodes,
    keyed by id() during backward sweeps.
    """

    event: Event
    batch_index: int
    strategy: str
    h_src_pre: np.ndarray
    h_dst_pre: np.ndarray
    src_slot: Slot | None
    dst_slot: Slot | None
    # update payloads; None when this event does not update that endpoint
    cache_src: GruCache | None = None
    cache_dst: GruCache | None = None
    h_src_post: np.ndarray | None = None
    h_dst_post: np.ndarray | None = None
    # state-dropout bookkeeping (masks are keep-masks over the new state)
    drop_kind: str | None = None
    drop_rate: float = 0.0
    drop_mask_src: np.ndarray | None = None
    drop_mask_dst: np.ndarray | None = None
    # extra read-only state capture (negative destination during training)
    extra_node: int | None = None
    h_extra_pre: np.ndarray | None = None
    extra_slot: Slot | None = None
    # prediction-side payloads, filled by the engine
    loss: float = 0.0
    pred_cache: MlpCache | None = None
    grad_logit_pred: float = 0.0
    neg_cache: MlpCache | None = None
    grad_logit_neg: float = 0.0


def _update_node(
    model: GrnnModel,
    role: str,
    h_own: np.ndarray,
    h_counterparty: np.ndarray,
    features: np.ndarray,
) -> tuple[np.ndarray, GruCache]:
    params, _ = model.gru_for_role(role)
    return gru_forward(params, h_own, np.concatenate((h_counterparty, features)))


def _apply_state_dropout(
    h_new: np.ndarray, h_prev: np.ndarray, sd: StateDropout | None
) -> tuple[np.ndarray, np.ndarray | None]:
    if sd is None or sd.rate == 0.0:
        return h_new, None
    if sd.kind == "regular":
        return regular_dropout(h_new, sd.rate, sd.rng)
    return recurrent_mix(h_new, h_prev, sd.rate, sd.rng)


def run_batch(
    store: NodeStateStore,
    producers: dict[int, Slot],
    batch: Batch,
    model: GrnnModel,
    record: bool = False,
    state_dropout: StateDropout | None = None,
    extra_reads: list[int | None] | None = None,
) -> list[StepRecord]:
    """Process one batch, mutating the store; returns one record per event.

    producers maps node id -> slot that wrote its current state; it is
    maintained across batches within an epoch and must start empty at reset.
    """
    sequential = batch.strategy == "sequential"
    records: list[StepRecord] = []

    # read pass: capture pre-update states and their provenance
    for pos, ev in enumerate(batch.events):
        store.check_node(ev.src)
        store.check_node(ev.dst)
        rec = StepRecord(
            event=ev,
            batch_index=batch.index,
            strategy=batch.strategy,
            h_src_pre=store.states[ev.src].copy(),
            h_dst_pre=store.states[ev.dst].copy(),
            src_slot=producers.get(ev.src),
            dst_slot=producers.get(ev.dst),
        )
        if extra_reads is not None and extra_reads[pos] is not None:
            node = extra_reads[pos]
            store.check_node(node)
            rec.extra_node = node
            rec.h_extra_pre = store.states[node].copy()
            rec.extra_slot = producers.get(node)
        records.append(rec)
        if sequential:
            _update_step(store, producers, rec, model, record, state_dropout,
                         update_src=True, update_dst=True)

    if not sequential:
        for pos, (ev, rec) in enumerate(zip(batch.events, records)):
            _update_step(
                store, producers, rec, model, record, state_dropout,
                update_src=batch.last_event_per_node[ev.src] == pos,
                update_dst=batch.last_event_per_node[ev.dst] == pos,
            )
    return records


def _update_step(
    store: NodeStateStore,
    producers: dict[int, Slot],
    rec: StepRecord,
    model: GrnnModel,
    record: bool,
    state_dropout: StateDropout | None,
    update_src: bool,
    update_dst: bool,
) -> None:
    ev = rec.event
    if state_dropout is not None:
        rec.drop_kind = state_dropout.kind
        rec.drop_rate = state_dropout.rate
    if update_src:
        h_new, cache = _update_node(model, "src", rec.h_src_pre, rec.h_dst_pre, ev.features)
        h_new, mask = _apply_state_dropout(h_new, rec.h_src_pre, state_dropout)
        rec.h_src_post = h_new
        rec.drop_mask_src = mask
        if record:
            rec.cache_src = cache
        store.set_state(ev.src, h_new, ev.index)
        producers[ev.src] = (rec, "src")
    if update_dst:
        h_new, cache = _update_node(model, "dst", rec.h_dst_pre, rec.h_src_pre, ev.features)
        h_new, mask = _apply_state_dropout(h_new, rec.h_dst_pre, state_dropout)
        rec.h_dst_post = h_new
        rec.drop_mask_dst = mask
        if record:
            rec.cache_dst = cache
        store.set_state(ev.dst, h_new, ev.index)
        producers[ev.dst] = (rec, "dst")


def apply_events_sequential(
    store: NodeStateStore,
    events: list[Event],
    model: GrnnModel,
    producers: dict[int, Slot] | None = None,
    record: bool = False,
) -> list[StepRecord]:
    """Strictly serial processing of a whole event list."""
    batch = Batch(events=list(events), strategy="sequential", index=0)
    return run_batch(store, producers if producers is not None else {}, batch, model, record)


def apply_batch_parallel(
    store: NodeStateStore,
    batch: Batch,
    model: GrnnModel,
    producers: dict[int, Slot] | None = None,
    record: bool = False,
) -> list[StepRecord]:
    """Parallel-semantics processing of one pre-built batch."""
    if batch.strategy == "sequential":
        raise ParameterError("apply_batch_parallel needs a t_batch or fixed_parallel batch")
    return run_batch(store, producers if producers is not None else {}, batch, model, record)


def reset_states(store: NodeStateStore) -> NodeStateStore:
    return store.reset()
