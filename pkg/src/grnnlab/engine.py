"""Event-level gradient tape, full and truncated BPTT, and the epoch loop.

Forward: batches are processed per their strategy; each event's prediction
reads the pre-update states captured by the dynamics layer, so parallel
strategies score from the batch-start snapshot and sequential scoring sees
all earlier updates.

Full backward is an exact reverse sweep over the whole tape: per-event loss
gradients flow through the prediction head and, via the producer slots, back
across every batch boundary to the epoch-initial states.

Truncated backward sweeps each batch separately. Within a batch gradients
flow freely; a gradient that reaches a state produced in an *earlier* batch
still enters the single GRU update that produced it (so the recurrent cell
keeps a one-hop learning signal, as in standard lazy-update training), but
that update's own state inputs are treated as constants and the chain stops
there. Per-parameter gradients from all batches are summed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adamw import AdamwState, adamw_step
from .batching import make_batches_fixed, make_batches_tbatch
from .dynamics import Slot, StateDropout, StepRecord, run_batch
from .errors import ConfigError, NumericalError, StructuralError
from .events import Batch, Event, NodeStateStore
from .gru import gru_backward, stable_sigmoid
from .mlp import mlp_backward, mlp_forward
from .model import GrnnModel
from .rng import Rng

# ---------------------------------------------------------------------------
# losses


def loss_mse(y_hat: float, y: float) -> tuple[float, float]:
    """Squared error and its gradient w.r.t. y_hat."""
    diff = y_hat - y
    return diff * diff, 2.0 * diff


def loss_bce(logit: float, label: float) -> tuple[float, float]:
    """Binary cross-entropy in stable logit form; gradient is sigmoid - label."""
    val = max(logit, 0.0) - logit * label + math.log1p(math.exp(-abs(logit)))
    grad = float(stable_sigmoid(np.array([logit]))[0]) - label
    return val, grad


# ---------------------------------------------------------------------------
# batching configuration


@dataclass
class BatchingConfig:
    """strategy in {sequential, t_batch, fixed_parallel}; batch_size None
    means one epoch-spanning batch (sequential only)."""

    strategy: str = "fixed_parallel"
    batch_size: int | None = 200


def build_batches(events: list[Event], cfg: BatchingConfig) -> list[Batch]:
    if cfg.strategy == "t_batch":
        return make_batches_tbatch(events)
    if cfg.strategy == "sequential":
        if cfg.batch_size is None:
            return [Batch(events=list(events), strategy="sequential", index=0)] if events else []
        return make_batches_fixed(events, cfg.batch_size, strategy="sequential")
    if cfg.strategy == "fixed_parallel":
        if cfg.batch_size is None:
            raise ConfigError("fixed_parallel batching requires a batch size")
        return make_batches_fixed(events, cfg.batch_size)
    raise ConfigError(f"unknown batching strategy {cfg.strategy!r}")


# ---------------------------------------------------------------------------
# tape and accumulator


class EventTape:
    """Ordered per-event records; batch boundaries live on the records."""

    def __init__(self, recorded: bool = True):
        self.records: list[StepRecord] = []
        self.recorded = recorded

    def __len__(self) -> int:
        return len(self.records)

    def extend(self, records: list[StepRecord]) -> None:
        self.records.extend(records)

    def batch_groups(self) -> list[list[StepRecord]]:
        groups: list[list[StepRecord]] = []
        current_idx = None
        for rec in self.records:
            if rec.batch_index != current_idx:
                groups.append([])
                current_idx = rec.batch_index
            groups[-1].append(rec)
        return groups


class GradientAccumulator:
    """Parameter-shaped gradient buffers plus event/loss counters."""

    def __init__(self, model: GrnnModel):
        self.buffers = {name: np.zeros_like(p) for name, p in model.named_params().items()}
        self.event_count = 0
        self.loss_total = 0.0

    def zero(self) -> None:
        for b in self.buffers.values():
            b.fill(0.0)
        self.event_count = 0
        self.loss_total = 0.0

    def grad_norm(self) -> float:
        return math.sqrt(sum(float((b * b).sum()) for b in self.buffers.values()))


# ---------------------------------------------------------------------------
# forward


@dataclass
class EpochForward:
    total_loss: float
    losses: list[float]
    tape: EventTape | None


def _predict_and_score(
    records: list[StepRecord],
    model: GrnnModel,
    task: str,
    training: bool,
    mlp_dropout: float,
    dropout_rng: Rng | None,
) -> float:
    """Fill prediction caches and losses on freshly produced records."""
    batch_loss = 0.0
    for rec in records:
        ev = rec.event
        if task == "regression":
            x = np.concatenate((rec.h_src_pre, rec.h_dst_pre, ev.features))
            y_hat, cache = mlp_forward(
                model.mlp, x, dropout_rate=mlp_dropout, rng=dropout_rng, training=training
            )
            rec.loss, rec.grad_logit_pred = loss_mse(y_hat, ev.y)
            rec.pred_cache = cache
        else:  # link_ranking: positive edge vs one sampled negative
            x_pos = np.concatenate((rec.h_src_pre, rec.h_dst_pre))
            logit_pos, cache_pos = mlp_forward(
                model.mlp, x_pos, dropout_rate=mlp_dropout, rng=dropout_rng, training=training
            )
            loss_pos, rec.grad_logit_pred = loss_bce(logit_pos, 1.0)
            rec.pred_cache = cache_pos
            x_neg = np.concatenate((rec.h_src_pre, rec.h_extra_pre))
            logit_neg, cache_neg = mlp_forward(
                model.mlp, x_neg, dropout_rate=mlp_dropout, rng=dropout_rng, training=training
            )
            loss_neg, rec.grad_logit_neg = loss_bce(logit_neg, 0.0)
            rec.neg_cache = cache_neg
            rec.loss = loss_pos + loss_neg
        if not math.isfinite(rec.loss):
            raise NumericalError(f"non-finite loss at event {ev.index}")
        batch_loss += rec.loss
    return batch_loss


def _sample_negatives(
    batch: Batch, neg_universe: np.ndarray, rng: Rng
) -> list[int]:
    return [int(neg_universe[rng.randrange(len(neg_universe))]) for _ in batch.events]


def forward_epoch(
    events: list[Event],
    model: GrnnModel,
    store: NodeStateStore,
    batching: BatchingConfig,
    record: bool = True,
    task: str | None = None,
    rng: Rng | None = None,
    neg_universe: np.ndarray | None = None,
    state_dropout: StateDropout | None = None,
    mlp_dropout: float = 0.0,
    dropout_rng: Rng | None = None,
    training: bool = False,
    producers: dict[int, Slot] | None = None,
) -> EpochForward:
    """Process all batches, returning summed loss, per-event losses, tape."""
    task = task or model.task
    if task == "link_ranking" and (neg_universe is None or rng is None):
        raise ConfigError("link_ranking forward needs a negative universe and rng")
    producers = {} if producers is None else producers
    tape = EventTape(recorded=record) if record else None
    total = 0.0
    losses: list[float] = []
    for batch in build_batches(events, batching):
        extra = _sample_negatives(batch, neg_universe, rng) if task == "link_ranking" else None
        records = run_batch(
            store, producers, batch, model,
            record=record,
            state_dropout=state_dropout if training else None,
            extra_reads=extra,
        )
        total += _predict_and_score(records, model, task, training, mlp_dropout, dropout_rng)
        losses.extend(rec.loss for rec in records)
        if record:
            tape.extend(records)
    return EpochForward(total_loss=total, losses=losses, tape=tape)


def advance_states(
    events: list[Event],
    model: GrnnModel,
    store: NodeStateStore,
    batching: BatchingConfig,
) -> None:
    """Run the state dynamics only (no predictions, no tape); used to warm
    stores before evaluation."""
    producers: dict[int, Slot] = {}
    for batch in build_batches(events, batching):
        run_batch(store, producers, batch, model, record=False)


# ---------------------------------------------------------------------------
# backward


def _dropout_backward(
    g_out: np.ndarray, mask: np.ndarray | None, kind: str | None, rate: float
) -> tuple[np.ndarray, np.ndarray | None]:
    """Route a produced-state gradient through the state dropout that made it.

    Returns (gradient into the GRU output, extra gradient onto the pre-update
    state) - the latter only for the recurrent mix, whose dropped elements
    passed the previous state through.
    """
    if mask is None:
        return g_out, None
    if kind == "regular":
        return g_out * mask / (1.0 - rate), None
    return g_out * mask, g_out * ~mask


def _add(into: np.ndarray | None, g: np.ndarray) -> np.ndarray:
    if into is None:
        return g
    into += g
    return into


def _backward_records(
    records: list[StepRecord],
    model: GrnnModel,
    buffers: dict[str, np.ndarray],
    slot_grads: dict[tuple[int, str], np.ndarray],
    truncate: bool,
) -> None:
    """Reverse sweep over one contiguous record span (a batch, or the whole
    tape when called with truncate=False)."""
    m = model.m
    for rec in reversed(records):
        g_src_out = slot_grads.pop((id(rec), "src"), None)
        g_dst_out = slot_grads.pop((id(rec), "dst"), None)

        g_src = None  # grad w.r.t. h_src_pre
        g_dst = None
        g_extra = None

        # prediction path
        if rec.pred_cache is not None:
            _, gx = mlp_backward(model.mlp, rec.pred_cache, rec.grad_logit_pred, buffers, "mlp.")
            g_src = gx[:m].copy()
            g_dst = gx[m : 2 * m].copy()
        if rec.neg_cache is not None:
            _, gx = mlp_backward(model.mlp, rec.neg_cache, rec.grad_logit_neg, buffers, "mlp.")
            g_src = _add(g_src, gx[:m])
            g_extra = gx[m : 2 * m].copy()

        # own state updates
        if g_src_out is not None:
            if rec.cache_src is None:
                raise StructuralError("gradient arrived at an unrecorded update")
            g_new, g_prev = _dropout_backward(
                g_src_out, rec.drop_mask_src, rec.drop_kind, rec.drop_rate
            )
            params, prefix = model.gru_for_role("src")
            _, gh_prev, gx_in = gru_backward(params, rec.cache_src, g_new, buffers, prefix)
            g_src = _add(g_src, gh_prev)
            if g_prev is not None:
                g_src = _add(g_src, g_prev)
            g_dst = _add(g_dst, gx_in[:m])
        if g_dst_out is not None:
            if rec.cache_dst is None:
                raise StructuralError("gradient arrived at an unrecorded update")
            g_new, g_prev = _dropout_backward(
                g_dst_out, rec.drop_mask_dst, rec.drop_kind, rec.drop_rate
            )
            params, prefix = model.gru_for_role("dst")
            _, gh_prev, gx_in = gru_backward(params, rec.cache_dst, g_new, buffers, prefix)
            g_dst = _add(g_dst, gh_prev)
            if g_prev is not None:
                g_dst = _add(g_dst, g_prev)
            g_src = _add(g_src, gx_in[:m])

        # route gradients on consumed states to their producers
        for slot, g in ((rec.src_slot, g_src), (rec.dst_slot, g_dst), (rec.extra_slot, g_extra)):
            if slot is None or g is None:
                continue  # epoch-initial state (constant) or no gradient
            prod, role = slot
            if not truncate or prod.batch_index == rec.batch_index:
                key = (id(prod), role)
                if key in slot_grads:
                    slot_grads[key] += g
                else:
                    slot_grads[key] = g
            else:
                _one_hop_tail(prod, role, g, model, buffers)


def _one_hop_tail(
    prod: StepRecord,
    role: str,
    g: np.ndarray,
    model: GrnnModel,
    buffers: dict[str, np.ndarray],
) -> None:
    """Cross-boundary gradient: enter the producing update, then stop.

    The producing GRU application contributes parameter gradients; its own
    state inputs (and any recurrent-dropout passthrough) are constants.
    """
    cache = prod.cache_src if role == "src" else prod.cache_dst
    mask = prod.drop_mask_src if role == "src" else prod.drop_mask_dst
    if cache is None:
        raise StructuralError("gradient arrived at an unrecorded update")
    g_new, _ = _dropout_backward(g, mask, prod.drop_kind, prod.drop_rate)
    params, prefix = model.gru_for_role(role)
    gru_backward(params, cache, g_new, buffers, prefix)


def _check_tape(tape: EventTape) -> None:
    if tape is None or not tape.recorded:
        raise StructuralError("backward pass needs a tape recorded with record=True")


def backward_full(tape: EventTape, model: GrnnModel) -> GradientAccumulator:
    """Exact reverse-mode sweep across the entire epoch."""
    _check_tape(tape)
    acc = GradientAccumulator(model)
    slot_grads: dict[tuple[int, str], np.ndarray] = {}
    _backward_records(tape.records, model, acc.buffers, slot_grads, truncate=False)
    acc.event_count = len(tape.records)
    acc.loss_total = sum(rec.loss for rec in tape.records)
    return acc


def backward_truncated(tape: EventTape, model: GrnnModel) -> GradientAccumulator:
    """Per-batch sweeps with cross-boundary flow cut after one producing hop."""
    _check_tape(tape)
    acc = GradientAccumulator(model)
    for group in tape.batch_groups():
        slot_grads: dict[tuple[int, str], np.ndarray] = {}
        _backward_records(group, model, acc.buffers, slot_grads, truncate=True)
    acc.event_count = len(tape.records)
    acc.loss_total = sum(rec.loss for rec in tape.records)
    return acc


# ---------------------------------------------------------------------------
# training


MODES = ("f_bptt", "t_bptt")


def train_epoch(
    events: list[Event],
    model: GrnnModel,
    optimizer: AdamwState,
    mode: str,
    batching: BatchingConfig,
    task: str | None = None,
    rng: Rng | None = None,
    neg_universe: np.ndarray | None = None,
    state_dropout: StateDropout | None = None,
    mlp_dropout: float = 0.0,
    dropout_rng: Rng | None = None,
    store: NodeStateStore | None = None,
    num_nodes: int | None = None,
    reset_store: bool = True,
    step_per_batch: bool = False,
) -> dict:
    """One epoch: forward, backward per the mode, one optimizer step.

    The summed epoch loss drives gradients; the mean per-event loss is what
    gets reported. step_per_batch switches t_bptt to an online regime with
    one optimizer step per batch (off by default).
    """
    if mode not in MODES:
        raise ConfigError(f"unknown training mode {mode!r}")
    task = task or model.task
    if store is None:
        if num_nodes is None:
            raise ConfigError("train_epoch needs a store or num_nodes")
        store = NodeStateStore.zeros(num_nodes, model.m)
    if reset_store:
        store.reset()
    params = model.named_params()
    n_events = len(events)

    if mode == "f_bptt":
        fw = forward_epoch(
            events, model, store, batching,
            record=True, task=task, rng=rng, neg_universe=neg_universe,
            state_dropout=state_dropout, mlp_dropout=mlp_dropout,
            dropout_rng=dropout_rng, training=True,
        )
        acc = backward_full(fw.tape, model)
        peak_live = len(fw.tape)
        total_loss = fw.total_loss
        grad_norm = acc.grad_norm()
        adamw_step(optimizer, params, acc.buffers)
    else:
        # streaming truncated training: backward each batch as soon as it is
        # forwarded, then release its records. Only the per-node producing
        # records (one GRU cache each) stay alive for the one-hop tails.
        producers: dict[int, Slot] = {}
        acc = GradientAccumulator(model)
        total_loss = 0.0
        peak_live = 0
        grad_norms: list[float] = []
        for batch in build_batches(events, batching):
            extra = (
                _sample_negatives(batch, neg_universe, rng)
                if task == "link_ranking"
                else None
            )
            records = run_batch(
                store, producers, batch, model,
                record=True,
                state_dropout=state_dropout,
                extra_reads=extra,
            )
            batch_loss = _predict_and_score(
                records, model, task, True, mlp_dropout, dropout_rng
            )
            total_loss += batch_loss
            acc.event_count += len(records)
            acc.loss_total += batch_loss
            slot_grads: dict[tuple[int, str], np.ndarray] = {}
            _backward_records(records, model, acc.buffers, slot_grads, truncate=True)
            live_producers = {id(slot[0]) for slot in producers.values()}
            peak_live = max(peak_live, len(records) + len(live_producers))
            if step_per_batch:
                grad_norms.append(acc.grad_norm())
                adamw_step(optimizer, params, acc.buffers)
                acc.zero()
        if step_per_batch:
            grad_norm = grad_norms[-1] if grad_norms else 0.0
        else:
            grad_norm = acc.grad_norm()
            adamw_step(optimizer, params, acc.buffers)

    for name, p in params.items():
        if not np.all(np.isfinite(p)):
            raise NumericalError(f"non-finite parameter {name} after optimizer step")
    return {
        "mean_loss": total_loss / n_events if n_events else 0.0,
        "total_loss": total_loss,
        "grad_norm": grad_norm,
        "n_events": n_events,
        "peak_live_records": peak_live,
    }
