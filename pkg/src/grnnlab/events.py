"""Event/graph data model and the per-node hidden-state store."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError, StructuralError

STORE_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Event:
    """One timestamped interaction between two distinct nodes.

    y is the regression target where the task defines one; link-prediction
    events are implicit positives and carry y=None. Identity semantics: the
    numpy feature field makes value equality ill-defined.
    """

    index: int
    src: int
    dst: int
    time: float
    features: np.ndarray
    y: float | None = None

    def __post_init__(self):
        if self.src == self.dst:
            raise ParameterError(f"event {self.index}: self-loop on node {self.src}")


def validate_stream(events: list[Event]) -> None:
    """Timestamps must be non-decreasing and feature dims constant."""
    prev_t = -np.inf
    dim = None
    for ev in events:
        if ev.time < prev_t:
            raise DataError(f"event {ev.index}: timestamp decreases ({ev.time} < {prev_t})")
        prev_t = ev.time
        if dim is None:
            dim = ev.features.size
        elif ev.features.size != dim:
            raise DataError(f"event {ev.index}: feature dim {ev.features.size} != {dim}")


@dataclass
class NodeStateStore:
    """Hidden state h(i) for every node plus last-update bookkeeping."""

    states: np.ndarray  # (num_nodes, m)
    last_update_event: np.ndarray  # (num_nodes,) event ordinal, -1 = never

    @classmethod
    def zeros(cls, num_nodes: int, m: int) -> "NodeStateStore":
        return cls(
            states=np.zeros((num_nodes, m)),
            last_update_event=np.full(num_nodes, -1, dtype=np.int64),
        )

    @property
    def num_nodes(self) -> int:
        return self.states.shape[0]

    @property
    def m(self) -> int:
        return self.states.shape[1]

    def check_node(self, node: int) -> None:
        if not 0 <= node < self.num_nodes:
            raise StructuralError(f"unknown node id {node} (store has {self.num_nodes})")

    def reset(self) -> "NodeStateStore":
        """Zero all states and clear bookkeeping; idempotent."""
        self.states.fill(0.0)
        self.last_update_event.fill(-1)
        return self

    def set_state(self, node: int, value: np.ndarray, event_index: int) -> None:
        self.check_node(node)
        self.states[node] = value
        self.last_update_event[node] = event_index

    def copy(self) -> "NodeStateStore":
        return NodeStateStore(self.states.copy(), self.last_update_event.copy())

    # serialization ---------------------------------------------------------

    def save(self, path: str) -> None:
        payload = {
            "version": STORE_FORMAT_VERSION,
            "num_nodes": self.num_nodes,
            "state_dim": self.m,
            "states": self.states.reshape(-1).tolist(),
            "last_update_event": self.last_update_event.tolist(),
        }
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(payload, fh)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str) -> "NodeStateStore":
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("version") != STORE_FORMAT_VERSION:
            raise DataError(f"unsupported store format version {payload.get('version')}")
        n, m = payload["num_nodes"], payload["state_dim"]
        states = np.asarray(payload["states"], dtype=np.float64).reshape(n, m)
        last = np.asarray(payload["last_update_event"], dtype=np.int64)
        return cls(states=states, last_update_event=last)


@dataclass
class Batch:
    """An ordered slice of the global event stream plus its update semantics.

    strategy:
      sequential     - events processed one by one, updates visible within
                       the batch.
      t_batch        - conflict-free parallel batch (no node repeats).
      fixed_parallel - parallel batch where a node's last in-batch event
                       determines its new state; earlier same-batch updates
                       to that node are dropped.
    """

    events: list[Event]
    strategy: str
    index: int = 0
    last_event_per_node: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.strategy in ("fixed_parallel", "t_batch"):
            for pos, ev in enumerate(self.events):
                self.last_event_per_node[ev.src] = pos
                self.last_event_per_node[ev.dst] = pos

    def node_ids(self) -> set[int]:
        ids: set[int] = set()
        for ev in self.events:
            ids.add(ev.src)
            ids.add(ev.dst)
        return ids
