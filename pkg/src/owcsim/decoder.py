"""Iterative interference-cancellation (peeling) decoding of a CSA graph.

One algorithm covers both spatial (single-slot) and spatio-temporal
decoding: a decoded device is cancelled from every slot node it touches,
whatever the AP and slot.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .protocol import CsaGraph


class SlotClass(enum.Enum):
    EMPTY = "empty"
    SINGLETON = "singleton"
    COLLISION = "collision"


@dataclass(frozen=True)
class SlotState:
    classification: SlotClass
    residual: frozenset


@dataclass
class DecodeResult:
    decoded: frozenset
    iterations: int
    per_iteration: list[int]
    schedule: list[list[int]] = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, DecodeResult):
            return NotImplemented
        return (self.decoded == other.decoded and self.iterations == other.iterations
                and self.per_iteration == other.per_iteration)


def classify_slots(graph: CsaGraph, removed=frozenset()) -> list[SlotState]:
    """Classify every slot node once the devices in ``removed`` are cancelled."""
    states = []
    for members in graph.slot_members():
        residual = frozenset(members - set(removed))
        if not residual:
            cls = SlotClass.EMPTY
        elif len(residual) == 1:
            cls = SlotClass.SINGLETON
        else:
            cls = SlotClass.COLLISION
        states.append(SlotState(cls, residual))
    return states


def _device_csr(graph: CsaGraph):
    """Slot nodes of each device (in ``graph.devices`` order) as CSR arrays."""
    local = np.searchsorted(graph.devices, graph.edge_dev)
    order = np.argsort(local, kind="stable")
    nodes = graph.edge_node[order]
    counts = np.bincount(local, minlength=graph.devices.size)
    ptr = np.zeros(graph.devices.size + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, nodes.astype(np.int64)


def peel_decode(graph: CsaGraph, order_rng: np.random.Generator | None = None) -> DecodeResult:
    """Decode a CSA graph by iterative singleton cancellation.

    By default each iteration decodes, as one batch, every singleton present
    at its start, then cancels them.  Passing ``order_rng`` switches to a
    one-singleton-at-a-time schedule in random order; the terminal decoded
    set is the same, only the iteration accounting differs.
    """
    if order_rng is not None:
        return _peel_random_order(graph, order_rng)
    n_dev = graph.devices.size
    if n_dev == 0:
        return DecodeResult(frozenset(), 0, [])
    ptr, nodes = _device_csr(graph)
    # Generic graph as a frame: one pseudo-replica per device in a single slot,
    # and the device's slot nodes playing the role of its covering APs.
    ident = np.arange(n_dev, dtype=np.int64)
    one_rep = np.arange(n_dev + 1, dtype=np.int64)
    zero_slot = np.zeros(n_dev, dtype=np.int64)
    n_nodes = max(graph.n_slot_nodes, 1)
    decoded = np.empty(n_dev, np.bool_)
    order = np.empty(n_dev, np.int64)
    per_iter = np.empty(n_dev + 1, np.int64)
    bufs = [np.empty(n_nodes, np.int64) for _ in range(4)]
    total, iters = _kernels.peel_frame(ident, one_rep, zero_slot, ptr, nodes, n_nodes, 1,
                                       bufs[0], bufs[1], decoded, bufs[2], bufs[3],
                                       order, per_iter)
    per_iteration = per_iter[:iters].tolist()
    ids = graph.devices[order[:total]].tolist()
    bounds = np.cumsum([0] + per_iteration)
    schedule = [sorted(ids[bounds[t]:bounds[t + 1]]) for t in range(iters)]
    return DecodeResult(frozenset(ids), int(iters), per_iteration, schedule)


def _peel_random_order(graph: CsaGraph, rng: np.random.Generator) -> DecodeResult:
    members = graph.slot_members()
    by_device: dict[int, list[int]] = {int(i): [] for i in graph.devices}
    for s, m in enumerate(members):
        for i in m:
            by_device[i].append(s)
    decoded: list[int] = []
    while True:
        singles = [s for s, m in enumerate(members) if len(m) == 1]
        if not singles:
            break
        s = singles[rng.integers(len(singles))]
        (i,) = members[s]
        decoded.append(i)
        for t in by_device[i]:
            members[t].discard(i)
    return DecodeResult(frozenset(decoded), len(decoded), [1] * len(decoded),
                        [[i] for i in decoded])


def reference_decode(graph: CsaGraph) -> DecodeResult:
    """Naive rescan decoder used as an independent check on ``peel_decode``."""
    residual = graph.slot_members()
    decoded: set[int] = set()
    per_iteration: list[int] = []
    schedule: list[list[int]] = []
    while len(decoded) < graph.devices.size:
        found = {next(iter(m)) for m in residual if len(m) == 1}
        if not found:
            break
        decoded |= found
        per_iteration.append(len(found))
        schedule.append(sorted(found))
        residual = [m - found for m in residual]
    return DecodeResult(frozenset(decoded), len(per_iteration), per_iteration, schedule)
