"""Per-frame randomness of irregular-repetition slotted ALOHA and the CSA graph.

Random numbers are drawn from a ``numpy.random.Generator`` in a fixed order
per frame: N uniforms for activity (device index order), one uniform per
active device for its degree, then ``sum(degrees)`` uniforms for replica
placement (active devices in index order).
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import _kernels
from .geometry import Coverage

log = logging.getLogger(__name__)


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class DegreeDistribution:
    """Replica-count distribution Omega(x) = sum_d p_d x^d."""

    degrees: tuple[int, ...]
    probs: tuple[float, ...]

    @property
    def max_degree(self) -> int:
        return max(self.degrees)

    @property
    def mean(self) -> float:
        return float(np.dot(self.degrees, self.probs))

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.degrees, self.probs))

    def __str__(self):
        return " + ".join(f"{p:.4g}x^{d}" for d, p in zip(self.degrees, self.probs))


def normalize_distribution(raw: Mapping[int, float], warn_tol: float = 1e-6) -> DegreeDistribution:
    """Validate degree -> weight coefficients and scale them to sum to one."""
    if not raw:
        raise DistributionError("degree distribution is empty")
    items = sorted((int(d), float(w)) for d, w in raw.items())
    for d, w in items:
        if d < 1:
            raise DistributionError(f"degree {d} must be >= 1")
        if not np.isfinite(w) or w < 0:
            raise DistributionError(f"weight for degree {d} must be finite and >= 0")
    total = sum(w for _, w in items)
    if total <= 0:
        raise DistributionError("degree distribution has no positive weight")
    if abs(total - 1.0) > warn_tol:
        log.warning("degree distribution weights sum to %.6g; normalising", total)
    items = [(d, w / total) for d, w in items if w > 0]
    return DegreeDistribution(tuple(d for d, _ in items), tuple(w for _, w in items))


SLOTTED_ALOHA = normalize_distribution({1: 1.0})
CRDSA = normalize_distribution({2: 1.0})
# Sixteen-degree IRSA distribution as printed; the printed weights sum to 1.254.
IRSA16_RAW = {2: 0.498, 3: 0.221, 4: 0.038, 5: 0.076, 6: 0.040, 7: 0.01, 8: 0.09,
              9: 0.07, 11: 0.03, 14: 0.043, 15: 0.08, 16: 0.058}
IRSA16 = normalize_distribution(IRSA16_RAW, warn_tol=np.inf)


@dataclass(frozen=True)
class FrameInstance:
    """One frame: active devices, their degrees and flattened replica slots.

    Replica slots of ``active[a]`` are ``slots[ptr[a]:ptr[a+1]]`` (0-based).
    """

    n_devices: int
    n_slots: int
    active: np.ndarray
    degrees: np.ndarray
    ptr: np.ndarray
    slots: np.ndarray

    def replica_slots(self, device: int) -> frozenset[int]:
        a = int(np.searchsorted(self.active, device))
        if a >= self.active.size or self.active[a] != device:
            return frozenset()
        return frozenset(self.slots[self.ptr[a]:self.ptr[a + 1]].tolist())

    @classmethod
    def from_slots(cls, n_devices: int, n_slots: int, replicas: Mapping[int, set]) -> "FrameInstance":
        """Build a frame by hand from {device: replica slot set}."""
        active = np.array(sorted(replicas), dtype=np.int64)
        lists = [sorted(replicas[i]) for i in active]
        for i, s in zip(active, lists):
            if not s or min(s) < 0 or max(s) >= n_slots:
                raise ValueError(f"device {i} needs replica slots inside 0..{n_slots - 1}")
        degrees = np.array([len(s) for s in lists], dtype=np.int64)
        ptr = np.zeros(active.size + 1, dtype=np.int64)
        np.cumsum(degrees, out=ptr[1:])
        slots = np.array([k for s in lists for k in s], dtype=np.int64)
        return cls(n_devices, n_slots, active, degrees, ptr, slots)


def sample_activity(n_devices: int, pa: float, rng: np.random.Generator) -> np.ndarray:
    """Indices of devices active this frame, each independently with probability pa."""
    if not 0.0 <= pa <= 1.0:
        raise ValueError("activation probability must lie in [0, 1]")
    return np.flatnonzero(rng.random(n_devices) < pa)


def sample_degrees(omega: DegreeDistribution, count: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(omega.probs)
    idx = np.searchsorted(cdf, rng.random(count) * cdf[-1], side="right")
    return np.asarray(omega.degrees, dtype=np.int64)[np.minimum(idx, len(cdf) - 1)]


def sample_degree(omega: DegreeDistribution, rng: np.random.Generator) -> int:
    return int(sample_degrees(omega, 1, rng)[0])


def place_replicas(d: int, n_slots: int, rng: np.random.Generator) -> frozenset[int]:
    """Uniformly random set of d distinct slots out of n_slots."""
    if not 1 <= d <= n_slots:
        raise ValueError(f"cannot place {d} replicas in {n_slots} slots")
    slots = _kernels.place_replicas(np.array([d], dtype=np.int64), rng.random(d), n_slots)
    return frozenset(slots.tolist())


def generate_frame(n_devices: int, pa: float, omega: DegreeDistribution, n_slots: int,
                   rng: np.random.Generator) -> FrameInstance:
    if omega.max_degree > n_slots:
        raise ValueError(f"max degree {omega.max_degree} exceeds frame length {n_slots}")
    active = sample_activity(n_devices, pa, rng)
    degrees = sample_degrees(omega, active.size, rng)
    ptr = np.zeros(active.size + 1, dtype=np.int64)
    np.cumsum(degrees, out=ptr[1:])
    slots = _kernels.place_replicas(degrees, rng.random(int(ptr[-1])), n_slots)
    return FrameInstance(n_devices, n_slots, active, degrees, ptr, slots)


@dataclass(frozen=True)
class CsaGraph:
    """Bipartite graph between active devices and (AP, slot) nodes.

    Slot node ``j * n_slots + k`` is slot k at AP j.  ``edge_dev`` holds
    global device indices.  Active-but-uncovered devices stay in
    ``devices`` with degree zero.
    """

    devices: np.ndarray
    n_aps: int
    n_slots: int
    edge_dev: np.ndarray
    edge_node: np.ndarray

    @property
    def n_slot_nodes(self) -> int:
        return self.n_aps * self.n_slots

    @property
    def n_edges(self) -> int:
        return int(self.edge_dev.size)

    def edge_set(self) -> set[tuple[int, int, int]]:
        """Edges as (device, ap, slot) triples."""
        return {(int(i), int(s) // self.n_slots, int(s) % self.n_slots)
                for i, s in zip(self.edge_dev, self.edge_node)}

    def device_degrees(self) -> dict[int, int]:
        c = Counter(self.edge_dev.tolist())
        return {int(i): c.get(int(i), 0) for i in self.devices}

    def slot_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_node, minlength=self.n_slot_nodes)

    def slot_members(self) -> list[set[int]]:
        members: list[set[int]] = [set() for _ in range(self.n_slot_nodes)]
        for i, s in zip(self.edge_dev.tolist(), self.edge_node.tolist()):
            members[s].add(i)
        return members

    @classmethod
    def from_edges(cls, devices, n_aps: int, n_slots: int, edges) -> "CsaGraph":
        """Build from (device, ap, slot) triples; handy for hand-made graphs."""
        edges = sorted(set(edges))
        dev = np.array([e[0] for e in edges], dtype=np.int64)
        node = np.array([e[1] * n_slots + e[2] for e in edges], dtype=np.int64)
        return cls(np.array(sorted(devices), dtype=np.int64), n_aps, n_slots, dev, node)


def build_graph(frame: FrameInstance, coverage: Coverage) -> CsaGraph:
    """Edge (i, jk) for every active i, every AP j with h_ij > 0, every replica slot k."""
    if coverage.n_devices != frame.n_devices:
        raise ValueError("coverage and frame disagree on the number of devices")
    support = coverage.support
    dev, node = [], []
    for a, i in enumerate(frame.active):
        aps = np.flatnonzero(support[i])
        ks = frame.slots[frame.ptr[a]:frame.ptr[a + 1]]
        nodes = (aps[:, None] * frame.n_slots + ks[None, :]).ravel()
        dev.append(np.full(nodes.size, i, dtype=np.int64))
        node.append(nodes)
    edge_dev = np.concatenate(dev) if dev else np.zeros(0, dtype=np.int64)
    edge_node = np.concatenate(node) if node else np.zeros(0, dtype=np.int64)
    return CsaGraph(frame.active.copy(), coverage.n_aps, frame.n_slots,
                    edge_dev.astype(np.int64), edge_node.astype(np.int64))


def measure_degree_distributions(graph: CsaGraph) -> tuple[dict[int, float], dict[int, float]]:
    """Empirical device (Lambda) and slot (P) degree fractions; zero degrees kept.

    An empty node class yields an empty dict.
    """
    def fractions(degs):
        degs = list(degs)
        if not degs:
            return {}
        c = Counter(degs)
        return {int(d): n / len(degs) for d, n in sorted(c.items())}

    return (fractions(graph.device_degrees().values()),
            fractions(graph.slot_degrees().tolist()))
