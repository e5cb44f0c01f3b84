"""Seeded Monte Carlo engine: frames, metric accumulation and (p_a, FOV) sweeps.

Frames are grouped into fixed-size blocks.  Block ``b`` draws from its own
PCG64 stream derived from ``SeedSequence(master_seed, spawn_key=(b,))`` and
its frames consume that stream in order.  Block results are integer sums,
so any partitioning of blocks over workers gives bit-identical totals.

Frame randomness does not depend on the FOV, so every FOV of a sweep sees
the same frames (common random numbers).  FOVs that induce the same
coverage support are decoded once and share their result.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import Coverage, Scenario, coverage_sets
from .protocol import DegreeDistribution, generate_frame

BLOCK_SIZE = 1000
SWEEP_COLUMNS = ["pa", "fov_deg", "p_rec", "p_rec_se", "r_avg", "r_avg_se", "frames", "seed"]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


@dataclass(frozen=True)
class SeedPolicy:
    master_seed: int
    block_size: int = BLOCK_SIZE

    def block_rng(self, block: int, stream: int = 0) -> np.random.Generator:
        key = (block,) if stream == 0 else (block, stream)
        seq = np.random.SeedSequence(self.master_seed & (2 ** 64 - 1), spawn_key=key)
        return np.random.Generator(np.random.PCG64(seq))

    def blocks(self, n_frames: int):
        """Yield (block index, first frame, frame count) covering n_frames."""
        for b in range(math.ceil(n_frames / self.block_size)):
            start = b * self.block_size
            yield b, start, min(self.block_size, n_frames - start)

    def frame_rngs(self, n_frames: int, stream: int = 0):
        """Yield (frame index, generator); consecutive frames of a block share one stream."""
        for b, start, count in self.blocks(n_frames):
            rng = self.block_rng(b, stream)
            for f in range(start, start + count):
                yield f, rng


@dataclass(frozen=True)
class TrialOutcome:
    active: int
    decoded: int
    pa: float

    @property
    def sent(self) -> int:
        return self.active


@dataclass
class Accumulator:
    """Integer running sums from which Metrics are derived."""

    frames: int = 0
    sent: int = 0
    decoded: int = 0
    sent_sq: int = 0
    decoded_sq: int = 0
    cross: int = 0

    def add(self, sent: int, decoded: int):
        self.frames += 1
        self.sent += sent
        self.decoded += decoded
        self.sent_sq += sent * sent
        self.decoded_sq += decoded * decoded
        self.cross += sent * decoded

    def merge(self, other: "Accumulator") -> "Accumulator":
        return Accumulator(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def as_tuple(self):
        return (self.frames, self.sent, self.decoded, self.sent_sq, self.decoded_sq, self.cross)


@dataclass(frozen=True)
class Metrics:
    p_rec: float
    p_rec_se: float
    r_avg: float
    r_avg_se: float
    frames: int
    zero_weight: bool
    mean_sent: float
    mean_decoded: float

    @classmethod
    def from_accumulator(cls, acc: Accumulator, n_aps: int, n_slots: int) -> "Metrics":
        n = acc.frames
        if n == 0:
            raise ValueError("no frames accumulated")
        resources = n_aps * n_slots
        mean_s, mean_d = acc.sent / n, acc.decoded / n
        var_d = (acc.decoded_sq - n * mean_d ** 2) / (n - 1) if n > 1 else math.nan
        r_avg = acc.decoded / (n * resources)
        r_se = math.sqrt(max(var_d, 0.0) / n) / resources if n > 1 else math.nan
        if acc.sent == 0:
            return cls(1.0, 0.0, r_avg, r_se, n, True, mean_s, mean_d)
        p = acc.decoded / acc.sent
        if n > 1:
            # delta method: residual e_f = D_f - p * S_f has zero mean by construction
            ss = acc.decoded_sq - 2 * p * acc.cross + p * p * acc.sent_sq
            p_se = math.sqrt(max(ss, 0.0) / (n - 1) / n) / mean_s
        else:
            p_se = math.nan
        return cls(p, p_se, r_avg, r_se, n, False, mean_s, mean_d)


def _decode_one(frame, cov_ptr, cov_ap, n_aps) -> int:
    return int(_kernels.decode_classes(frame.active, frame.ptr, frame.slots,
                                       cov_ptr[None, :], cov_ap, n_aps, frame.n_slots)[0])


def run_frame(coverage: Coverage, pa: float, omega: DegreeDistribution, n_slots: int,
              rng: np.random.Generator) -> TrialOutcome:
    """Activity, degrees, replica placement, graph and peeling for one frame."""
    frame = generate_frame(coverage.n_devices, pa, omega, n_slots, rng)
    ptr, aps = coverage.csr()
    return TrialOutcome(int(frame.active.size), _decode_one(frame, ptr, aps, coverage.n_aps), pa)


@dataclass
class CoverageClasses:
    """Distinct coverage supports over a FOV grid, packed for the kernel."""

    fovs: list[float]
    class_of: list[int]
    cov_ptrs: np.ndarray
    cov_ap: np.ndarray
    n_aps: int

    @classmethod
    def build(cls, scenario: Scenario, fovs) -> "CoverageClasses":
        keys: dict[bytes, int] = {}
        ptrs, aps, class_of = [], [], []
        offset = 0
        n_aps = scenario.n_aps
        for fov in fovs:
            cov = coverage_sets(scenario.with_fov(fov))
            key = np.packbits(cov.support).tobytes()
            if key not in keys:
                keys[key] = len(ptrs)
                ptr, ap = cov.csr()
                ptrs.append(ptr + offset)
                aps.append(ap)
                offset += ap.size
            class_of.append(keys[key])
        cov_ap = np.concatenate(aps) if aps else np.zeros(0, np.int64)
        return cls(list(map(float, fovs)), class_of, np.vstack(ptrs), cov_ap, n_aps)


def _run_block(classes: CoverageClasses, n_devices: int, pa: float,
               omega: DegreeDistribution, n_slots: int, rng: np.random.Generator,
               count: int) -> np.ndarray:
    """Accumulator tuples (one row per coverage class) for ``count`` frames."""
    n_cls = classes.cov_ptrs.shape[0]
    sums = np.zeros((n_cls, 6), dtype=np.int64)
    for _ in range(count):
        frame = generate_frame(n_devices, pa, omega, n_slots, rng)
        s = frame.active.size
        d = _kernels.decode_classes(frame.active, frame.ptr, frame.slots,
                                    classes.cov_ptrs, classes.cov_ap, classes.n_aps, n_slots)
        sums[:, 0] += 1
        sums[:, 1] += s
        sums[:, 2] += d
        sums[:, 3] += s * s
        sums[:, 4] += d * d
        sums[:, 5] += s * d
    return sums


@dataclass
class SweepTable:
    """Metrics on a (p_a, FOV) grid; ``cells[a][f]`` is p_a index a, FOV index f."""

    pa_grid: list[float]
    fov_grid: list[float]
    cells: list[list[Metrics]]
    seed: int
    n_aps: int
    n_slots: int
    extra: dict = field(default_factory=dict)

    def cell(self, pa: float, fov: float) -> Metrics:
        return self.cells[self.pa_grid.index(pa)][self.fov_grid.index(fov)]

    def r_avg(self) -> np.ndarray:
        return np.array([[m.r_avg for m in row] for row in self.cells])

    def rows(self) -> list[dict]:
        out = []
        for pa, row in zip(self.pa_grid, self.cells):
            for fov, m in zip(self.fov_grid, row):
                out.append({"pa": pa, "fov_deg": fov, "p_rec": m.p_rec, "p_rec_se": m.p_rec_se,
                            "r_avg": m.r_avg, "r_avg_se": m.r_avg_se, "frames": m.frames,
                            "seed": self.seed})
        return out

    def to_csv(self) -> str:
        return rows_to_csv(SWEEP_COLUMNS, self.rows())

    def to_json(self) -> str:
        return rows_to_json(SWEEP_COLUMNS, self.rows())


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) if not isinstance(r[c], str) else r[c] for c in columns])
    return buf.getvalue()


def rows_to_json(columns, rows) -> str:
    def conv(v):
        if isinstance(v, str):
            return v
        return json.loads(fmt(v)) if math.isfinite(float(v)) else None
    return json.dumps([{c: conv(r[c]) for c in columns} for r in rows], indent=1) + "\n"


def sweep(scenario: Scenario, pa_grid, fov_grid, omega: DegreeDistribution, n_slots: int,
          n_frames: int, seed: int, threads: int | None = None) -> SweepTable:
    """Metrics for every (p_a, FOV) cell; result is independent of ``threads``."""
    pa_grid = [float(p) for p in pa_grid]
    fov_grid = [float(f) for f in fov_grid]
    if not pa_grid or not fov_grid:
        raise ValueError("sweep grids must be non-empty")
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if omega.max_degree > n_slots:
        raise ValueError(f"max degree {omega.max_degree} exceeds frame length {n_slots}")
    for p in pa_grid:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"activation probability {p} outside [0, 1]")
    classes = CoverageClasses.build(scenario, fov_grid)
    policy = SeedPolicy(seed)
    n_dev = scenario.n_devices

    tasks = [(a, b, count) for a in range(len(pa_grid)) for b, _, count in policy.blocks(n_frames)]

    def work(task):
        a, b, count = task
        return _run_block(classes, n_dev, pa_grid[a], omega, n_slots, policy.block_rng(b), count)

    threads = threads or os.cpu_count() or 1
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, tasks))
    else:
        results = [work(t) for t in tasks]

    n_cls = classes.cov_ptrs.shape[0]
    totals = np.zeros((len(pa_grid), n_cls, 6), dtype=np.int64)
    for (a, _, _), sums in zip(tasks, results):
        totals[a] += sums
    cells = []
    for a in range(len(pa_grid)):
        row = []
        for f in range(len(fov_grid)):
            acc = Accumulator(*(int(v) for v in totals[a, classes.class_of[f]]))
            row.append(Metrics.from_accumulator(acc, scenario.n_aps, n_slots))
        cells.append(row)
    return SweepTable(pa_grid, fov_grid, cells, seed, scenario.n_aps, n_slots)


def run_frames(scenario: Scenario, pa: float, fov: float, omega: DegreeDistribution,
               n_slots: int, n_frames: int, seed: int, threads: int | None = None) -> Metrics:
    return sweep(scenario, [pa], [fov], omega, n_slots, n_frames, seed, threads).cells[0][0]
