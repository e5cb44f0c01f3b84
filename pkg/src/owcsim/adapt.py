"""Activation-probability estimation and closed-loop FOV adaptation."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Coverage, Scenario, coverage_sets
from .protocol import DegreeDistribution, generate_frame
from .sim import (Accumulator, Metrics, SeedPolicy, SweepTable, _decode_one,
                  rows_to_csv, rows_to_json, sweep)

LOOKUP_COLUMNS = ["pa", "fov_opt_deg", "r_avg_max", "p_rec_at_opt"]
ADAPT_COLUMNS = ["frame", "pa_true", "pa_est", "fov_deg", "sent", "decoded", "r_frame", "flagged"]
WIDE_FOV = 89.0


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class FovLookupTable:
    pa: tuple[float, ...]
    fov_opt: tuple[float, ...]
    r_avg_max: tuple[float, ...]
    p_rec_at_opt: tuple[float, ...]

    def __post_init__(self):
        if len(self.pa) == 0:
            raise ValueError("lookup table is empty")
        if any(b <= a for a, b in zip(self.pa, self.pa[1:])):
            raise ValueError("lookup p_a grid must be strictly increasing")

    def fov_for(self, pa: float) -> float:
        """FOV of the nearest p_a grid point (the lower one on exact ties)."""
        i = int(np.argmin(np.abs(np.asarray(self.pa) - pa)))
        return self.fov_opt[i]

    def rows(self) -> list[dict]:
        return [dict(zip(LOOKUP_COLUMNS, r))
                for r in zip(self.pa, self.fov_opt, self.r_avg_max, self.p_rec_at_opt)]

    def to_csv(self) -> str:
        return rows_to_csv(LOOKUP_COLUMNS, self.rows())

    def to_json(self) -> str:
        return rows_to_json(LOOKUP_COLUMNS, self.rows())

    @classmethod
    def from_csv(cls, text: str) -> "FovLookupTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        cols = [tuple(float(r[c]) for r in rows) for c in LOOKUP_COLUMNS]
        return cls(*cols)


def lookup_from_table(table: SweepTable) -> FovLookupTable:
    """Per p_a row, the FOV maximising R_avg; ties go to the larger FOV."""
    r = table.r_avg()
    fovs = np.asarray(table.fov_grid)
    opt, rmax, prec = [], [], []
    for a, row in enumerate(r):
        best = row.max()
        cand = np.flatnonzero(row == best)
        f = cand[np.argmax(fovs[cand])]
        opt.append(float(fovs[f]))
        rmax.append(float(best))
        prec.append(table.cells[a][f].p_rec)
    return FovLookupTable(tuple(table.pa_grid), tuple(opt), tuple(rmax), tuple(prec))


def optimize_fov(scenario: Scenario, pa_grid, fov_grid, omega: DegreeDistribution,
                 n_slots: int, n_frames: int, seed: int, threads: int | None = None
                 ) -> tuple[FovLookupTable, SweepTable]:
    table = sweep(scenario, sorted(pa_grid), fov_grid, omega, n_slots, n_frames, seed, threads)
    return lookup_from_table(table), table


@dataclass(frozen=True)
class PreambleObservation:
    power: np.ndarray  # received preamble power per AP, watts


def observe_preamble(active, gains: np.ndarray, tx_power: float, noise_std: float = 0.0,
                     rng: np.random.Generator | None = None) -> PreambleObservation:
    """Superposed preamble power at every AP, with optional additive Gaussian noise."""
    power = tx_power * gains[np.asarray(active, dtype=np.int64)].sum(axis=0)
    if noise_std > 0:
        if rng is None:
            raise ValueError("noisy preamble needs an rng")
        power = power + rng.normal(0.0, noise_std, size=power.shape)
    return PreambleObservation(power)


def estimate_pa_oracle(active, n_devices: int) -> float:
    return len(active) / n_devices


def estimate_pa_power(obs: PreambleObservation, gains: np.ndarray, tx_power: float) -> float:
    """Moment estimate: total received power over the power if every device were active."""
    full = gains.sum(axis=0).sum()
    if not full > 0:
        raise EstimationError("no covered devices; preamble carries no information")
    est = (obs.power.sum() / tx_power) / full
    return float(min(max(est, 0.0), 1.0))


@dataclass(frozen=True)
class AdaptiveRecord:
    frame: int
    pa_true: float
    pa_est: float
    fov_deg: float
    sent: int
    decoded: int
    r_frame: float
    flagged: bool


@dataclass
class AdaptiveRun:
    records: list[AdaptiveRecord]
    metrics: Metrics

    def rows(self) -> list[dict]:
        return [{"frame": r.frame, "pa_true": r.pa_true, "pa_est": r.pa_est,
                 "fov_deg": r.fov_deg, "sent": r.sent, "decoded": r.decoded,
                 "r_frame": r.r_frame, "flagged": int(r.flagged)} for r in self.records]

    def to_csv(self) -> str:
        return rows_to_csv(ADAPT_COLUMNS, self.rows())

    def to_json(self) -> str:
        return rows_to_json(ADAPT_COLUMNS, self.rows())


def adaptive_run(scenario: Scenario, trajectory, lookup: FovLookupTable,
                 omega: DegreeDistribution, n_slots: int, seed: int,
                 estimator: str = "oracle", noise_std: float = 0.0,
                 preamble_fov: str = "current") -> AdaptiveRun:
    """Closed loop: preamble, p_a estimate, FOV from the lookup, then the frame.

    ``trajectory`` gives the true p_a of every frame.  The loop starts at
    ``scenario.fov``.  The preamble is seen through the FOV in force before
    adaptation (``"current"``) or through a dedicated wide FOV (``"wide"``).
    A failed estimate flags the frame and keeps the previous FOV.
    """
    if estimator not in ("oracle", "power"):
        raise ValueError(f"unknown estimator {estimator!r}")
    if preamble_fov not in ("current", "wide"):
        raise ValueError(f"unknown preamble_fov {preamble_fov!r}")
    trajectory = np.asarray(trajectory, dtype=float)
    cache: dict[float, tuple[Coverage, np.ndarray, np.ndarray]] = {}

    def cov(fov):
        if fov not in cache:
            c = coverage_sets(scenario.with_fov(fov))
            cache[fov] = (c, *c.csr())
        return cache[fov]

    policy = SeedPolicy(seed)
    noise_rngs = policy.frame_rngs(trajectory.size, stream=1)
    resources = scenario.n_aps * n_slots
    p_tx = scenario.lambertian.tx_power
    n = scenario.n_devices
    fov = scenario.fov
    acc = Accumulator()
    records = []
    for (f, rng), (_, noise_rng) in zip(policy.frame_rngs(trajectory.size), noise_rngs):
        pa = float(trajectory[f])
        frame = generate_frame(n, pa, omega, n_slots, rng)
        flagged = False
        if estimator == "oracle":
            est = estimate_pa_oracle(frame.active, n)
        else:
            gains = cov(WIDE_FOV if preamble_fov == "wide" else fov)[0].gains
            obs = observe_preamble(frame.active, gains, p_tx, noise_std, noise_rng)
            try:
                est = estimate_pa_power(obs, gains, p_tx)
            except EstimationError:
                est, flagged = math.nan, True
        if not flagged:
            fov = lookup.fov_for(est)
        _, ptr, aps = cov(fov)
        decoded = _decode_one(frame, ptr, aps, scenario.n_aps)
        sent = int(frame.active.size)
        acc.add(sent, decoded)
        records.append(AdaptiveRecord(f, pa, est, fov, sent, decoded, decoded / resources, flagged))
    return AdaptiveRun(records, Metrics.from_accumulator(acc, scenario.n_aps, n_slots))


def step_trajectory(segments) -> np.ndarray:
    """Expand [(p_a, frames), ...] into a per-frame p_a array."""
    return np.concatenate([np.full(int(k), float(p)) for p, k in segments])
