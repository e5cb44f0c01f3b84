"""Line-of-sight Lambertian channel gains and FOV coverage on square grids.

Devices sit on the floor plane (z = 0) facing up, access points sit on the
ceiling plane (z = H) facing down, so the radiation and incidence angles of
every link coincide.  Angles are degrees at every public interface.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

# Boundary devices sit exactly on regime-defining angles.
FOV_TOLERANCE_RAD = 1e-9


class GeometryError(ValueError):
    """Raised for impossible angles, coincident nodes or unplaceable grids."""


@dataclass(frozen=True)
class LambertianParams:
    detector_area: float = 1e-4
    half_power_semiangle: float = 60.0
    filter_gain: float = 1.0
    refractive_index: float = 1.5
    tx_power: float = 1.0

    def __post_init__(self):
        vals = (self.detector_area, self.half_power_semiangle, self.filter_gain,
                self.refractive_index, self.tx_power)
        if not all(math.isfinite(v) for v in vals):
            raise GeometryError("Lambertian parameters must be finite")
        if not 0.0 < self.half_power_semiangle < 90.0:
            raise GeometryError("half_power_semiangle must lie in (0, 90) degrees")
        if self.detector_area <= 0:
            raise GeometryError("detector_area must be positive")
        if self.filter_gain < 0:
            raise GeometryError("filter_gain must be non-negative")
        if self.refractive_index < 1:
            raise GeometryError("refractive_index must be >= 1")
        if self.tx_power <= 0:
            raise GeometryError("tx_power must be positive")

    @property
    def order(self) -> float:
        return lambertian_order(self.half_power_semiangle)


@dataclass(frozen=True)
class Scenario:
    """Static description of the room, both grids and the receiver FOV.

    The default values reproduce the 50 m x 50 m hall with a 26 x 26 device
    grid at 2 m pitch and a 3 m device-to-ceiling distance.
    """

    room_width: float = 50.0
    room_depth: float = 50.0
    height: float = 3.0
    tx_per_side: int = 26
    tx_pitch: float = 2.0
    rx_per_side: int = 1
    lambertian: LambertianParams = field(default_factory=LambertianParams)
    fov: float = 60.0

    def __post_init__(self):
        if self.height <= 0:
            raise GeometryError("height must be positive")
        if self.room_width <= 0 or self.room_depth <= 0:
            raise GeometryError("room dimensions must be positive")
        if self.tx_per_side < 1 or self.rx_per_side < 1:
            raise GeometryError("grids need at least one point per side")
        if self.tx_pitch <= 0:
            raise GeometryError("tx_pitch must be positive")
        if not 0.0 < self.fov < 90.0:
            raise GeometryError(f"fov must lie in (0, 90) degrees, got {self.fov}")

    @property
    def n_devices(self) -> int:
        return self.tx_per_side ** 2

    @property
    def n_aps(self) -> int:
        return self.rx_per_side ** 2

    def with_fov(self, fov: float) -> "Scenario":
        return replace(self, fov=float(fov))


def lambertian_order(half_power_semiangle: float) -> float:
    """Lambertian order m = -ln 2 / ln cos(semiangle)."""
    if not 0.0 < half_power_semiangle < 90.0:
        raise GeometryError("half-power semiangle must lie in (0, 90) degrees")
    return -math.log(2.0) / math.log(math.cos(math.radians(half_power_semiangle)))


def concentrator_gain(psi, fov: float, refractive_index: float):
    """Gain of an ideal non-imaging concentrator, n^2 / sin^2(fov) inside the FOV.

    ``psi`` may be a scalar or an array of incidence angles in degrees.
    """
    if not 0.0 < fov < 90.0:
        raise GeometryError("fov must lie in (0, 90) degrees")
    psi_rad = np.radians(psi)
    fov_rad = math.radians(fov)
    inside = psi_rad <= fov_rad + FOV_TOLERANCE_RAD
    g = np.where(inside, refractive_index ** 2 / math.sin(fov_rad) ** 2, 0.0)
    return float(g) if np.ndim(g) == 0 else g


def _link_gain(distance, cos_angle, params: LambertianParams, fov: float):
    """Vectorised gain for parallel-plane links (radiation == incidence angle)."""
    m = params.order
    psi = np.degrees(np.arccos(np.clip(cos_angle, -1.0, 1.0)))
    g = concentrator_gain(psi, fov, params.refractive_index)
    h = (params.detector_area * (m + 1) / (2 * math.pi * distance ** 2)
         * cos_angle ** m * g * params.filter_gain * cos_angle)
    return np.where(g > 0, h, 0.0)


def lambertian_gain(tx_pos, rx_pos, params: LambertianParams, fov: float) -> float:
    """LOS gain between an upward-facing transmitter and a downward-facing receiver."""
    tx = np.asarray(tx_pos, dtype=float)
    rx = np.asarray(rx_pos, dtype=float)
    delta = rx - tx
    d = float(np.linalg.norm(delta))
    if d == 0.0:
        raise GeometryError("transmitter and receiver coincide")
    if delta[2] <= 0:
        raise GeometryError("transmitter must lie below the receiver plane")
    return float(_link_gain(d, delta[2] / d, params, fov))


def _axis(count: int, pitch: float) -> np.ndarray:
    return (np.arange(count) - (count - 1) / 2.0) * pitch


def ap_pitch(scenario: Scenario) -> tuple[float, float]:
    """AP spacing along x and y: the largest multiple of the device pitch not above W/n."""
    p, n = scenario.tx_pitch, scenario.rx_per_side
    return (p * math.floor(scenario.room_width / (p * n)),
            p * math.floor(scenario.room_depth / (p * n)))


def grid_positions(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Device positions (N, 3) at z = 0 and AP positions (M, 3) at z = H.

    Both grids are centred on the room.  Each AP must sit at the centre of a
    square of the device grid.
    """
    n_tx, p_tx = scenario.tx_per_side, scenario.tx_pitch
    span = (n_tx - 1) * p_tx
    if span > scenario.room_width + 1e-9 or span > scenario.room_depth + 1e-9:
        raise GeometryError("device grid does not fit in the room")
    tx_axis = _axis(n_tx, p_tx)

    n_rx = scenario.rx_per_side
    px, py = ap_pitch(scenario)
    if n_rx > 1 and (px <= 0 or py <= 0):
        raise GeometryError("room too small for the requested AP grid")
    rx_x, rx_y = _axis(n_rx, px), _axis(n_rx, py)
    if n_tx == 1 and n_rx > 1:
        raise GeometryError("a single device admits a single AP only")
    # a one-device grid has no squares; its lone AP sits straight above it
    for coords in (rx_x, rx_y) if n_tx > 1 else ():
        offset = (coords - tx_axis[0]) / p_tx
        if (np.any(np.abs(offset - np.floor(offset) - 0.5) > 1e-9)
                or np.any(coords < tx_axis[0]) or np.any(coords > tx_axis[-1])):
            raise GeometryError(
                f"AP grid of {n_rx} per side cannot be placed at device-square centres")

    tx_xx, tx_yy = np.meshgrid(tx_axis, tx_axis, indexing="ij")
    tx = np.column_stack([tx_xx.ravel(), tx_yy.ravel(), np.zeros(n_tx * n_tx)])
    rx_xx, rx_yy = np.meshgrid(rx_x, rx_y, indexing="ij")
    rx = np.column_stack([rx_xx.ravel(), rx_yy.ravel(),
                          np.full(n_rx * n_rx, scenario.height)])
    return tx, rx


def incidence_angles(scenario: Scenario) -> np.ndarray:
    """Incidence angle in degrees for every (device, AP) pair, shape (N, M)."""
    tx, rx = grid_positions(scenario)
    horiz = np.hypot(tx[:, None, 0] - rx[None, :, 0], tx[:, None, 1] - rx[None, :, 1])
    return np.degrees(np.arctan2(horiz, scenario.height))


@dataclass(frozen=True)
class Coverage:
    """Gain matrix plus the derived per-AP device sets."""

    gains: np.ndarray
    incidence_deg: np.ndarray
    fov: float

    @property
    def support(self) -> np.ndarray:
        return self.gains > 0

    @property
    def n_devices(self) -> int:
        return self.gains.shape[0]

    @property
    def n_aps(self) -> int:
        return self.gains.shape[1]

    @property
    def sets(self) -> list[np.ndarray]:
        """U_j for every AP, as sorted device index arrays."""
        return [np.flatnonzero(col) for col in self.support.T]

    @property
    def uncovered(self) -> np.ndarray:
        return np.flatnonzero(~self.support.any(axis=1))

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Covering APs per device in CSR form: (ptr of length N+1, ap indices)."""
        rows, cols = np.nonzero(self.support)
        ptr = np.zeros(self.n_devices + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=self.n_devices), out=ptr[1:])
        return ptr, cols.astype(np.int64)

    def to_csv(self, fh=None) -> str:
        """Dump every link as tx_index, rx_index, gain, incidence_deg."""
        out = fh if fh is not None else io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["tx_index", "rx_index", "gain", "incidence_deg"])
        for (i, j), g in np.ndenumerate(self.gains):
            w.writerow([i, j, f"{g:.9g}", f"{self.incidence_deg[i, j]:.9g}"])
        return out.getvalue() if fh is None else ""


def coverage_sets(scenario: Scenario) -> Coverage:
    tx, rx = grid_positions(scenario)
    delta = rx[None, :, :] - tx[:, None, :]
    dist = np.linalg.norm(delta, axis=2)
    cos_angle = delta[:, :, 2] / dist
    gains = _link_gain(dist, cos_angle, scenario.lambertian, scenario.fov)
    psi = np.degrees(np.arccos(np.clip(cos_angle, -1.0, 1.0)))
    return Coverage(gains=gains, incidence_deg=psi, fov=scenario.fov)
