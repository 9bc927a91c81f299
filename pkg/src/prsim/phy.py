"""Radio channel and mobility models.

RSS follows log-distance path loss with optional log-normal shadowing and
Rayleigh/Rician fading; frames below the capture floor or hit by an
interference draw are lost. The sniffer sits at the origin.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from prsim.behavior import DiscreteDistribution

STREAM_MOBILITY = 3

__all__ = [
    "FadingKind",
    "ChannelModel",
    "Static",
    "RandomWaypoint",
    "MobilityModel",
    "rss_at",
    "position_at",
]


class FadingKind(enum.Enum):
    NONE = "none"
    RAYLEIGH = "rayleigh"
    RICIAN = "rician"


@dataclass(frozen=True)
class ChannelModel:
    """Log-distance path loss channel.

    Defaults are tuned so typical indoor distances (1-40 m) produce
    integer RSS readings in the -70..-30 dBm range.
    """

    tx_power_dbm: float = 15.0
    pl_d0_db: float = 40.0
    d0_m: float = 1.0
    exponent: float = 2.5
    shadow_sigma_db: float = 4.0
    fading: FadingKind = FadingKind.NONE
    rician_k_db: float = 6.0
    interference_loss_prob: float = 0.02
    rss_floor_dbm: float = -95.0
    channel_mhz: int = 2437

    def __post_init__(self):
        if self.d0_m <= 0:
            raise ValueError("d0_m must be positive")
        if self.exponent <= 0:
            raise ValueError("path loss exponent must be positive")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow_sigma_db must be non-negative")
        if not 0.0 <= self.interference_loss_prob <= 1.0:
            raise ValueError("interference_loss_prob must be in [0, 1]")

    def mean_rss_dbm(self, distance_m: float) -> float:
        """Deterministic RSS component at a distance (no shadowing/fading)."""
        d = max(distance_m, self.d0_m)
        return (
            self.tx_power_dbm
            - self.pl_d0_db
            - 10.0 * self.exponent * math.log10(d / self.d0_m)
        )


def rss_at(
    model: ChannelModel, distance_m: float, rng: np.random.Generator
) -> int | None:
    """Integer received power in dBm for one frame, or None when lost.

    Draw order is fixed: shadowing, fading (if configured), interference.
    """
    rss = model.mean_rss_dbm(distance_m)
    rss += rng.normal(0.0, model.shadow_sigma_db) if model.shadow_sigma_db > 0 else 0.0
    if model.fading is FadingKind.RAYLEIGH:
        # Unit-mean power: |h|^2 ~ Exp(1).
        rss += 10.0 * math.log10(max(rng.exponential(1.0), 1e-12))
    elif model.fading is FadingKind.RICIAN:
        k = 10.0 ** (model.rician_k_db / 10.0)
        los = math.sqrt(k / (k + 1.0))
        sigma = math.sqrt(1.0 / (2.0 * (k + 1.0)))
        re = los + rng.normal(0.0, sigma)
        im = rng.normal(0.0, sigma)
        rss += 10.0 * math.log10(max(re * re + im * im, 1e-12))
    if rng.random() < model.interference_loss_prob:
        return None
    if rss < model.rss_floor_dbm:
        return None
    return int(round(rss))


@dataclass(frozen=True)
class Static:
    pos: tuple[float, float]


@dataclass(frozen=True)
class RandomWaypoint:
    """Waypoint walk inside a [0,w] x [0,h] rectangle with pauses."""

    area: tuple[float, float]
    speed_range: tuple[float, float] = (0.5, 2.0)
    pause: DiscreteDistribution = DiscreteDistribution(((2.0, 1.0),))

    def __post_init__(self):
        if self.area[0] <= 0 or self.area[1] <= 0:
            raise ValueError("area sides must be positive")
        lo, hi = self.speed_range
        if lo <= 0 or hi < lo:
            raise ValueError("speed_range must satisfy 0 < min <= max")


MobilityModel = Static | RandomWaypoint


class _WaypointTrack:
    """Lazily extended piecewise-linear trajectory for one device."""

    def __init__(self, model: RandomWaypoint, device_id: int, seed: int):
        self._model = model
        self._rng = np.random.default_rng(
            np.random.SeedSequence((seed, device_id, STREAM_MOBILITY))
        )
        w, h = model.area
        x = float(self._rng.uniform(0.0, w))
        y = float(self._rng.uniform(0.0, h))
        # Legs are (t_start, t_end, x0, y0, x1, y1) with waits as zero-motion legs.
        self._legs: list[tuple[float, float, float, float, float, float]] = []
        self._t_end = 0.0
        self._pos = (x, y)

    def _extend(self, until: float) -> None:
        w, h = self._model.area
        lo, hi = self._model.speed_range
        while self._t_end <= until:
            x0, y0 = self._pos
            x1 = float(self._rng.uniform(0.0, w))
            y1 = float(self._rng.uniform(0.0, h))
            speed = float(self._rng.uniform(lo, hi))
            dist = math.hypot(x1 - x0, y1 - y0)
            dur = dist / speed if dist > 0 else 0.0
            if dur > 0:
                self._legs.append((self._t_end, self._t_end + dur, x0, y0, x1, y1))
                self._t_end += dur
            pause = self._model.pause.sample(self._rng)
            if pause > 0:
                self._legs.append((self._t_end, self._t_end + pause, x1, y1, x1, y1))
                self._t_end += pause
            self._pos = (x1, y1)

    def position(self, t: float) -> tuple[float, float]:
        if t < 0:
            raise ValueError("t must be >= 0")
        self._extend(t)
        lo, hi = 0, len(self._legs) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if self._legs[mid][1] <= t:
                lo = mid + 1
            else:
                hi = mid
        t0, t1, x0, y0, x1, y1 = self._legs[lo]
        frac = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        return (x0 + (x1 - x0) * frac, y0 + (y1 - y0) * frac)


@lru_cache(maxsize=4096)
def _track(model: RandomWaypoint, device_id: int, seed: int) -> _WaypointTrack:
    return _WaypointTrack(model, device_id, seed)


def position_at(
    model: MobilityModel, device_id: int, t: float, seed: int = 0
) -> tuple[float, float]:
    """Device position at time t; a pure function of (model, device_id, t, seed)."""
    if isinstance(model, Static):
        return model.pos
    return _track(model, device_id, seed).position(t)
