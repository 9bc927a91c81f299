"""Four-state device behavior model driving when scan bursts happen.

States carry the integer codes used throughout configs and label files:
0 Shutdown, 1 Screen-off, 2 Screen-on, 3 Activity. Dwell times, burst
lengths and intervals are discrete value:probability distributions; state
succession is a Markov chain whose transitions into Activity are modulated
by an hourly diurnal weight.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "DeviceState",
    "DiscreteDistribution",
    "StateBehavior",
    "BehaviorConfig",
    "ScanEvent",
    "StateInterval",
    "BehaviorConfigError",
    "default_behavior",
    "sample_state_duration",
    "next_state",
    "schedule_bursts",
    "run_fsm",
]


class BehaviorConfigError(ValueError):
    """Raised for inconsistent behavior configuration."""


class DeviceState(enum.IntEnum):
    SHUTDOWN = 0
    SCREEN_OFF = 1
    SCREEN_ON = 2
    ACTIVITY = 3


# State pairs with a transition edge in the default model. Anything else
# defaults to probability zero; configs may still override explicitly.
DEFAULT_EDGES = (
    (DeviceState.SHUTDOWN, DeviceState.SCREEN_ON),
    (DeviceState.SHUTDOWN, DeviceState.SCREEN_OFF),
    (DeviceState.SCREEN_ON, DeviceState.ACTIVITY),
    (DeviceState.SCREEN_ON, DeviceState.SCREEN_OFF),
    (DeviceState.SCREEN_OFF, DeviceState.SCREEN_ON),
    (DeviceState.SCREEN_OFF, DeviceState.ACTIVITY),
    (DeviceState.ACTIVITY, DeviceState.SCREEN_OFF),
)

_PROB_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite distribution over numeric values, `value:prob` pairs."""

    entries: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.entries:
            raise BehaviorConfigError("distribution has no entries")
        total = 0.0
        for value, prob in self.entries:
            if not math.isfinite(value):
                raise BehaviorConfigError(f"non-finite value {value!r}")
            if not 0.0 < prob <= 1.0:
                raise BehaviorConfigError(f"probability {prob!r} outside (0, 1]")
            total += prob
        if abs(total - 1.0) > _PROB_TOL:
            raise BehaviorConfigError(f"probabilities sum to {total!r}, not 1")

    @classmethod
    def parse(cls, text: str | int | float) -> "DiscreteDistribution":
        """Parse the `value:prob / value:prob` syntax; a bare number is a
        point mass."""
        if isinstance(text, (int, float)):
            return cls(((float(text), 1.0),))
        entries = []
        for chunk in str(text).split("/"):
            chunk = chunk.strip()
            if not chunk:
                raise BehaviorConfigError(f"empty entry in distribution {text!r}")
            value, sep, prob = chunk.partition(":")
            if not sep:
                raise BehaviorConfigError(f"missing ':' in entry {chunk!r}")
            try:
                entries.append((float(value), float(prob)))
            except ValueError as exc:
                raise BehaviorConfigError(f"bad entry {chunk!r}: {exc}") from None
        return cls(tuple(entries))

    def spec_str(self) -> str:
        """Render back to the `value:prob / value:prob` text form."""
        def fmt(x: float) -> str:
            return str(int(x)) if x == int(x) else f"{x:g}"

        return " / ".join(f"{fmt(v)}:{fmt(p)}" for v, p in self.entries)

    @cached_property
    def _values(self) -> np.ndarray:
        return np.array([v for v, _ in self.entries], dtype=float)

    @cached_property
    def _cum(self) -> np.ndarray:
        probs = np.array([p for _, p in self.entries], dtype=float)
        cum = np.cumsum(probs / probs.sum())
        cum[-1] = 1.0
        return cum

    def sample(self, rng: np.random.Generator) -> float:
        return float(self._values[np.searchsorted(self._cum, rng.random(), side="right")])

    def sample_n(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Vectorized sampling; draw-for-draw identical to `sample` loops."""
        idx = np.searchsorted(self._cum, rng.random(n), side="right")
        return self._values[idx]

    def mean(self) -> float:
        return sum(v * p for v, p in self.entries)

    def max_value(self) -> float:
        return max(v for v, _ in self.entries)


@dataclass(frozen=True)
class StateBehavior:
    """Timing parameters for one device state."""

    dwell: DiscreteDistribution
    scan_interval_base: float
    scan_interval_jitter_frac: float
    burst_length: DiscreteDistribution
    intra_burst: DiscreteDistribution
    inter_burst: DiscreteDistribution
    jitter: DiscreteDistribution

    def __post_init__(self):
        if self.scan_interval_base < 0:
            raise BehaviorConfigError("scan_interval_base must be >= 0")
        if not 0.0 <= self.scan_interval_jitter_frac < 1.0:
            raise BehaviorConfigError("scan_interval_jitter_frac must be in [0, 1)")
        if any(v <= 0 for v, _ in self.dwell.entries):
            raise BehaviorConfigError("dwell values must be positive")
        if any(v <= 0 for v, _ in self.intra_burst.entries):
            raise BehaviorConfigError("intra_burst values must be positive")
        if any(v <= 0 for v, _ in self.inter_burst.entries):
            raise BehaviorConfigError("inter_burst values must be positive")
        if any(v < 0 for v, _ in self.jitter.entries):
            raise BehaviorConfigError("jitter values must be non-negative")
        if any(v < 1 or v != int(v) for v, _ in self.burst_length.entries):
            raise BehaviorConfigError("burst_length values must be positive integers")


@dataclass(frozen=True)
class BehaviorConfig:
    """Per-state behaviors plus the state transition model.

    `transitions` is a 4x4 row-stochastic matrix indexed by state code;
    `diurnal_weights` holds 24 non-negative hourly multipliers applied to
    transitions into Activity before renormalizing.
    """

    states: tuple[StateBehavior, StateBehavior, StateBehavior, StateBehavior]
    transitions: tuple[tuple[float, float, float, float], ...]
    diurnal_weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.states) != 4:
            raise BehaviorConfigError("need exactly 4 state behaviors")
        if len(self.transitions) != 4 or any(len(r) != 4 for r in self.transitions):
            raise BehaviorConfigError("transition matrix must be 4x4")
        for s, row in enumerate(self.transitions):
            if any(p < 0 for p in row):
                raise BehaviorConfigError(f"negative transition probability in row {s}")
            if abs(sum(row) - 1.0) > _PROB_TOL:
                raise BehaviorConfigError(f"transition row {s} sums to {sum(row)!r}")
        if len(self.diurnal_weights) != 24:
            raise BehaviorConfigError("diurnal_weights needs 24 hourly entries")
        if any(w < 0 for w in self.diurnal_weights):
            raise BehaviorConfigError("diurnal weights must be non-negative")
        if self.states[DeviceState.SHUTDOWN].scan_interval_base != 0:
            raise BehaviorConfigError("Shutdown must have scan_interval_base = 0")

    def state(self, s: DeviceState) -> StateBehavior:
        return self.states[int(s)]


@dataclass(frozen=True)
class ScanEvent:
    """One probe-request emission opportunity."""

    device_id: int
    t: float
    burst_index: int
    frame_index_in_burst: int
    state: DeviceState

    @property
    def is_burst_start(self) -> bool:
        return self.frame_index_in_burst == 0


@dataclass(frozen=True)
class StateInterval:
    state: DeviceState
    enter_t: float
    exit_t: float


def default_behavior() -> BehaviorConfig:
    """Stock model: scan intervals 600/120/30 s with ±20/30/50% jitter and
    no scanning in Shutdown."""
    dd = DiscreteDistribution.parse
    placeholder = dd("1:1.0")
    shutdown = StateBehavior(
        dwell=dd("300:0.5 / 600:0.5"),
        scan_interval_base=0.0,
        scan_interval_jitter_frac=0.0,
        burst_length=placeholder,
        intra_burst=dd("0.05:1.0"),
        inter_burst=dd("3.0:1.0"),
        jitter=dd("0.05:1.0"),
    )
    screen_off = StateBehavior(
        dwell=dd("120:0.3 / 300:0.4 / 600:0.3"),
        scan_interval_base=600.0,
        scan_interval_jitter_frac=0.2,
        burst_length=dd("1:0.6 / 2:0.4"),
        intra_burst=dd("0.05:0.5 / 0.08:0.5"),
        inter_burst=dd("3.0:0.6 / 4.0:0.4"),
        jitter=dd("0.05:0.5 / 0.1:0.5"),
    )
    screen_on = StateBehavior(
        dwell=dd("30:0.4 / 60:0.4 / 120:0.2"),
        scan_interval_base=120.0,
        scan_interval_jitter_frac=0.3,
        burst_length=dd("1:0.4 / 2:0.4 / 3:0.2"),
        intra_burst=dd("0.05:0.5 / 0.08:0.5"),
        inter_burst=dd("3.0:0.6 / 4.0:0.4"),
        jitter=dd("0.05:0.5 / 0.1:0.5"),
    )
    activity = StateBehavior(
        dwell=dd("20:0.7 / 30:0.3"),
        scan_interval_base=30.0,
        scan_interval_jitter_frac=0.5,
        burst_length=dd("1:0.3 / 2:0.4 / 3:0.3"),
        intra_burst=dd("0.05:0.5 / 0.08:0.5"),
        inter_burst=dd("3.0:0.6 / 4.0:0.4"),
        jitter=dd("0.05:0.5 / 0.1:0.5"),
    )
    # Re-entry into Shutdown is not part of the stock edge list; a small
    # Screen-off -> Shutdown probability lets long scenarios power off.
    transitions = (
        (0.0, 0.4, 0.6, 0.0),
        (0.02, 0.0, 0.68, 0.3),
        (0.0, 0.45, 0.0, 0.55),
        (0.0, 1.0, 0.0, 0.0),
    )
    diurnal = tuple(1.5 if 8 <= h <= 22 else 0.5 for h in range(24))
    return BehaviorConfig(
        states=(shutdown, screen_off, screen_on, activity),
        transitions=transitions,
        diurnal_weights=diurnal,
    )


def sample_state_duration(
    cfg: BehaviorConfig, s: DeviceState, rng: np.random.Generator
) -> float:
    """Draw a dwell time for state `s`."""
    return cfg.state(s).dwell.sample(rng)


def next_state(
    cfg: BehaviorConfig, s: DeviceState, clock_hour: int, rng: np.random.Generator
) -> DeviceState:
    """Sample the successor state from the diurnally modulated row of `s`."""
    row = cfg.transitions[int(s)]
    w = cfg.diurnal_weights[clock_hour % 24]
    probs = (row[0], row[1], row[2], row[3] * w)
    total = probs[0] + probs[1] + probs[2] + probs[3]
    if total <= 0.0:
        raise BehaviorConfigError(
            f"transition row for state {s.name} is all zero after diurnal modulation"
        )
    u = rng.random() * total
    acc = 0.0
    last = s
    for i, p in enumerate(probs):
        if p <= 0.0:
            continue
        acc += p
        last = DeviceState(i)
        if u < acc:
            return last
    return last


def schedule_bursts(
    cfg: BehaviorConfig,
    s: DeviceState,
    window: tuple[float, float],
    rng: np.random.Generator,
    device_id: int = 0,
    burst_index_start: int = 0,
) -> list[ScanEvent]:
    """Scan events for one stay in state `s` over [t0, t1).

    The first burst fires at window start (a state change triggers an
    immediate scan); successive burst starts are spaced by the state's
    scan interval with its uniform +/- jitter fraction. When a state has
    no scan interval configured, gaps fall back to the inter-burst
    distribution. Frames inside a burst are separated by intra-burst plus
    jitter draws. Shutdown emits nothing.
    """
    t0, t1 = window
    if t1 <= t0:
        raise BehaviorConfigError(f"empty window [{t0}, {t1})")
    if s is DeviceState.SHUTDOWN:
        return []
    sb = cfg.state(s)
    j = sb.scan_interval_jitter_frac
    events: list[ScanEvent] = []
    t = t0
    burst_index = burst_index_start
    while t < t1:
        length = int(sb.burst_length.sample(rng))
        ft = t
        for k in range(length):
            if k > 0:
                ft += sb.intra_burst.sample(rng) + sb.jitter.sample(rng)
            if ft >= t1:
                break
            events.append(ScanEvent(device_id, ft, burst_index, k, s))
        burst_index += 1
        if sb.scan_interval_base > 0:
            t += sb.scan_interval_base * (1.0 + rng.uniform(-j, j))
        else:
            t += sb.inter_burst.sample(rng)
    return events


def run_fsm(
    cfg: BehaviorConfig,
    horizon: float,
    start_state: DeviceState,
    start_clock_s: float,
    rng: np.random.Generator,
    device_id: int = 0,
) -> tuple[list[StateInterval], list[ScanEvent]]:
    """Run the FSM over [0, horizon) seconds.

    Returns contiguous state intervals partitioning the horizon and the
    scan events they produced. `start_clock_s` anchors simulation time to
    a wall-clock second-of-day for the diurnal modulation. Bursts never
    straddle a state transition; they are cut at the interval end.
    """
    if horizon <= 0:
        raise BehaviorConfigError("horizon must be positive")
    intervals: list[StateInterval] = []
    events: list[ScanEvent] = []
    t = 0.0
    s = start_state
    burst_counter = 0
    while t < horizon:
        dwell = sample_state_duration(cfg, s, rng)
        end = min(t + dwell, horizon)
        intervals.append(StateInterval(s, t, end))
        new = schedule_bursts(cfg, s, (t, end), rng, device_id, burst_counter)
        if new:
            events.extend(new)
            burst_counter = new[-1].burst_index + 1
        t += dwell
        if t >= horizon:
            break
        hour = int(((start_clock_s + t) % 86400.0) // 3600.0)
        s = next_state(cfg, s, hour, rng)
    return intervals, events
