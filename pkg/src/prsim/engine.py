"""Event-driven scenario executor.

Each device simulates independently on random streams derived from
(scenario seed, device id, stream tag), so output is byte-identical for
any worker count. Per-device frame streams are merged into one global
timeline with total-order tie-breaking, then serialized to packets and
ground-truth records.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, NamedTuple

import numpy as np

from prsim.behavior import BehaviorConfig, DeviceState, run_fsm
from prsim.frames import build_probe_request, serialize_packet
from prsim.mac import MacAddress, MacPolicy, MacState, PolicyKind, next_mac, random_mac
from prsim.phy import ChannelModel, MobilityModel, position_at, rss_at

STREAM_BEHAVIOR = 0
STREAM_MAC = 1
STREAM_PHY = 2
# STREAM_MOBILITY = 3 lives in prsim.phy
STREAM_PAYLOAD = 4
STREAM_DEVGEN = 5

_SSID_CHARS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"

__all__ = [
    "DeviceProfile",
    "ScenarioConfig",
    "EmissionRecord",
    "ScenarioResult",
    "ProfileError",
    "decode_cap_hex",
    "seq_next",
    "merge_streams",
    "simulate_device",
    "run_scenario",
]


class ProfileError(ValueError):
    """Raised when a device profile or scenario fails validation."""


def decode_cap_hex(name: str, text: str) -> bytes:
    """Decode a capability hex string, rejecting odd arity."""
    cleaned = text.strip().lower()
    if len(cleaned) % 2 != 0:
        raise ProfileError(f"{name} hex string has odd length: {text!r}")
    try:
        return bytes.fromhex(cleaned)
    except ValueError:
        raise ProfileError(f"{name} is not valid hex: {text!r}") from None


@dataclass(frozen=True)
class DeviceProfile:
    """Static and dynamic attributes of one simulated device."""

    device_id: int
    vendor: str
    model: str
    oui: bytes
    true_mac: MacAddress
    mac_policy: MacPolicy
    behavior: BehaviorConfig
    mobility: MobilityModel
    supported_rates: tuple[float, ...] = (6.0, 9.0, 12.0, 18.0)
    ext_rates: tuple[float, ...] = (24.0, 36.0)
    ht_cap: bytes | None = None
    vht_cap: bytes | None = None
    ext_cap: bytes | None = None
    vendor_ies: tuple[bytes, ...] = ()
    ssid_directed_prob: float = 0.1
    seq_reset_on_mac_change: bool = False
    start_state: DeviceState = DeviceState.SCREEN_OFF

    def __post_init__(self):
        if self.device_id < 0:
            raise ProfileError(f"device_id {self.device_id} must be >= 0")
        if len(self.oui) != 3:
            raise ProfileError(f"oui must be 3 octets, got {len(self.oui)}")
        if not 0.0 <= self.ssid_directed_prob <= 1.0:
            raise ProfileError("ssid_directed_prob must be in [0, 1]")
        for r in tuple(self.supported_rates) + tuple(self.ext_rates):
            if r * 2 != int(r * 2) or not 1 <= r * 2 <= 255:
                raise ProfileError(f"rate {r} Mbps not encodable in 500 kb/s units")


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    duration_s: float
    start_clock: datetime
    devices: tuple[DeviceProfile, ...]
    channel: ChannelModel
    name: str = "scenario"
    out_pcap: str | None = None
    out_labels: str | None = None

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ProfileError("duration_s must be positive")
        if not self.devices:
            raise ProfileError("scenario needs at least one device")
        ids = [d.device_id for d in self.devices]
        if len(set(ids)) != len(ids):
            raise ProfileError("device_id values must be unique within a scenario")

    @property
    def start_clock_s(self) -> float:
        c = self.start_clock
        return c.hour * 3600.0 + c.minute * 60.0 + c.second + c.microsecond / 1e6


@dataclass(frozen=True)
class EmissionRecord:
    """Ground-truth row for one captured frame."""

    frame_index: int
    timestamp_s: float
    device_id: int
    state: DeviceState
    true_mac: MacAddress
    emitted_mac: MacAddress
    seq_num: int
    x_m: float
    y_m: float
    rss_dbm: int
    burst_index: int


class _Emission(NamedTuple):
    t_us: int
    device_id: int
    burst_index: int
    frame_in_burst: int
    state: int
    true_mac: str
    emitted_mac: str
    seq_num: int
    x_m: float
    y_m: float
    rss_dbm: int
    packet: bytes


@dataclass(frozen=True)
class ScenarioResult:
    records: tuple[EmissionRecord, ...]
    packets: tuple[tuple[int, int, bytes], ...]
    stats: dict


def seq_next(
    counter: int, mac_changed: bool, reset_policy: bool, rng: np.random.Generator
) -> int:
    """Sequence number for the next frame: wraps mod 4096, or re-seeds
    randomly when the MAC just changed and the reset policy is set."""
    if mac_changed and reset_policy:
        return int(rng.integers(0, 4096))
    return (counter + 1) % 4096


def _random_ssid(rng: np.random.Generator) -> bytes:
    length = int(rng.integers(6, 21))
    idx = rng.integers(0, len(_SSID_CHARS), size=length)
    return "".join(_SSID_CHARS[i] for i in idx).encode("ascii")


def _stream(seed: int, device_id: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, device_id, tag)))


def simulate_device(
    profile: DeviceProfile,
    channel: ChannelModel,
    duration_s: float,
    start_clock_s: float,
    seed: int,
) -> list[_Emission]:
    """Simulate one device: FSM, MAC rotation, frames, channel effects.

    Frames the channel loses (interference or below floor) are dropped
    here, before labeling, but still consume sequence numbers.
    """
    rng_behavior = _stream(seed, profile.device_id, STREAM_BEHAVIOR)
    rng_mac = _stream(seed, profile.device_id, STREAM_MAC)
    rng_phy = _stream(seed, profile.device_id, STREAM_PHY)
    rng_payload = _stream(seed, profile.device_id, STREAM_PAYLOAD)

    _, events = run_fsm(
        profile.behavior,
        duration_s,
        profile.start_state,
        start_clock_s,
        rng_behavior,
        profile.device_id,
    )

    policy = profile.mac_policy
    if policy.kind is PolicyKind.NONE:
        state = MacState(profile.true_mac)
    elif policy.kind is PolicyKind.OUI_PRESERVING:
        state = MacState(MacAddress(policy.base_oui + rng_mac.integers(0, 256, 3, dtype=np.uint8).tobytes()))
    else:
        state = MacState(random_mac(rng_mac))

    pool_size = int(rng_payload.integers(1, 4))
    ssid_pool = [_random_ssid(rng_payload) for _ in range(pool_size)]
    seq = int(rng_payload.integers(0, 4096))
    true_mac = str(profile.true_mac)
    prev_mac = state.current
    out: list[_Emission] = []
    first = True
    for ev in events:
        mac_changed = False
        if ev.is_burst_start:
            emitted = next_mac(policy, state, ev.t, True, rng_mac)
            mac_changed = emitted != prev_mac
            prev_mac = emitted
        else:
            emitted = state.current
        if first:
            first = False
        else:
            seq = seq_next(seq, mac_changed, profile.seq_reset_on_mac_change, rng_payload)
        directed = rng_payload.random() < profile.ssid_directed_prob
        if directed:
            ssid = ssid_pool[int(rng_payload.integers(0, pool_size))]
        else:
            ssid = b""
        x, y = position_at(profile.mobility, profile.device_id, ev.t, seed)
        rss = rss_at(channel, math.hypot(x, y), rng_phy)
        if rss is None:
            continue
        t_us = round(ev.t * 1e6)
        frame = build_probe_request(profile, emitted, seq, ssid, rss, t_us / 1e6)
        out.append(
            _Emission(
                t_us=t_us,
                device_id=profile.device_id,
                burst_index=ev.burst_index,
                frame_in_burst=ev.frame_index_in_burst,
                state=int(ev.state),
                true_mac=true_mac,
                emitted_mac=str(emitted),
                seq_num=seq,
                x_m=round(x, 6),
                y_m=round(y, 6),
                rss_dbm=rss,
                packet=serialize_packet(frame, channel.channel_mhz),
            )
        )
    return out


def merge_streams(streams: Iterable[list[_Emission]]) -> list[_Emission]:
    """Merge per-device streams into one global timeline.

    Ties break on (timestamp, device_id, burst_index, frame_in_burst),
    so the result is independent of input order and worker count.
    """
    merged = [e for stream in streams for e in stream]
    merged.sort(key=lambda e: (e.t_us, e.device_id, e.burst_index, e.frame_in_burst))
    return merged


def _worker(args) -> list[_Emission]:
    return simulate_device(*args)


def run_scenario(cfg: ScenarioConfig, workers: int = 1) -> ScenarioResult:
    """Execute a scenario; returns packets, ground-truth records, stats."""
    jobs = [
        (profile, cfg.channel, cfg.duration_s, cfg.start_clock_s, cfg.seed)
        for profile in cfg.devices
    ]
    if workers <= 1 or len(jobs) == 1:
        streams = [_worker(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            streams = list(pool.map(_worker, jobs, chunksize=max(1, len(jobs) // (workers * 4) or 1)))
    merged = merge_streams(streams)

    records = []
    packets = []
    for idx, e in enumerate(merged):
        records.append(
            EmissionRecord(
                frame_index=idx,
                timestamp_s=e.t_us / 1e6,
                device_id=e.device_id,
                state=DeviceState(e.state),
                true_mac=_parse_cached(e.true_mac),
                emitted_mac=_parse_cached(e.emitted_mac),
                seq_num=e.seq_num,
                x_m=e.x_m,
                y_m=e.y_m,
                rss_dbm=e.rss_dbm,
                burst_index=e.burst_index,
            )
        )
        packets.append((e.t_us // 1_000_000, e.t_us % 1_000_000, e.packet))

    randomizing = {
        d.device_id for d in cfg.devices if d.mac_policy.kind is not PolicyKind.NONE
    }
    emitted_all = {e.emitted_mac for e in merged}
    emitted_randomized = {e.emitted_mac for e in merged if e.device_id in randomizing}
    stats = {
        "devices": len(cfg.devices),
        "frames": len(merged),
        "bursts": sum(1 for e in merged if e.frame_in_burst == 0),
        "distinct_macs": len(emitted_all),
        "distinct_randomized_macs": len(emitted_randomized),
        "real_mac_devices": len(cfg.devices) - len(randomizing),
        "duration_s": cfg.duration_s,
        "seed": cfg.seed,
    }
    return ScenarioResult(tuple(records), tuple(packets), stats)


def _parse_cached(text: str, _cache: dict = {}) -> MacAddress:
    addr = _cache.get(text)
    if addr is None:
        addr = MacAddress(bytes(int(p, 16) for p in text.split(":")))
        if len(_cache) < 65536:
            _cache[text] = addr
        return addr
    return addr
