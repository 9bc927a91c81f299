"""48-bit MAC addresses and the randomization policies that rotate them.

Randomized addresses are locally administered unicast: bit 1 of the first
octet set, bit 0 clear, the remaining 46 bits drawn uniformly.
"""

from __future__ import annotations

import enum
import string
from dataclasses import dataclass, field

import numpy as np

LOCAL_BIT = 0x02
MULTICAST_BIT = 0x01

__all__ = [
    "MacAddress",
    "MacParseError",
    "MacPolicy",
    "MacState",
    "PolicyKind",
    "BROADCAST",
    "parse_mac",
    "random_mac",
    "next_mac",
    "mac_compliant",
]


class MacParseError(ValueError):
    """Raised when a MAC address string cannot be parsed."""


@dataclass(frozen=True)
class MacAddress:
    """A 48-bit address held as six raw octets."""

    octets: bytes

    def __post_init__(self):
        if len(self.octets) != 6:
            raise MacParseError(f"expected 6 octets, got {len(self.octets)}")

    @property
    def oui(self) -> bytes:
        return self.octets[:3]

    @property
    def nic(self) -> bytes:
        return self.octets[3:]

    @property
    def local_bit(self) -> int:
        return (self.octets[0] >> 1) & 1

    @property
    def multicast_bit(self) -> int:
        return self.octets[0] & 1

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    def __format__(self, spec: str) -> str:
        return format(str(self), spec)


BROADCAST = MacAddress(b"\xff" * 6)


def parse_mac(text: str) -> MacAddress:
    """Parse the canonical `xx:xx:xx:xx:xx:xx` form.

    Parsing then formatting reproduces the lowercased input. Malformed
    input raises :class:`MacParseError` naming the offending octet.
    """
    parts = text.split(":")
    if len(parts) != 6:
        raise MacParseError(
            f"expected 6 colon-separated octets, got {len(parts)} in {text!r}"
        )
    octets = bytearray(6)
    for i, part in enumerate(parts):
        if len(part) != 2 or not all(c in string.hexdigits for c in part):
            raise MacParseError(f"bad octet {part!r} at position {i} in {text!r}")
        octets[i] = int(part, 16)
    return MacAddress(bytes(octets))


class PolicyKind(enum.Enum):
    FULL_PER_SCAN = "full_per_scan"
    OUI_PRESERVING = "oui_preserving"
    PERIODIC = "periodic"
    # Extension beyond the three randomization strategies: the hardware
    # address is emitted unchanged. Off by default in all presets.
    NONE = "none"


@dataclass(frozen=True)
class MacPolicy:
    """One of the randomization strategies plus its parameters."""

    kind: PolicyKind
    period_s: float | None = None  # PERIODIC only
    base_oui: bytes | None = None  # OUI_PRESERVING only

    def __post_init__(self):
        if self.kind is PolicyKind.PERIODIC:
            if self.period_s is None or self.period_s <= 0:
                raise ValueError("periodic policy requires period_s > 0")
        if self.kind is PolicyKind.OUI_PRESERVING:
            if self.base_oui is None or len(self.base_oui) != 3:
                raise ValueError("oui_preserving policy requires a 3-octet base_oui")


@dataclass
class MacState:
    """Per-device randomization bookkeeping; owned by exactly one device."""

    current: MacAddress
    last_change_time: float = 0.0
    change_count: int = 0


def random_mac(rng: np.random.Generator) -> MacAddress:
    """Fresh locally-administered unicast address, 46 random bits."""
    octets = bytearray(rng.integers(0, 256, size=6, dtype=np.uint8).tobytes())
    octets[0] = (octets[0] & ~MULTICAST_BIT & 0xFF) | LOCAL_BIT
    return MacAddress(bytes(octets))


def _random_nic(base_oui: bytes, rng: np.random.Generator) -> MacAddress:
    nic = rng.integers(0, 256, size=3, dtype=np.uint8).tobytes()
    return MacAddress(base_oui + nic)


def next_mac(
    policy: MacPolicy,
    state: MacState,
    now: float,
    scan_boundary: bool,
    rng: np.random.Generator,
) -> MacAddress:
    """Address to use at time `now`, rotating per policy at scan boundaries.

    All frames inside one scan burst share a MAC: rotation only happens
    when `scan_boundary` is set. Periodic rotation fires at the first
    boundary where at least `period_s` has elapsed since the last change
    (closed lower bound). Updates `state` in place.
    """
    if not scan_boundary or policy.kind is PolicyKind.NONE:
        return state.current

    if policy.kind is PolicyKind.FULL_PER_SCAN:
        fresh = random_mac(rng)
    elif policy.kind is PolicyKind.OUI_PRESERVING:
        fresh = _random_nic(policy.base_oui, rng)
    elif policy.kind is PolicyKind.PERIODIC:
        if now - state.last_change_time >= policy.period_s:
            fresh = random_mac(rng)
        else:
            return state.current
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unknown policy kind {policy.kind}")

    if fresh != state.current:
        state.change_count += 1
        state.last_change_time = now
    state.current = fresh
    return fresh


def mac_compliant(addr: MacAddress, policy: MacPolicy) -> bool:
    """Check the IEEE-compliance contract for an emitted address.

    Unicast always; locally administered for the fully random policies;
    OUI-preserving keeps the vendor OUI verbatim (including its U/L bit).
    The `none` extension only requires unicast.
    """
    if addr.multicast_bit != 0:
        return False
    if policy.kind is PolicyKind.OUI_PRESERVING:
        return addr.oui == policy.base_oui
    if policy.kind is PolicyKind.NONE:
        return True
    return addr.local_bit == 1
