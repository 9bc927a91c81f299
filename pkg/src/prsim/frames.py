"""802.11 probe-request frames: construction, serialization, parsing.

Wire format is the 24-byte management MAC header (little-endian sequence
control) followed by TLV information elements, with SSID always first.
Captured packets prepend a minimal radiotap header carrying flags,
channel, and antenna signal so standard analyzers display RSS.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from prsim.mac import BROADCAST, MacAddress

# Frame Control byte 0: subtype 4 (probe request), type 0 (management),
# protocol version 0.
FC0_PROBE_REQ = 0x40
MGMT_HEADER_LEN = 24

TAG_SSID = 0
TAG_SUPP_RATES = 1
TAG_HT_CAP = 45
TAG_EXT_RATES = 50
TAG_EXT_CAP = 127
TAG_VHT_CAP = 191
TAG_VENDOR = 221

RADIOTAP_LEN = 15
_RT_PRESENT_FLAGS = 1 << 1
_RT_PRESENT_CHANNEL = 1 << 3
_RT_PRESENT_ANTSIGNAL = 1 << 5
_RT_PRESENT = _RT_PRESENT_FLAGS | _RT_PRESENT_CHANNEL | _RT_PRESENT_ANTSIGNAL
_RT_PRESENT_EXT = 1 << 31

_CHAN_OFDM = 0x0040
_CHAN_2GHZ = 0x0080
_CHAN_5GHZ = 0x0100
_CHAN_DYN = 0x0400

# (size, alignment) of radiotap fields by present bit, in walk order.
_RT_FIELD_LAYOUT = {
    0: (8, 8),   # TSFT
    1: (1, 1),   # Flags
    2: (1, 1),   # Rate
    3: (4, 2),   # Channel
    4: (2, 2),   # FHSS
    5: (1, 1),   # Antenna signal (dBm)
    6: (1, 1),   # Antenna noise (dBm)
    7: (2, 2),   # Lock quality
    8: (2, 2),   # TX attenuation
    9: (2, 2),   # dB TX attenuation
    10: (1, 1),  # dBm TX power
    11: (1, 1),  # Antenna
    12: (1, 1),  # dB antenna signal
    13: (1, 1),  # dB antenna noise
    14: (2, 2),  # RX flags
}

__all__ = [
    "InformationElement",
    "ProbeRequestFrame",
    "CaptureHeader",
    "FrameParseError",
    "build_probe_request",
    "serialize_frame",
    "serialize_packet",
    "parse_frame",
    "parse_capture_header",
    "is_probe_request",
]


class FrameParseError(ValueError):
    """Malformed frame bytes; carries the offending byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class InformationElement:
    """One tag-length-value element."""

    tag: int
    value: bytes

    def __post_init__(self):
        if not 0 <= self.tag <= 255:
            raise ValueError(f"IE tag {self.tag} outside [0, 255]")
        if len(self.value) > 255:
            raise ValueError(f"IE value length {len(self.value)} exceeds 255")

    def to_bytes(self) -> bytes:
        return bytes((self.tag, len(self.value))) + self.value


@dataclass(frozen=True)
class ProbeRequestFrame:
    """Logical probe request; `ies` excludes the SSID element, which is
    carried in `ssid` and always serialized first (empty = wildcard)."""

    seq_num: int
    src: MacAddress
    dst: MacAddress = BROADCAST
    bssid: MacAddress = BROADCAST
    ssid: bytes = b""
    ies: tuple[InformationElement, ...] = ()
    rss_dbm: int = 0
    timestamp: float = 0.0

    def __post_init__(self):
        if not 0 <= self.seq_num <= 4095:
            raise ValueError(f"seq_num {self.seq_num} outside [0, 4095]")
        if len(self.ssid) > 32:
            raise ValueError("ssid exceeds 32 bytes")


@dataclass(frozen=True)
class CaptureHeader:
    """Radiotap fields we emit: flags, channel, antenna signal."""

    rss_dbm: int
    channel_mhz: int
    flags: int = 0


def _rates_ie(tag: int, rates_mbps: tuple[float, ...]) -> InformationElement:
    units = []
    for r in rates_mbps:
        u = r * 2.0  # 500 kb/s units
        if u != int(u) or not 1 <= int(u) <= 255:
            raise ValueError(f"rate {r} Mbps not encodable in 500 kb/s units")
        units.append(int(u))
    return InformationElement(tag, bytes(units))


def build_probe_request(
    profile,
    mac: MacAddress,
    seq: int,
    ssid: bytes,
    rss: int,
    t: float,
) -> ProbeRequestFrame:
    """Assemble a frame from a device profile's capability fields.

    IE order is fixed: SSID, Supported Rates, Extended Supported Rates,
    HT Capabilities, Extended Capabilities, VHT Capabilities, then any
    vendor-specific elements carried by the profile.
    """
    ies: list[InformationElement] = []
    if profile.supported_rates:
        ies.append(_rates_ie(TAG_SUPP_RATES, tuple(profile.supported_rates)))
    if profile.ext_rates:
        ies.append(_rates_ie(TAG_EXT_RATES, tuple(profile.ext_rates)))
    if profile.ht_cap:
        ies.append(InformationElement(TAG_HT_CAP, profile.ht_cap))
    if profile.ext_cap:
        ies.append(InformationElement(TAG_EXT_CAP, profile.ext_cap))
    if profile.vht_cap:
        ies.append(InformationElement(TAG_VHT_CAP, profile.vht_cap))
    for blob in profile.vendor_ies:
        ies.append(InformationElement(TAG_VENDOR, blob))
    return ProbeRequestFrame(
        seq_num=seq,
        src=mac,
        ssid=bytes(ssid),
        ies=tuple(ies),
        rss_dbm=rss,
        timestamp=t,
    )


def serialize_frame(frame: ProbeRequestFrame) -> bytes:
    """Bare 802.11 bytes: MAC header then SSID IE then remaining IEs."""
    out = bytearray()
    out += struct.pack("<BBH", FC0_PROBE_REQ, 0x00, 0)  # frame control, duration
    out += frame.dst.octets
    out += frame.src.octets
    out += frame.bssid.octets
    out += struct.pack("<H", (frame.seq_num << 4) & 0xFFFF)
    out += InformationElement(TAG_SSID, frame.ssid).to_bytes()
    for ie in frame.ies:
        out += ie.to_bytes()
    return bytes(out)


def serialize_capture_header(header: CaptureHeader) -> bytes:
    freq = header.channel_mhz
    chan_flags = (_CHAN_2GHZ | _CHAN_DYN) if freq < 4000 else (_CHAN_5GHZ | _CHAN_OFDM)
    rss = max(-128, min(127, header.rss_dbm))
    return struct.pack(
        "<BBHIBBHHb", 0, 0, RADIOTAP_LEN, _RT_PRESENT,
        header.flags & 0xFF, 0, freq, chan_flags, rss,
    )


def serialize_packet(frame: ProbeRequestFrame, channel_mhz: int) -> bytes:
    """Radiotap capture header followed by the 802.11 frame."""
    header = CaptureHeader(rss_dbm=frame.rss_dbm, channel_mhz=channel_mhz)
    return serialize_capture_header(header) + serialize_frame(frame)


def parse_capture_header(data: bytes) -> tuple[CaptureHeader, int]:
    """Parse a radiotap header, returning it and its total length."""
    if len(data) < 8:
        raise FrameParseError("truncated radiotap header", len(data))
    version, _pad, length = struct.unpack_from("<BBH", data, 0)
    if version != 0:
        raise FrameParseError(f"unsupported radiotap version {version}", 0)
    if length < 8 or length > len(data):
        raise FrameParseError(f"radiotap length {length} out of range", 2)
    present_words = []
    off = 4
    while True:
        if off + 4 > length:
            raise FrameParseError("radiotap present chain overruns header", off)
        (word,) = struct.unpack_from("<I", data, off)
        present_words.append(word)
        off += 4
        if not word & _RT_PRESENT_EXT:
            break
    rss = 0
    channel = 0
    flags = 0
    cursor = off
    for bit in range(30):
        if not present_words[0] & (1 << bit):
            continue
        layout = _RT_FIELD_LAYOUT.get(bit)
        if layout is None:
            break  # unknown field size: cannot walk further
        size, align = layout
        cursor = (cursor + align - 1) // align * align
        if cursor + size > length:
            raise FrameParseError("radiotap field overruns header", cursor)
        if bit == 1:
            flags = data[cursor]
        elif bit == 3:
            (channel,) = struct.unpack_from("<H", data, cursor)
        elif bit == 5:
            (rss,) = struct.unpack_from("<b", data, cursor)
        cursor += size
    return CaptureHeader(rss_dbm=rss, channel_mhz=channel, flags=flags), length


def _parse_80211(data: bytes, rss_dbm: int, timestamp: float) -> ProbeRequestFrame:
    if len(data) < MGMT_HEADER_LEN:
        raise FrameParseError("frame shorter than management header", len(data))
    fc0 = data[0]
    if fc0 != FC0_PROBE_REQ:
        raise FrameParseError(f"not a probe request (frame control 0x{fc0:02x})", 0)
    dst = MacAddress(bytes(data[4:10]))
    src = MacAddress(bytes(data[10:16]))
    bssid = MacAddress(bytes(data[16:22]))
    (seq_ctrl,) = struct.unpack_from("<H", data, 22)
    seq_num = seq_ctrl >> 4
    ssid = b""
    ies: list[InformationElement] = []
    off = MGMT_HEADER_LEN
    first = True
    while off < len(data):
        if off + 2 > len(data):
            raise FrameParseError("truncated IE header", off)
        tag, length = data[off], data[off + 1]
        if off + 2 + length > len(data):
            raise FrameParseError(f"IE tag {tag} length {length} overruns frame", off)
        value = bytes(data[off + 2 : off + 2 + length])
        if first and tag == TAG_SSID:
            ssid = value
        else:
            ies.append(InformationElement(tag, value))
        first = False
        off += 2 + length
    return ProbeRequestFrame(
        seq_num=seq_num,
        src=src,
        dst=dst,
        bssid=bssid,
        ssid=ssid,
        ies=tuple(ies),
        rss_dbm=rss_dbm,
        timestamp=timestamp,
    )


def parse_frame(
    data: bytes, timestamp: float = 0.0, rss_dbm: int = 0
) -> ProbeRequestFrame:
    """Parse a captured packet (radiotap + frame) or a bare 802.11 frame.

    Radiotap is detected by its leading version byte 0; a bare probe
    request always starts with 0x40. RSS comes from the capture header
    when present, else from `rss_dbm`.
    """
    if not data:
        raise FrameParseError("empty packet", 0)
    if data[0] == 0:
        header, length = parse_capture_header(data)
        return _parse_80211(data[length:], header.rss_dbm, timestamp)
    return _parse_80211(data, rss_dbm, timestamp)


def is_probe_request(data: bytes) -> bool:
    """True when the packet (with or without radiotap) is a probe request."""
    try:
        if not data:
            return False
        if data[0] == 0:
            _, length = parse_capture_header(data)
            data = data[length:]
        return len(data) >= MGMT_HEADER_LEN and data[0] == FC0_PROBE_REQ
    except FrameParseError:
        return False
