"""Classic PCAP files with radiotap encapsulation, and CSV label files.

The PCAP global header is pinned little-endian: magic 0xa1b2c3d4, version
2.4, thiszone 0, sigfigs 0, snaplen 65535, linktype 127. Label rows mirror
EmissionRecord fields with microsecond timestamps matching the capture.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import IO, Iterable, NamedTuple

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_SWAPPED = 0xD4C3B2A1
PCAP_VERSION = (2, 4)
PCAP_SNAPLEN = 65535
LINKTYPE_RADIOTAP = 127
LINKTYPE_80211 = 105

_GLOBAL_HDR = struct.Struct("<IHHiIII")
_REC_HDR = struct.Struct("<IIII")

LABEL_COLUMNS = [
    "frame_index",
    "timestamp_s",
    "device_id",
    "state",
    "true_mac",
    "emitted_mac",
    "seq_num",
    "x_m",
    "y_m",
    "rss_dbm",
    "burst_index",
]

__all__ = [
    "PcapRecord",
    "PcapError",
    "LabelError",
    "LABEL_COLUMNS",
    "LINKTYPE_RADIOTAP",
    "write_pcap",
    "read_pcap",
    "write_labels",
    "read_labels",
]


class PcapError(ValueError):
    """Structural PCAP problem; carries the offending byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class LabelError(ValueError):
    """Malformed label file row; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


class PcapRecord(NamedTuple):
    ts_sec: int
    ts_usec: int
    data: bytes


def write_pcap(
    records: Iterable[tuple[int, int, bytes]],
    path: str | Path | IO[bytes],
    linktype: int = LINKTYPE_RADIOTAP,
) -> int:
    """Write (ts_sec, ts_usec, data) records; returns the packet count."""
    own = isinstance(path, (str, Path))
    fh: IO[bytes] = open(path, "wb") if own else path
    try:
        fh.write(_GLOBAL_HDR.pack(PCAP_MAGIC, *PCAP_VERSION, 0, 0, PCAP_SNAPLEN, linktype))
        count = 0
        for ts_sec, ts_usec, data in records:
            fh.write(_REC_HDR.pack(ts_sec, ts_usec, len(data), len(data)))
            fh.write(data)
            count += 1
        return count
    finally:
        if own:
            fh.close()


def read_pcap(path: str | Path | IO[bytes]) -> tuple[int, list[PcapRecord]]:
    """Read a classic PCAP file; returns (linktype, records).

    Accepts either byte order and linktypes 127 (radiotap) and 105
    (bare 802.11). Timestamps are kept as written.
    """
    own = isinstance(path, (str, Path))
    fh: IO[bytes] = open(path, "rb") if own else path
    try:
        blob = fh.read()
    finally:
        if own:
            fh.close()
    if len(blob) < _GLOBAL_HDR.size:
        raise PcapError("file shorter than global header", len(blob))
    (magic,) = struct.unpack_from("<I", blob, 0)
    if magic == PCAP_MAGIC:
        endian = "<"
    elif magic == PCAP_MAGIC_SWAPPED:
        endian = ">"
    else:
        raise PcapError(f"bad magic 0x{magic:08x}", 0)
    hdr = struct.Struct(endian + "IHHiIII")
    _, _vmaj, _vmin, _tz, _sig, _snap, linktype = hdr.unpack_from(blob, 0)
    if linktype not in (LINKTYPE_RADIOTAP, LINKTYPE_80211):
        raise PcapError(f"unsupported linktype {linktype}", 20)
    rec_hdr = struct.Struct(endian + "IIII")
    records = []
    off = hdr.size
    while off < len(blob):
        if off + rec_hdr.size > len(blob):
            raise PcapError("truncated record header", off)
        ts_sec, ts_usec, incl_len, _orig_len = rec_hdr.unpack_from(blob, off)
        off += rec_hdr.size
        if off + incl_len > len(blob):
            raise PcapError(f"record data overruns file ({incl_len} bytes)", off)
        records.append(PcapRecord(ts_sec, ts_usec, blob[off : off + incl_len]))
        off += incl_len
    return linktype, records


def write_labels(records: Iterable, path: str | Path) -> int:
    """Write EmissionRecords as CSV (UTF-8, LF endings); returns row count."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LABEL_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.frame_index,
                    f"{r.timestamp_s:.6f}",
                    r.device_id,
                    int(r.state),
                    str(r.true_mac),
                    str(r.emitted_mac),
                    r.seq_num,
                    f"{r.x_m:.6f}",
                    f"{r.y_m:.6f}",
                    r.rss_dbm,
                    r.burst_index,
                ]
            )
            count += 1
    return count


def read_labels(path: str | Path) -> list:
    """Read a label CSV back into EmissionRecords."""
    from prsim.engine import EmissionRecord
    from prsim.behavior import DeviceState
    from prsim.mac import parse_mac

    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LabelError("missing header row", 1) from None
        if header != LABEL_COLUMNS:
            raise LabelError(f"unexpected header {header!r}", 1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(LABEL_COLUMNS):
                raise LabelError(f"expected {len(LABEL_COLUMNS)} fields, got {len(row)}", lineno)
            try:
                records.append(
                    EmissionRecord(
                        frame_index=int(row[0]),
                        timestamp_s=float(row[1]),
                        device_id=int(row[2]),
                        state=DeviceState(int(row[3])),
                        true_mac=parse_mac(row[4]),
                        emitted_mac=parse_mac(row[5]),
                        seq_num=int(row[6]),
                        x_m=float(row[7]),
                        y_m=float(row[8]),
                        rss_dbm=int(row[9]),
                        burst_index=int(row[10]),
                    )
                )
            except (ValueError, KeyError) as exc:
                raise LabelError(f"bad row: {exc}", lineno) from None
    return records
