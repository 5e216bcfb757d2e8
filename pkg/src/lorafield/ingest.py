"""Campaign log ingestion: parse CSV logs and join receptions to transmissions.

Three flat CSV files describe a measurement campaign:

    transmissions.csv  packet_id,timestamp_utc,lat_deg,lon_deg,alt_m,data_rate,tx_power_dbm
    receptions.csv     packet_id,gateway_id,timestamp_utc,rssi_dbm,snr_db,sf,frequency_hz,bandwidth_hz,channel,rf_chain
    gateways.csv       gateway_id,lat_deg,lon_deg,alt_m,environment_tag

Timestamps are ISO-8601 UTC with millisecond resolution, e.g.
``2024-08-24T14:03:07.250Z``. ``receptions.csv`` may leave ``packet_id``
empty, in which case the join falls back to nearest-timestamp matching.

The join emits one LinkSample per (transmission, gateway) reception pair,
with the 3D link distance and the measured path loss
``path_loss_db = tx_power_dbm - rssi_dbm``. Output schema:

    samples.csv        packet_id,gateway_id,timestamp_utc,distance_m,rssi_dbm,snr_db,sf,path_loss_db
"""

from __future__ import annotations

import csv
import enum
import io
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, TextIO, Union

from .geo import GeoPoint, link_distance_3d

TRANSMISSIONS_HEADER = ["packet_id", "timestamp_utc", "lat_deg", "lon_deg",
                        "alt_m", "data_rate", "tx_power_dbm"]
RECEPTIONS_HEADER = ["packet_id", "gateway_id", "timestamp_utc", "rssi_dbm",
                     "snr_db", "sf", "frequency_hz", "bandwidth_hz",
                     "channel", "rf_chain"]
GATEWAYS_HEADER = ["gateway_id", "lat_deg", "lon_deg", "alt_m", "environment_tag"]
SAMPLES_HEADER = ["packet_id", "gateway_id", "timestamp_utc", "distance_m",
                  "rssi_dbm", "snr_db", "sf", "path_loss_db"]
REJECTS_HEADER = ["packet_id", "gateway_id", "timestamp_utc", "reason"]

DEFAULT_TX_POWER_DBM = 20.0

Source = Union[str, Path, TextIO]


class ParseError(ValueError):
    """Malformed input row; carries the 1-based line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class JoinError(ValueError):
    """Join preconditions violated (e.g. receptions from unknown gateways)."""


class DataRate(enum.Enum):
    """US915 uplink data-rate index mapped to (spreading factor, bandwidth)."""

    DR0 = (10, 125_000)
    DR1 = (9, 125_000)
    DR2 = (8, 125_000)
    DR3 = (7, 125_000)

    @property
    def sf(self) -> int:
        return self.value[0]

    @property
    def bandwidth_hz(self) -> int:
        return self.value[1]


@dataclass(frozen=True, slots=True)
class Transmission:
    packet_id: int
    timestamp: datetime
    position: GeoPoint
    data_rate: DataRate
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM

    def __post_init__(self) -> None:
        if self.packet_id < 0:
            raise ValueError(f"packet_id must be non-negative, got {self.packet_id}")
        if not math.isfinite(self.tx_power_dbm):
            raise ValueError("tx_power_dbm must be finite")


@dataclass(frozen=True, slots=True)
class Reception:
    packet_id: int | None
    gateway_id: str
    timestamp: datetime
    rssi_dbm: float
    snr_db: float
    sf: int
    frequency_hz: float
    bandwidth_hz: float
    channel: int = 0
    rf_chain: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.rssi_dbm):
            raise ValueError("rssi_dbm must be finite")
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if not 6 <= self.sf <= 12:
            raise ValueError(f"sf must be in [6, 12], got {self.sf}")


@dataclass(frozen=True, slots=True)
class GatewayRecord:
    gateway_id: str
    position: GeoPoint
    environment_tag: str = ""


@dataclass(frozen=True, slots=True)
class LinkSample:
    """One reception joined to its transmission.

    ``path_loss_db`` is the measured path loss, tx power minus RSSI;
    ``distance_m`` is the 3D link distance, clamped to >= 1 m so the
    log-distance fit is never evaluated at zero.
    """

    packet_id: int
    gateway_id: str
    distance_m: float
    rssi_dbm: float
    snr_db: float
    sf: int
    tx_power_dbm: float
    path_loss_db: float
    timestamp: datetime

    def __post_init__(self) -> None:
        if not (math.isfinite(self.distance_m) and self.distance_m > 0):
            raise ValueError(f"distance_m must be positive and finite, got {self.distance_m}")
        if not (math.isfinite(self.rssi_dbm) and math.isfinite(self.snr_db)
                and math.isfinite(self.tx_power_dbm) and math.isfinite(self.path_loss_db)):
            raise ValueError("rssi_dbm, snr_db, tx_power_dbm and path_loss_db must be finite")
        if not 6 <= self.sf <= 12:
            raise ValueError(f"sf must be in [6, 12], got {self.sf}")


@dataclass(frozen=True, slots=True)
class Reject:
    """A reception that could not be joined, with the reason why."""

    reception: Reception
    reason: str


@dataclass(frozen=True)
class JoinPolicy:
    """Matching rules for the join.

    The fallback window is half the nominal 2.5 s packet cadence, which
    makes nearest-timestamp matching unambiguous for on-schedule traffic.
    """

    fallback_window_s: float = 1.25
    min_distance_m: float = 1.0


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 instant; a trailing Z or a missing offset means UTC."""
    t = text.strip()
    if t.endswith(("Z", "z")):
        t = t[:-1] + "+00:00"
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    """Render a UTC instant at millisecond resolution, e.g. 2024-08-24T14:03:07.250Z."""
    dt = dt.astimezone(timezone.utc)
    return f"{dt:%Y-%m-%dT%H:%M:%S}.{dt.microsecond // 1000:03d}Z"


def _reader(source: Source) -> Iterator[list[str]]:
    if hasattr(source, "read"):
        if isinstance(source, (io.RawIOBase, io.BufferedIOBase)):
            source = io.TextIOWrapper(source, encoding="utf-8", newline="")
        yield from csv.reader(source)
    else:
        with open(source, newline="", encoding="utf-8") as fh:
            yield from csv.reader(fh)


def _rows(source: Source, expected_header: list[str]) -> Iterator[tuple[int, list[str]]]:
    """Yield (line_no, row) pairs after validating the documented header."""
    line_no = 0
    for row in _reader(source):
        line_no += 1
        if line_no == 1:
            header = [cell.strip() for cell in row]
            if header != expected_header:
                raise ParseError(
                    f"unexpected header {header!r}, expected {expected_header!r}", 1)
            continue
        if not row or all(cell.strip() == "" for cell in row):
            continue
        if len(row) != len(expected_header):
            raise ParseError(
                f"expected {len(expected_header)} fields, got {len(row)}", line_no)
        yield line_no, [cell.strip() for cell in row]


def _parse_float(cell: str, field: str, line_no: int) -> float:
    if cell == "":
        raise ParseError(f"missing {field}", line_no)
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"invalid {field} {cell!r}", line_no) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite {field} {cell!r}", line_no)
    return value


def _parse_int(cell: str, field: str, line_no: int) -> int:
    try:
        return int(cell)
    except ValueError:
        raise ParseError(f"invalid {field} {cell!r}", line_no) from None


def _parse_ts(cell: str, line_no: int) -> datetime:
    try:
        return parse_timestamp(cell)
    except ValueError:
        raise ParseError(f"invalid timestamp_utc {cell!r}", line_no) from None


def _parse_point(cells: list[str], names: tuple[str, str, str], line_no: int) -> GeoPoint:
    lat = _parse_float(cells[0], names[0], line_no)
    lon = _parse_float(cells[1], names[1], line_no)
    alt = _parse_float(cells[2], names[2], line_no)
    try:
        return GeoPoint(lat, lon, alt)
    except ValueError as exc:
        raise ParseError(str(exc), line_no) from None


def parse_transmissions(source: Source) -> list[Transmission]:
    """Parse transmissions.csv; duplicate packet_ids are a validation error."""
    txs: list[Transmission] = []
    seen: dict[int, int] = {}
    for line_no, row in _rows(source, TRANSMISSIONS_HEADER):
        packet_id = _parse_int(row[0], "packet_id", line_no)
        if packet_id < 0:
            raise ParseError(f"packet_id must be non-negative, got {packet_id}", line_no)
        if packet_id in seen:
            raise ParseError(
                f"duplicate packet_id {packet_id} (first seen on line {seen[packet_id]})",
                line_no)
        seen[packet_id] = line_no
        ts = _parse_ts(row[1], line_no)
        position = _parse_point(row[2:5], ("lat_deg", "lon_deg", "alt_m"), line_no)
        try:
            data_rate = DataRate[row[5]]
        except KeyError:
            raise ParseError(f"unknown data_rate {row[5]!r}", line_no) from None
        tx_power = _parse_float(row[6], "tx_power_dbm", line_no)
        txs.append(Transmission(packet_id, ts, position, data_rate, tx_power))
    return txs


def parse_receptions(source: Source) -> list[Reception]:
    """Parse receptions.csv; an empty packet_id marks a fallback-join row."""
    rxs: list[Reception] = []
    for line_no, row in _rows(source, RECEPTIONS_HEADER):
        packet_id = None if row[0] == "" else _parse_int(row[0], "packet_id", line_no)
        gateway_id = row[1]
        if gateway_id == "":
            raise ParseError("missing gateway_id", line_no)
        ts = _parse_ts(row[2], line_no)
        rssi = _parse_float(row[3], "rssi_dbm", line_no)
        snr = _parse_float(row[4], "snr_db", line_no)
        sf = _parse_int(row[5], "sf", line_no)
        if not 6 <= sf <= 12:
            raise ParseError(f"sf must be in [6, 12], got {sf}", line_no)
        freq = _parse_float(row[6], "frequency_hz", line_no)
        bw = _parse_float(row[7], "bandwidth_hz", line_no)
        channel = _parse_int(row[8], "channel", line_no)
        rf_chain = _parse_int(row[9], "rf_chain", line_no)
        rxs.append(Reception(packet_id, gateway_id, ts, rssi, snr, sf, freq, bw,
                             channel, rf_chain))
    return rxs


def parse_gateways(source: Source) -> dict[str, GatewayRecord]:
    """Parse gateways.csv into a registry keyed by gateway_id."""
    registry: dict[str, GatewayRecord] = {}
    for line_no, row in _rows(source, GATEWAYS_HEADER):
        gateway_id = row[0]
        if gateway_id == "":
            raise ParseError("missing gateway_id", line_no)
        if gateway_id in registry:
            raise ParseError(f"duplicate gateway_id {gateway_id!r}", line_no)
        position = _parse_point(row[1:4], ("lat_deg", "lon_deg", "alt_m"), line_no)
        registry[gateway_id] = GatewayRecord(gateway_id, position, row[4])
    return registry


def parse_samples(source: Source) -> list[LinkSample]:
    """Parse a samples.csv produced by the join.

    The file does not carry tx power, so it is reconstructed from the
    path-loss identity as rssi_dbm + path_loss_db.
    """
    samples: list[LinkSample] = []
    for line_no, row in _rows(source, SAMPLES_HEADER):
        packet_id = _parse_int(row[0], "packet_id", line_no)
        gateway_id = row[1]
        if gateway_id == "":
            raise ParseError("missing gateway_id", line_no)
        ts = _parse_ts(row[2], line_no)
        distance = _parse_float(row[3], "distance_m", line_no)
        rssi = _parse_float(row[4], "rssi_dbm", line_no)
        snr = _parse_float(row[5], "snr_db", line_no)
        sf = _parse_int(row[6], "sf", line_no)
        path_loss = _parse_float(row[7], "path_loss_db", line_no)
        try:
            samples.append(LinkSample(packet_id, gateway_id, distance, rssi, snr,
                                      sf, rssi + path_loss, path_loss, ts))
        except ValueError as exc:
            raise ParseError(str(exc), line_no) from None
    return samples


def _match_by_timestamp(rx: Reception, txs_by_time: list[Transmission],
                        times: list[datetime], window_s: float
                        ) -> tuple[Transmission | None, str | None]:
    """Nearest-timestamp fallback; returns (tx, None) or (None, reason)."""
    t = rx.timestamp
    i = bisect_left(times, t)
    candidates: list[tuple[float, int]] = []
    if i < len(times):
        candidates.append((abs((times[i] - t).total_seconds()), i))
    if i > 0:
        candidates.append((abs((t - times[i - 1]).total_seconds()), i - 1))
    candidates = [(dt, j) for dt, j in candidates if dt <= window_s]
    if not candidates:
        return None, "no_match"
    best_dt = min(dt for dt, _ in candidates)
    matches: set[int] = set()
    for dt, j in candidates:
        if dt == best_dt:
            # expand over transmissions sharing this exact timestamp
            matches.update(range(bisect_left(times, times[j]),
                                 bisect_right(times, times[j])))
    if len(matches) > 1:
        return None, "ambiguous"
    return txs_by_time[matches.pop()], None


def join_samples(
    txs: list[Transmission],
    rxs: list[Reception],
    gateways: dict[str, GatewayRecord],
    policy: JoinPolicy = JoinPolicy(),
) -> tuple[list[LinkSample], list[Reject]]:
    """Join receptions to transmissions into link samples.

    Matching is by packet_id when the reception carries one, otherwise by
    nearest transmission timestamp within the policy window. Duplicate
    (packet_id, gateway_id) pairs keep the copy with the highest SNR.
    Every reception ends up in exactly one of the two returned lists, and
    samples come back sorted by (timestamp, gateway_id).

    Raises JoinError if any reception names a gateway missing from the
    registry, listing the unknown ids.
    """
    unknown = sorted({rx.gateway_id for rx in rxs} - gateways.keys())
    if unknown:
        raise JoinError(f"receptions reference unknown gateway ids: {', '.join(unknown)}")

    by_id: dict[int, Transmission] = {}
    for tx in txs:
        if tx.packet_id in by_id:
            raise JoinError(f"duplicate transmission packet_id {tx.packet_id}")
        by_id[tx.packet_id] = tx
    txs_by_time = sorted(txs, key=lambda t: t.timestamp)
    times = [t.timestamp for t in txs_by_time]

    rejects: list[Reject] = []
    best: dict[tuple[int, str], tuple[Reception, Transmission]] = {}
    for rx in rxs:
        if rx.packet_id is not None:
            tx = by_id.get(rx.packet_id)
            if tx is None:
                rejects.append(Reject(rx, "unknown_packet_id"))
                continue
        else:
            tx, reason = _match_by_timestamp(rx, txs_by_time, times,
                                             policy.fallback_window_s)
            if tx is None:
                rejects.append(Reject(rx, reason))
                continue
        key = (tx.packet_id, rx.gateway_id)
        held = best.get(key)
        if held is None:
            best[key] = (rx, tx)
        elif rx.snr_db > held[0].snr_db:
            rejects.append(Reject(held[0], "duplicate"))
            best[key] = (rx, tx)
        else:
            rejects.append(Reject(rx, "duplicate"))

    samples: list[LinkSample] = []
    for rx, tx in best.values():
        gw = gateways[rx.gateway_id]
        distance = max(link_distance_3d(tx.position, gw.position), policy.min_distance_m)
        samples.append(LinkSample(
            packet_id=tx.packet_id,
            gateway_id=rx.gateway_id,
            distance_m=distance,
            rssi_dbm=rx.rssi_dbm,
            snr_db=rx.snr_db,
            sf=rx.sf,
            tx_power_dbm=tx.tx_power_dbm,
            path_loss_db=tx.tx_power_dbm - rx.rssi_dbm,
            timestamp=rx.timestamp,
        ))
    samples.sort(key=lambda s: (s.timestamp, s.gateway_id))
    rejects.sort(key=lambda r: (r.reception.timestamp, r.reception.gateway_id))
    return samples, rejects


def _csv_writer() -> tuple[io.StringIO, "csv._writer"]:
    buf = io.StringIO()
    return buf, csv.writer(buf, lineterminator="\n")


def transmissions_to_csv(txs: Iterable[Transmission]) -> str:
    buf, w = _csv_writer()
    w.writerow(TRANSMISSIONS_HEADER)
    for tx in txs:
        p = tx.position
        w.writerow([tx.packet_id, format_timestamp(tx.timestamp),
                    f"{p.lat_deg:.7f}", f"{p.lon_deg:.7f}", f"{p.alt_m:.3f}",
                    tx.data_rate.name, str(tx.tx_power_dbm)])
    return buf.getvalue()


def receptions_to_csv(rxs: Iterable[Reception]) -> str:
    buf, w = _csv_writer()
    w.writerow(RECEPTIONS_HEADER)
    for rx in rxs:
        w.writerow(["" if rx.packet_id is None else rx.packet_id,
                    rx.gateway_id, format_timestamp(rx.timestamp),
                    str(rx.rssi_dbm), str(rx.snr_db), rx.sf,
                    f"{rx.frequency_hz:.0f}", f"{rx.bandwidth_hz:.0f}",
                    rx.channel, rx.rf_chain])
    return buf.getvalue()


def gateways_to_csv(gws: Iterable[GatewayRecord]) -> str:
    buf, w = _csv_writer()
    w.writerow(GATEWAYS_HEADER)
    for gw in gws:
        p = gw.position
        w.writerow([gw.gateway_id, f"{p.lat_deg:.7f}", f"{p.lon_deg:.7f}",
                    f"{p.alt_m:.3f}", gw.environment_tag])
    return buf.getvalue()


def samples_to_csv(samples: Iterable[LinkSample]) -> str:
    # str() keeps full float precision so fits on a re-parsed file match.
    buf, w = _csv_writer()
    w.writerow(SAMPLES_HEADER)
    for s in samples:
        w.writerow([s.packet_id, s.gateway_id, format_timestamp(s.timestamp),
                    str(s.distance_m), str(s.rssi_dbm), str(s.snr_db), s.sf,
                    str(s.path_loss_db)])
    return buf.getvalue()


def rejects_to_csv(rejects: Iterable[Reject]) -> str:
    buf, w = _csv_writer()
    w.writerow(REJECTS_HEADER)
    for r in rejects:
        rx = r.reception
        w.writerow(["" if rx.packet_id is None else rx.packet_id,
                    rx.gateway_id, format_timestamp(rx.timestamp), r.reason])
    return buf.getvalue()
