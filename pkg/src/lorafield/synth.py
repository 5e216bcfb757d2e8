"""Deterministic synthetic measurement-campaign generator.

Emits the same three CSV files the ingest side consumes, from a scenario
with known channel truth, so fit recovery and the full pipeline can be
validated against generating parameters.

For every packet (one per interval along the interpolated trajectory) and
every gateway, the path loss is the log-distance mean plus one independent
zero-mean Gaussian shadowing draw; RSSI is tx power minus path loss, and
SNR is RSSI minus a constant noise floor (default -117 dBm, roughly thermal
noise over 125 kHz plus a 6 dB noise figure; a synthetic bridge, since
gateways report SNR directly). A reception row is emitted only when the SNR
meets the SF's demodulation threshold, which censors the output exactly the
way real gateway logs are censored.

RSSI and SNR are quantized to 0.01 dB before the demodulation gate, so the
emitted files are self-consistent. Identical scenarios and seeds reproduce
byte-identical files on any platform.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .geo import GeoPoint, link_distance_3d
from .ingest import (DataRate, GatewayRecord, Reception, Transmission,
                     format_timestamp, gateways_to_csv, parse_timestamp,
                     receptions_to_csv, transmissions_to_csv)
from .model import (DEFAULT_SF_TABLE, PathLossModel, SfTable,
                    standard_normal_cdf)
from .rng import SplitMix64

DEFAULT_NOISE_FLOOR_DBM = -117.0
DEFAULT_PACKET_INTERVAL_S = 2.5
# US915 uplink sub-band: 8 channels of 200 kHz starting at 902.3 MHz.
_CHANNEL0_HZ = 902_300_000
_CHANNEL_STEP_HZ = 200_000
_NUM_CHANNELS = 8


@dataclass(frozen=True)
class Scenario:
    """Everything needed to synthesize one campaign, including the truth."""

    gateways: tuple[GatewayRecord, ...]
    trajectory: tuple[tuple[datetime, GeoPoint], ...]
    sf_schedule: tuple[DataRate, ...]
    channel: PathLossModel
    packet_interval_s: float = DEFAULT_PACKET_INTERVAL_S
    tx_power_dbm: float = 20.0
    noise_floor_dbm: float = DEFAULT_NOISE_FLOOR_DBM
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.gateways:
            raise ValueError("scenario needs at least one gateway")
        if not self.trajectory:
            raise ValueError("scenario needs a non-empty trajectory")
        if not self.sf_schedule:
            raise ValueError("scenario needs a non-empty sf_schedule")
        if not (math.isfinite(self.packet_interval_s) and self.packet_interval_s > 0):
            raise ValueError(f"packet_interval_s must be > 0, got {self.packet_interval_s}")
        times = [t for t, _ in self.trajectory]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trajectory timestamps must be strictly increasing")


@dataclass(frozen=True)
class CampaignFiles:
    """The three generated CSV payloads, ready to write to disk."""

    transmissions_csv: str
    receptions_csv: str
    gateways_csv: str


def _interpolate(trajectory: tuple[tuple[datetime, GeoPoint], ...],
                 times: list[datetime], t: datetime) -> GeoPoint:
    """Linear interpolation between waypoints (componentwise in lat/lon/alt)."""
    i = bisect_right(times, t)
    if i == 0:
        return trajectory[0][1]
    if i == len(times):
        return trajectory[-1][1]
    (t0, p0), (t1, p1) = trajectory[i - 1], trajectory[i]
    if t == t0:
        return p0
    w = (t - t0).total_seconds() / (t1 - t0).total_seconds()
    return GeoPoint(p0.lat_deg + w * (p1.lat_deg - p0.lat_deg),
                    p0.lon_deg + w * (p1.lon_deg - p0.lon_deg),
                    p0.alt_m + w * (p1.alt_m - p0.alt_m))


def simulate(scenario: Scenario, apply_demodulation_gate: bool = True,
             table: SfTable = DEFAULT_SF_TABLE
             ) -> tuple[list[Transmission], list[Reception]]:
    """Run the channel simulation, returning transmission and reception records.

    Packets go out every packet_interval_s from the first to the last
    trajectory timestamp (inclusive). The shadowing draw happens for every
    (packet, gateway) link whether or not the reception survives the gate,
    so disabling the gate replays the identical channel.
    """
    rng = SplitMix64(scenario.seed)
    times = [t for t, _ in scenario.trajectory]
    t0, t_end = times[0], times[-1]
    span_s = (t_end - t0).total_seconds()
    n_packets = int(span_s / scenario.packet_interval_s + 1e-9) + 1

    a = scenario.channel.intercept_a_db
    ten_n = 10.0 * scenario.channel.exponent_n
    sigma = scenario.channel.sigma_db
    tx_power = scenario.tx_power_dbm
    noise_floor = scenario.noise_floor_dbm
    interval = scenario.packet_interval_s
    # per schedule entry: (data rate, sf, bandwidth, demodulation threshold)
    schedule = [(dr, dr.sf, dr.bandwidth_hz, table.threshold_db(dr.sf))
                for dr in scenario.sf_schedule]
    gateways = scenario.gateways
    gauss, log10 = rng.gauss, math.log10

    txs: list[Transmission] = []
    rxs: list[Reception] = []
    for k in range(n_packets):
        t = t0 + timedelta(seconds=k * interval)
        position = _interpolate(scenario.trajectory, times, t)
        dr, sf, bandwidth, threshold = schedule[k % len(schedule)]
        txs.append(Transmission(packet_id=k, timestamp=t, position=position,
                                data_rate=dr, tx_power_dbm=tx_power))
        channel_idx = k % _NUM_CHANNELS
        frequency = _CHANNEL0_HZ + _CHANNEL_STEP_HZ * channel_idx
        for gw in gateways:
            d = link_distance_3d(position, gw.position)
            if d < 1.0:
                d = 1.0
            path_loss = a + ten_n * log10(d) + gauss(0.0, sigma)
            rssi = round(tx_power - path_loss, 2)
            snr = round(rssi - noise_floor, 2)
            if apply_demodulation_gate and snr < threshold:
                continue
            rxs.append(Reception(
                packet_id=k, gateway_id=gw.gateway_id, timestamp=t,
                rssi_dbm=rssi, snr_db=snr, sf=sf,
                frequency_hz=frequency, bandwidth_hz=bandwidth,
                channel=channel_idx, rf_chain=0))
    return txs, rxs


def generate(scenario: Scenario) -> CampaignFiles:
    """Generate the campaign CSVs. Equal scenarios and seeds give equal bytes."""
    txs, rxs = simulate(scenario)
    return CampaignFiles(
        transmissions_csv=transmissions_to_csv(txs),
        receptions_csv=receptions_to_csv(rxs),
        gateways_csv=gateways_to_csv(scenario.gateways),
    )


def max_censoring_probability(scenario: Scenario,
                              table: SfTable = DEFAULT_SF_TABLE) -> float:
    """Upper bound on the per-draw probability that a reception is censored.

    Worst case over the scheduled SFs at the largest link distance any
    trajectory waypoint reaches. Used by presets to keep fit-recovery
    scenarios effectively censoring-free.
    """
    d_max = 1.0
    for _, position in scenario.trajectory:
        for gw in scenario.gateways:
            d_max = max(d_max, link_distance_3d(position, gw.position))
    mean_snr = (scenario.tx_power_dbm
                - (scenario.channel.intercept_a_db
                   + 10.0 * scenario.channel.exponent_n * math.log10(d_max))
                - scenario.noise_floor_dbm)
    worst = 0.0
    for dr in scenario.sf_schedule:
        margin = mean_snr - table.threshold_db(dr.sf)
        if scenario.channel.sigma_db == 0.0:
            p = 0.0 if margin >= 0 else 1.0
        else:
            p = standard_normal_cdf(-margin / scenario.channel.sigma_db)
        worst = max(worst, p)
    return worst


_PRESET_START = datetime(2024, 8, 24, 14, 0, 0, tzinfo=timezone.utc)
_PRESET_LAT = 35.7275
_PRESET_LON = -78.6960


def fit_recovery_scenario(seed: int,
                          channel: PathLossModel = PathLossModel(40.0, 2.9, 8.0),
                          packets: int = 20_000,
                          d_min_m: float = 1.0,
                          d_max_m: float = 700.0,
                          data_rate: DataRate = DataRate.DR0,
                          max_censoring: float = 1e-3) -> Scenario:
    """Preset for fit-recovery validation: one gateway, log-spaced distances.

    The transmitter climbs vertically above the gateway so the 3D link
    distance equals the altitude exactly, log-spaced over [d_min, d_max]
    with one waypoint per packet. The preset refuses configurations whose
    worst-case censoring probability exceeds max_censoring, since censored
    draws would bias the recovered parameters.
    """
    if packets < 2:
        raise ValueError("need at least 2 packets")
    gateway = GatewayRecord("GW1", GeoPoint(_PRESET_LAT, _PRESET_LON, 0.0), "synthetic")
    ratio = d_max_m / d_min_m
    waypoints = []
    for k in range(packets):
        t = _PRESET_START + timedelta(seconds=k * DEFAULT_PACKET_INTERVAL_S)
        alt = d_min_m * ratio ** (k / (packets - 1))
        waypoints.append((t, GeoPoint(_PRESET_LAT, _PRESET_LON, alt)))
    scenario = Scenario(
        gateways=(gateway,),
        trajectory=tuple(waypoints),
        sf_schedule=(data_rate,),
        channel=channel,
        seed=seed,
    )
    p = max_censoring_probability(scenario)
    if p > max_censoring:
        raise ValueError(
            f"worst-case censoring probability {p:.2e} exceeds {max_censoring:.0e}; "
            "shrink d_max, lower sigma, or pick a higher-SF data rate")
    return scenario


def helikite_scenario(seed: int,
                      channel: PathLossModel = PathLossModel(40.0, 2.3, 4.0),
                      altitude_m: float = 150.0,
                      duration_s: float = 3600.0) -> Scenario:
    """Preset resembling a tethered-aerostat campaign: a quasi-stationary
    platform at 150 m over a field site, cycling DR0-DR3, heard by a mix of
    nearby rural gateways and a farther urban one."""
    platform = GeoPoint(35.7280, -78.6790, altitude_m)
    gateways = (
        GatewayRecord("LW1", GeoPoint(35.7281, -78.6963, 5.0), "rural"),
        GatewayRecord("LW2", GeoPoint(35.7339, -78.6899, 5.0), "rural"),
        GatewayRecord("LW4", GeoPoint(35.7205, -78.6841, 5.0), "rural"),
        GatewayRecord("CC2", GeoPoint(35.7713, -78.6753, 30.0), "urban"),
    )
    end = _PRESET_START + timedelta(seconds=duration_s)
    # slight wind drift between the two endpoints
    drifted = GeoPoint(platform.lat_deg + 0.0004, platform.lon_deg + 0.0006,
                       altitude_m)
    return Scenario(
        gateways=gateways,
        trajectory=((_PRESET_START, platform), (end, drifted)),
        sf_schedule=(DataRate.DR0, DataRate.DR1, DataRate.DR2, DataRate.DR3),
        channel=channel,
        seed=seed,
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    """JSON-ready scenario document (see load_scenario for the schema)."""
    return {
        "seed": scenario.seed,
        "packet_interval_s": scenario.packet_interval_s,
        "tx_power_dbm": scenario.tx_power_dbm,
        "noise_floor_dbm": scenario.noise_floor_dbm,
        "sf_schedule": [dr.name for dr in scenario.sf_schedule],
        "channel": {
            "intercept_a_db": scenario.channel.intercept_a_db,
            "exponent_n": scenario.channel.exponent_n,
            "sigma_db": scenario.channel.sigma_db,
            "reference_d0_m": scenario.channel.reference_d0_m,
        },
        "gateways": [
            {"gateway_id": gw.gateway_id, "lat_deg": gw.position.lat_deg,
             "lon_deg": gw.position.lon_deg, "alt_m": gw.position.alt_m,
             "environment_tag": gw.environment_tag}
            for gw in scenario.gateways
        ],
        "trajectory": [
            {"timestamp_utc": format_timestamp(t), "lat_deg": p.lat_deg,
             "lon_deg": p.lon_deg, "alt_m": p.alt_m}
            for t, p in scenario.trajectory
        ],
    }


def scenario_from_dict(doc: dict) -> Scenario:
    required = ("sf_schedule", "channel", "gateways", "trajectory")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ValueError(f"scenario document missing keys: {', '.join(missing)}")
    try:
        schedule = tuple(DataRate[code] for code in doc["sf_schedule"])
    except KeyError as exc:
        raise ValueError(f"unknown data_rate {exc.args[0]!r} in sf_schedule") from None
    ch = doc["channel"]
    channel = PathLossModel(
        intercept_a_db=float(ch["intercept_a_db"]),
        exponent_n=float(ch["exponent_n"]),
        sigma_db=float(ch.get("sigma_db", 0.0)),
        reference_d0_m=float(ch.get("reference_d0_m", 1.0)),
    )
    gateways = tuple(
        GatewayRecord(g["gateway_id"],
                      GeoPoint(float(g["lat_deg"]), float(g["lon_deg"]),
                               float(g.get("alt_m", 0.0))),
                      g.get("environment_tag", ""))
        for g in doc["gateways"]
    )
    trajectory = tuple(
        (parse_timestamp(w["timestamp_utc"]),
         GeoPoint(float(w["lat_deg"]), float(w["lon_deg"]), float(w.get("alt_m", 0.0))))
        for w in doc["trajectory"]
    )
    return Scenario(
        gateways=gateways,
        trajectory=trajectory,
        sf_schedule=schedule,
        channel=channel,
        packet_interval_s=float(doc.get("packet_interval_s", DEFAULT_PACKET_INTERVAL_S)),
        tx_power_dbm=float(doc.get("tx_power_dbm", 20.0)),
        noise_floor_dbm=float(doc.get("noise_floor_dbm", DEFAULT_NOISE_FLOOR_DBM)),
        seed=int(doc.get("seed", 0)),
    )


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario JSON document.

    Schema: ``seed``, ``packet_interval_s``, ``tx_power_dbm``,
    ``noise_floor_dbm``, ``sf_schedule`` (list of DR codes), ``channel``
    ({intercept_a_db, exponent_n, sigma_db, reference_d0_m}), ``gateways``
    (list of {gateway_id, lat_deg, lon_deg, alt_m, environment_tag}) and
    ``trajectory`` (list of {timestamp_utc, lat_deg, lon_deg, alt_m}).
    """
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def save_scenario(path: str | Path, scenario: Scenario) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")
