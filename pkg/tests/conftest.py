"""Shared test fixtures and builders."""

from datetime import datetime, timedelta, timezone

import pytest

from lorafield.geo import GeoPoint
from lorafield.ingest import (DataRate, GatewayRecord, LinkSample, Reception,
                              Transmission)

T0 = datetime(2024, 8, 24, 14, 0, 0, tzinfo=timezone.utc)


def at(seconds: float) -> datetime:
    return T0 + timedelta(seconds=seconds)


def make_tx(packet_id=0, t=0.0, lat=35.7275, lon=-78.6960, alt=0.0,
            dr=DataRate.DR0, power=20.0) -> Transmission:
    return Transmission(packet_id, at(t), GeoPoint(lat, lon, alt), dr, power)


def make_rx(packet_id=0, gateway_id="LW1", t=0.0, rssi=-100.0, snr=5.0,
            sf=10, freq=902_300_000.0, bw=125_000.0, channel=0,
            rf_chain=0) -> Reception:
    return Reception(packet_id, gateway_id, at(t), rssi, snr, sf, freq, bw,
                     channel, rf_chain)


def make_gw(gateway_id="LW1", lat=35.7281, lon=-78.6963, alt=5.0,
            tag="rural") -> GatewayRecord:
    return GatewayRecord(gateway_id, GeoPoint(lat, lon, alt), tag)


def make_sample(packet_id=0, gateway_id="LW1", distance=100.0, rssi=-100.0,
                snr=5.0, sf=10, power=20.0, path_loss=None, t=0.0) -> LinkSample:
    if path_loss is None:
        path_loss = power - rssi
    return LinkSample(packet_id, gateway_id, distance, rssi, snr, sf, power,
                      path_loss, at(t))


def samples_on_line(distances, intercept_a_db, exponent_n, sf=10):
    """Noiseless samples lying exactly on a log-distance line."""
    import math
    out = []
    for i, d in enumerate(distances):
        pl = intercept_a_db + 10.0 * exponent_n * math.log10(d)
        out.append(make_sample(packet_id=i, distance=d, rssi=20.0 - pl,
                               sf=sf, path_loss=pl, t=2.5 * i))
    return out


@pytest.fixture
def tmp_csv(tmp_path):
    """Write CSV text to a temp file and return its path."""
    def write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return write
