import io
import random
from datetime import timezone

import pytest

from conftest import at, make_gw, make_rx, make_tx
from lorafield.geo import GeoPoint
from lorafield.ingest import (DataRate, JoinError, JoinPolicy, ParseError,
                              format_timestamp, join_samples, parse_gateways,
                              parse_receptions, parse_samples, parse_timestamp,
                              parse_transmissions, rejects_to_csv,
                              samples_to_csv, transmissions_to_csv)

TX_HEADER = "packet_id,timestamp_utc,lat_deg,lon_deg,alt_m,data_rate,tx_power_dbm\n"
RX_HEADER = ("packet_id,gateway_id,timestamp_utc,rssi_dbm,snr_db,sf,"
             "frequency_hz,bandwidth_hz,channel,rf_chain\n")
GW_HEADER = "gateway_id,lat_deg,lon_deg,alt_m,environment_tag\n"


class TestTimestamps:
    def test_parse_z_suffix(self):
        dt = parse_timestamp("2024-08-24T14:03:07.250Z")
        assert dt.tzinfo is not None
        assert dt.microsecond == 250_000

    def test_parse_offset_and_naive(self):
        dt = parse_timestamp("2024-08-24T10:03:07.250-04:00")
        assert dt == parse_timestamp("2024-08-24T14:03:07.250Z")
        naive = parse_timestamp("2024-08-24T14:03:07.250")
        assert naive.tzinfo == timezone.utc

    def test_format_round_trip(self):
        text = "2024-08-24T14:03:07.250Z"
        assert format_timestamp(parse_timestamp(text)) == text


class TestParseTransmissions:
    def test_single_row(self):
        src = io.StringIO(TX_HEADER +
                          "0,2024-08-24T14:03:07.250Z,35.7275,-78.6960,150.0,DR0,20.0\n")
        txs = parse_transmissions(src)
        assert len(txs) == 1
        tx = txs[0]
        assert tx.packet_id == 0
        assert tx.data_rate is DataRate.DR0
        assert tx.position == GeoPoint(35.7275, -78.6960, 150.0)
        assert tx.tx_power_dbm == 20.0

    def test_header_only_gives_empty_list(self):
        assert parse_transmissions(io.StringIO(TX_HEADER)) == []

    def test_unknown_data_rate_reports_line(self):
        src = io.StringIO(TX_HEADER +
                          "0,2024-08-24T14:03:07.250Z,35.0,-78.0,0,DR0,20\n"
                          "1,2024-08-24T14:03:09.750Z,35.0,-78.0,0,DR7,20\n")
        with pytest.raises(ParseError, match="line 3.*DR7"):
            parse_transmissions(src)

    def test_duplicate_packet_id(self):
        src = io.StringIO(TX_HEADER +
                          "5,2024-08-24T14:03:07.250Z,35.0,-78.0,0,DR0,20\n"
                          "5,2024-08-24T14:03:09.750Z,35.0,-78.0,0,DR1,20\n")
        with pytest.raises(ParseError, match="duplicate packet_id 5"):
            parse_transmissions(src)

    def test_bad_header(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_transmissions(io.StringIO("a,b,c\n"))

    def test_wrong_field_count(self):
        src = io.StringIO(TX_HEADER + "0,2024-08-24T14:03:07.250Z,35.0\n")
        with pytest.raises(ParseError, match="line 2"):
            parse_transmissions(src)

    def test_bad_latitude(self):
        src = io.StringIO(TX_HEADER +
                          "0,2024-08-24T14:03:07.250Z,95.0,-78.0,0,DR0,20\n")
        with pytest.raises(ParseError, match="line 2"):
            parse_transmissions(src)

    def test_negative_packet_id(self):
        src = io.StringIO(TX_HEADER +
                          "-1,2024-08-24T14:03:07.250Z,35.0,-78.0,0,DR0,20\n")
        with pytest.raises(ParseError, match="non-negative"):
            parse_transmissions(src)

    def test_from_path(self, tmp_csv):
        path = tmp_csv("tx.csv", TX_HEADER +
                       "0,2024-08-24T14:03:07.250Z,35.0,-78.0,0,DR3,20\n")
        assert parse_transmissions(path)[0].data_rate is DataRate.DR3

    def test_from_byte_stream(self):
        data = (TX_HEADER + "0,2024-08-24T14:03:07.250Z,35.0,-78.0,0,DR3,20\n")
        txs = parse_transmissions(io.BytesIO(data.encode("utf-8")))
        assert txs[0].data_rate is DataRate.DR3


class TestParseReceptions:
    GOOD = "7,LW1,2024-08-24T14:03:07.250Z,-100.0,5.25,10,902300000,125000,0,0\n"

    def test_single_row(self):
        rxs = parse_receptions(io.StringIO(RX_HEADER + self.GOOD))
        assert len(rxs) == 1
        rx = rxs[0]
        assert rx.packet_id == 7 and rx.gateway_id == "LW1"
        assert rx.rssi_dbm == -100.0 and rx.snr_db == 5.25 and rx.sf == 10

    def test_empty_packet_id_becomes_none(self):
        row = self.GOOD.replace("7,", ",", 1)
        rx = parse_receptions(io.StringIO(RX_HEADER + row))[0]
        assert rx.packet_id is None

    def test_missing_rssi_rejected(self):
        row = "7,LW1,2024-08-24T14:03:07.250Z,,5.25,10,902300000,125000,0,0\n"
        with pytest.raises(ParseError, match="line 2.*rssi_dbm"):
            parse_receptions(io.StringIO(RX_HEADER + row))

    def test_missing_snr_rejected(self):
        row = "7,LW1,2024-08-24T14:03:07.250Z,-100.0,,10,902300000,125000,0,0\n"
        with pytest.raises(ParseError, match="snr_db"):
            parse_receptions(io.StringIO(RX_HEADER + row))

    def test_sf_out_of_range(self):
        row = self.GOOD.replace(",10,", ",13,")
        with pytest.raises(ParseError, match="sf must be in"):
            parse_receptions(io.StringIO(RX_HEADER + row))


class TestParseGateways:
    def test_registry(self):
        src = io.StringIO(GW_HEADER +
                          "LW1,35.7281,-78.6963,5.0,rural\n"
                          "CC2,35.7713,-78.6753,30.0,urban\n")
        reg = parse_gateways(src)
        assert set(reg) == {"LW1", "CC2"}
        assert reg["CC2"].environment_tag == "urban"

    def test_duplicate_gateway(self):
        src = io.StringIO(GW_HEADER +
                          "LW1,35.0,-78.0,0,rural\nLW1,36.0,-78.0,0,rural\n")
        with pytest.raises(ParseError, match="duplicate gateway_id"):
            parse_gateways(src)


class TestJoin:
    def registry(self):
        return {"LW1": make_gw("LW1"), "LW2": make_gw("LW2", lat=35.7339, lon=-78.6899)}

    def test_one_packet_two_gateways(self):
        txs = [make_tx(packet_id=7)]
        rxs = [make_rx(packet_id=7, gateway_id="LW1"),
               make_rx(packet_id=7, gateway_id="LW2")]
        samples, rejects = join_samples(txs, rxs, self.registry())
        assert len(samples) == 2 and not rejects
        assert [s.gateway_id for s in samples] == ["LW1", "LW2"]

    def test_path_loss_arithmetic(self):
        samples, _ = join_samples([make_tx(packet_id=0, power=20.0)],
                                  [make_rx(packet_id=0, rssi=-100.0)],
                                  self.registry())
        assert samples[0].path_loss_db == 120.0
        assert samples[0].path_loss_db + samples[0].rssi_dbm == samples[0].tx_power_dbm

    def test_fallback_by_timestamp(self):
        txs = [make_tx(packet_id=0, t=0.0)]
        rxs = [make_rx(packet_id=None, t=1.0)]
        samples, rejects = join_samples(txs, rxs, self.registry())
        assert len(samples) == 1 and not rejects
        assert samples[0].packet_id == 0

    def test_fallback_window_boundary_inclusive(self):
        txs = [make_tx(packet_id=0, t=0.0)]
        samples, rejects = join_samples(txs, [make_rx(packet_id=None, t=1.25)],
                                        self.registry())
        assert len(samples) == 1
        samples, rejects = join_samples(txs, [make_rx(packet_id=None, t=1.26)],
                                        self.registry())
        assert not samples and rejects[0].reason == "no_match"

    def test_fallback_ambiguous(self):
        txs = [make_tx(packet_id=0, t=0.0), make_tx(packet_id=1, t=2.5)]
        samples, rejects = join_samples(txs, [make_rx(packet_id=None, t=1.25)],
                                        self.registry())
        assert not samples
        assert rejects[0].reason == "ambiguous"

    def test_fallback_prefers_nearest(self):
        txs = [make_tx(packet_id=0, t=0.0), make_tx(packet_id=1, t=2.5)]
        samples, _ = join_samples(txs, [make_rx(packet_id=None, t=1.5)],
                                  self.registry())
        assert samples[0].packet_id == 1

    def test_unknown_packet_id_rejected(self):
        samples, rejects = join_samples([make_tx(packet_id=0)],
                                        [make_rx(packet_id=99)], self.registry())
        assert not samples and rejects[0].reason == "unknown_packet_id"

    def test_unknown_gateway_is_error(self):
        with pytest.raises(JoinError, match="XX9"):
            join_samples([make_tx()], [make_rx(gateway_id="XX9")], self.registry())

    def test_duplicate_keeps_highest_snr(self):
        txs = [make_tx(packet_id=0)]
        rxs = [make_rx(packet_id=0, snr=3.0, t=0.0),
               make_rx(packet_id=0, snr=7.5, t=0.1),
               make_rx(packet_id=0, snr=5.0, t=0.2)]
        samples, rejects = join_samples(txs, rxs, self.registry())
        assert len(samples) == 1 and samples[0].snr_db == 7.5
        assert sorted(r.reason for r in rejects) == ["duplicate", "duplicate"]

    def test_distance_clamped_to_one_meter(self):
        gw = make_gw("LW1", lat=35.7275, lon=-78.6960, alt=0.0)
        txs = [make_tx(packet_id=0, lat=35.7275, lon=-78.6960, alt=0.0)]
        samples, _ = join_samples(txs, [make_rx(packet_id=0)], {"LW1": gw})
        assert samples[0].distance_m == 1.0

    def test_custom_policy_window(self):
        policy = JoinPolicy(fallback_window_s=0.5)
        txs = [make_tx(packet_id=0, t=0.0)]
        _, rejects = join_samples(txs, [make_rx(packet_id=None, t=1.0)],
                                  self.registry(), policy)
        assert rejects[0].reason == "no_match"

    def test_multiplicity_and_ordering_randomized(self):
        rng = random.Random(42)
        txs = [make_tx(packet_id=i, t=2.5 * i) for i in range(40)]
        rxs = []
        for i in range(200):
            gateway = rng.choice(["LW1", "LW2"])
            if rng.random() < 0.2:
                rxs.append(make_rx(packet_id=None, gateway_id=gateway,
                                   t=rng.uniform(-5, 110), snr=rng.uniform(-20, 10)))
            else:
                rxs.append(make_rx(packet_id=rng.randrange(50), gateway_id=gateway,
                                   t=2.5 * i, snr=rng.uniform(-20, 10)))
        samples, rejects = join_samples(txs, rxs, self.registry())
        assert len(samples) + len(rejects) == len(rxs)
        keys = [(s.timestamp, s.gateway_id) for s in samples]
        assert keys == sorted(keys)
        for s in samples:
            assert s.path_loss_db == s.tx_power_dbm - s.rssi_dbm
        # identical inputs give identical output
        again = join_samples(txs, rxs, self.registry())
        assert again == (samples, rejects)


class TestCsvRoundTrips:
    def test_samples_csv_round_trip(self):
        txs = [make_tx(packet_id=i, t=2.5 * i, alt=100.0 + i) for i in range(5)]
        rxs = [make_rx(packet_id=i, t=2.5 * i, rssi=-90.0 - i, snr=3.3 - i)
               for i in range(5)]
        samples, _ = join_samples(txs, rxs, {"LW1": make_gw("LW1")})
        parsed = parse_samples(io.StringIO(samples_to_csv(samples)))
        assert parsed == samples

    def test_transmissions_csv_round_trip(self):
        txs = [make_tx(packet_id=3, t=1.25, alt=150.0)]
        parsed = parse_transmissions(io.StringIO(transmissions_to_csv(txs)))
        assert parsed[0].packet_id == 3
        assert parsed[0].timestamp == at(1.25)
        assert parsed[0].position.alt_m == 150.0

    def test_rejects_csv_has_reasons(self):
        _, rejects = join_samples([make_tx(packet_id=0)], [make_rx(packet_id=9)],
                                  {"LW1": make_gw("LW1")})
        text = rejects_to_csv(rejects)
        assert "unknown_packet_id" in text
        assert text.splitlines()[0] == "packet_id,gateway_id,timestamp_utc,reason"
