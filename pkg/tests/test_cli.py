import json
import re

import pytest

from lorafield.cli import main
from lorafield.synth import fit_recovery_scenario, helikite_scenario, save_scenario

SAMPLES_HEADER = ("packet_id,gateway_id,timestamp_utc,distance_m,rssi_dbm,"
                  "snr_db,sf,path_loss_db\n")

TWO_POINT_SAMPLES = (SAMPLES_HEADER +
                     "0,LW1,2024-08-24T14:00:00.000Z,1.0,-20.0,5.0,10,40.0\n"
                     "1,LW1,2024-08-24T14:00:02.500Z,10.0,-40.0,4.0,10,60.0\n")

TX_CSV = ("packet_id,timestamp_utc,lat_deg,lon_deg,alt_m,data_rate,tx_power_dbm\n"
          "0,2024-08-24T14:00:00.000Z,35.7275,-78.6960,150.0,DR0,20.0\n"
          "1,2024-08-24T14:00:02.500Z,35.7276,-78.6961,150.0,DR1,20.0\n")
RX_CSV = ("packet_id,gateway_id,timestamp_utc,rssi_dbm,snr_db,sf,frequency_hz,"
          "bandwidth_hz,channel,rf_chain\n"
          "0,LW1,2024-08-24T14:00:00.000Z,-100.0,5.0,10,902300000,125000,0,0\n"
          "1,LW1,2024-08-24T14:00:02.500Z,-101.0,4.5,9,902500000,125000,1,0\n")
GW_CSV = ("gateway_id,lat_deg,lon_deg,alt_m,environment_tag\n"
          "LW1,35.7281,-78.6963,5.0,rural\n")


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == "lorafield 0.1.0"


def test_join_writes_samples_and_rejects(tmp_path, capsys):
    tx = write(tmp_path / "tx.csv", TX_CSV)
    rx = write(tmp_path / "rx.csv", RX_CSV)
    gw = write(tmp_path / "gw.csv", GW_CSV)
    rc = main(["join", "--tx", tx, "--rx", rx, "--gw", gw,
               "--out-dir", str(tmp_path / "out")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "joined 2 samples, 0 rejects" in out
    samples = (tmp_path / "out" / "samples.csv").read_text()
    assert samples.startswith(SAMPLES_HEADER)
    assert len(samples.splitlines()) == 3
    assert (tmp_path / "out" / "rejects.csv").exists()


def test_join_unknown_gateway_fails(tmp_path, capsys):
    tx = write(tmp_path / "tx.csv", TX_CSV)
    rx = write(tmp_path / "rx.csv", RX_CSV.replace("LW1", "ZZ1"))
    gw = write(tmp_path / "gw.csv", GW_CSV)
    rc = main(["join", "--tx", tx, "--rx", rx, "--gw", gw,
               "--out-dir", str(tmp_path / "out")])
    assert rc == 1
    assert "ZZ1" in capsys.readouterr().err


def test_fit_two_point_dataset(tmp_path, capsys):
    samples = write(tmp_path / "samples.csv", TWO_POINT_SAMPLES)
    rc = main(["fit", "--samples", samples, "--out-dir", str(tmp_path)])
    assert rc == 0
    doc = json.loads((tmp_path / "model.json").read_text())
    assert doc["intercept_a_db"] == pytest.approx(40.0, abs=1e-9)
    assert doc["exponent_n"] == pytest.approx(2.0, abs=1e-9)
    assert doc["sigma_db"] == 0.0
    assert doc["sample_count"] == 2
    out = capsys.readouterr().out
    assert "exponent_n=2.000000" in out


def test_fit_missing_file(tmp_path, capsys):
    rc = main(["fit", "--samples", str(tmp_path / "nope.csv"),
               "--out-dir", str(tmp_path)])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_fit_malformed_samples_reports_line(tmp_path, capsys):
    samples = write(tmp_path / "samples.csv",
                    SAMPLES_HEADER + "0,LW1,2024-08-24T14:00:00.000Z,oops,-20.0,5.0,10,40.0\n")
    rc = main(["fit", "--samples", samples, "--out-dir", str(tmp_path)])
    assert rc == 1
    assert "line 2" in capsys.readouterr().err


def test_report_on_empty_samples_fails(tmp_path, capsys):
    samples = write(tmp_path / "samples.csv", SAMPLES_HEADER)
    rc = main(["report", "--samples", samples, "--out-dir", str(tmp_path / "out")])
    assert rc == 1
    assert "no samples" in capsys.readouterr().err


def full_pipeline(tmp_path, extra_report_args=()):
    scenario = helikite_scenario(seed=6, duration_s=600.0)
    scen = tmp_path / "scenario.json"
    save_scenario(scen, scenario)
    out = tmp_path / "out"
    assert main(["synth", "--scenario", str(scen), "--out-dir", str(out)]) == 0
    assert main(["join", "--tx", str(out / "transmissions.csv"),
                 "--rx", str(out / "receptions.csv"),
                 "--gw", str(out / "gateways.csv"), "--out-dir", str(out)]) == 0
    assert main(["fit", "--samples", str(out / "samples.csv"),
                 "--out-dir", str(out)]) == 0
    assert main(["report", "--samples", str(out / "samples.csv"),
                 "--model", str(out / "model.json"), "--out-dir", str(out),
                 "--bin-width-m", "2000", *extra_report_args]) == 0
    return out


def test_full_pipeline_outputs(tmp_path):
    out = full_pipeline(tmp_path)
    for name in ("transmissions.csv", "receptions.csv", "gateways.csv",
                 "samples.csv", "rejects.csv", "model.json", "cdf.csv",
                 "boxplot.csv", "margin.csv", "snr_vs_distance.csv",
                 "reception_curves.csv", "path_loss_fit.csv"):
        assert (out / name).exists(), name
    curves = (out / "reception_curves.csv").read_text().splitlines()
    assert curves[0] == "sf,distance_m,p_recv"
    assert len(curves) > 1
    sfs = {int(line.split(",")[0]) for line in curves[1:]}
    assert sfs == {7, 8, 9, 10}
    margin = (out / "margin.csv").read_text().splitlines()
    assert margin[0] == "bin_lo_m,bin_hi_m,sf,n,frac_above_threshold"
    for line in margin[1:]:
        frac = float(line.split(",")[4])
        assert 0.0 <= frac <= 1.0


def test_report_per_sf_trend_mode(tmp_path):
    out = full_pipeline(tmp_path, extra_report_args=("--trend-mode", "per-sf"))
    curves = (out / "reception_curves.csv").read_text().splitlines()
    assert len(curves) > 1


def test_synth_seed_override(tmp_path):
    scen = tmp_path / "scenario.json"
    save_scenario(scen, fit_recovery_scenario(seed=1, packets=40))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "--scenario", str(scen), "--out-dir", str(a)]) == 0
    assert main(["synth", "--scenario", str(scen), "--out-dir", str(b),
                 "--seed", "2"]) == 0
    assert ((a / "transmissions.csv").read_bytes()
            == (b / "transmissions.csv").read_bytes())
    assert ((a / "receptions.csv").read_bytes()
            != (b / "receptions.csv").read_bytes())


def test_roundtrip_recovers_truth(tmp_path, capsys):
    scen = tmp_path / "scenario.json"
    save_scenario(scen, fit_recovery_scenario(seed=42, packets=5000))
    rc = main(["roundtrip", "--scenario", str(scen), "--out-dir", str(tmp_path / "rt")])
    assert rc == 0
    out = capsys.readouterr().out
    match = re.search(r"delta:\s+A=([+-][\d.]+)\s+n=([+-][\d.]+)\s+sigma=([+-][\d.]+)", out)
    assert match, out
    assert abs(float(match.group(2))) <= 0.05
    for name in ("transmissions.csv", "receptions.csv", "gateways.csv",
                 "samples.csv", "rejects.csv", "model.json"):
        assert (tmp_path / "rt" / name).exists()


def test_reruns_are_byte_identical(tmp_path):
    scen = tmp_path / "scenario.json"
    save_scenario(scen, fit_recovery_scenario(seed=5, packets=200))
    d1, d2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["roundtrip", "--scenario", str(scen), "--out-dir", str(d1)]) == 0
    assert main(["roundtrip", "--scenario", str(scen), "--out-dir", str(d2)]) == 0
    names = sorted(p.name for p in d1.iterdir())
    assert names == sorted(p.name for p in d2.iterdir())
    for name in names:
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name
