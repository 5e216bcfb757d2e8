"""Command-line frontend: ingestion -> modeling -> statistics -> plot data.

Subcommands:

    join       transmissions + receptions + gateways -> samples.csv, rejects.csv
    fit        samples.csv -> model.json (log-distance fit + diagnostics)
    report     samples.csv -> tidy CSV tables behind the standard panels
    synth      scenario.json -> the three campaign CSVs
    roundtrip  scenario.json -> synth, join, fit; prints truth vs recovered

All outputs are plain CSV/JSON for external plotting tools. Re-running a
command on identical inputs (and seeds) rewrites byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .ingest import (JoinError, ParseError, join_samples, parse_gateways,
                     parse_receptions, parse_samples, parse_transmissions,
                     rejects_to_csv, samples_to_csv)
from .model import (DEFAULT_SF_TABLE, DegenerateFitError, fit_path_loss,
                    fit_snr_trend, model_from_dict, model_to_dict,
                    predict_path_loss, reception_curve)
from .stats import (boxplot_by_bin, default_edges, per_gateway_summary,
                    threshold_margin_rate)
from .synth import generate, load_scenario

DEFAULT_GRID_STEPS = 100


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_samples(path: str):
    samples = parse_samples(path)
    if not samples:
        raise ValueError(f"no samples in {path}")
    return samples


def cmd_join(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    txs = parse_transmissions(args.tx)
    rxs = parse_receptions(args.rx)
    gateways = parse_gateways(args.gw)
    samples, rejects = join_samples(txs, rxs, gateways)
    _write_text(out / "samples.csv", samples_to_csv(samples))
    _write_text(out / "rejects.csv", rejects_to_csv(rejects))
    print(f"joined {len(samples)} samples, {len(rejects)} rejects "
          f"from {len(txs)} transmissions and {len(rxs)} receptions")
    return 0


def _fit_and_save(samples, out: Path):
    model, diag = fit_path_loss(samples)
    doc = json.dumps(model_to_dict(model, diag), indent=2, sort_keys=True) + "\n"
    _write_text(out / "model.json", doc)
    return model, diag


def cmd_fit(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    samples = _load_samples(args.samples)
    model, diag = _fit_and_save(samples, out)
    print(f"intercept_a_db={model.intercept_a_db:.6f}")
    print(f"exponent_n={model.exponent_n:.6f}")
    print(f"sigma_db={model.sigma_db:.6f}")
    print(f"mae_db={diag.mae_db:.6f}")
    print(f"rmse_db={diag.rmse_db:.6f}")
    print(f"samples={diag.sample_count}")
    return 0


def _report_cdf_csv(samples) -> str:
    rows = []
    for gateway_id, summary in per_gateway_summary(samples).items():
        for metric, metric_cdf in (("rssi_dbm", summary.rssi_cdf),
                                   ("snr_db", summary.snr_cdf)):
            for value, prob in metric_cdf.steps():
                rows.append([gateway_id, metric, str(value), str(prob)])
    return _csv_text(["gateway_id", "metric", "value", "cum_prob"], rows)


def _report_boxplot_csv(samples, edges) -> str:
    bins = boxplot_by_bin(samples, edges)
    rows = []
    for (bin_idx, sf), g in bins.groups.items():
        lo, hi = bins.bin_bounds(bin_idx)
        rows.append([str(lo), str(hi), sf, g.count, str(g.min), str(g.q1),
                     str(g.median), str(g.q3), str(g.max), str(g.mean)])
    return _csv_text(["bin_lo_m", "bin_hi_m", "sf", "count", "min", "q1",
                      "median", "q3", "max", "mean"], rows)


def _report_margin_csv(samples, edges) -> str:
    rates = threshold_margin_rate(samples, edges)
    rows = []
    for (bin_idx, sf), rate in rates.items():
        lo, hi = edges[bin_idx], edges[bin_idx + 1]
        rows.append([str(lo), str(hi), sf, rate.count,
                     str(rate.frac_above_threshold)])
    return _csv_text(["bin_lo_m", "bin_hi_m", "sf", "n", "frac_above_threshold"],
                     rows)


def _report_snr_scatter_csv(samples) -> str:
    rows = [[str(s.distance_m), str(s.snr_db), s.sf,
             str(DEFAULT_SF_TABLE.threshold_db(s.sf))] for s in samples]
    return _csv_text(["distance_m", "snr_db", "sf", "threshold_db"], rows)


def _report_curves_csv(samples, args) -> str:
    distances = [s.distance_m for s in samples]
    d_min = args.grid_min_m if args.grid_min_m is not None else max(1.0, min(distances))
    d_max = args.grid_max_m if args.grid_max_m is not None else max(distances)
    rows = []
    sfs = sorted({s.sf for s in samples})
    if d_max > d_min:
        pooled = None
        if args.trend_mode == "pooled":
            pooled = fit_snr_trend(samples)
        for sf in sfs:
            if args.trend_mode == "per-sf":
                subset = [s for s in samples if s.sf == sf]
                try:
                    trend = fit_snr_trend(subset)
                except DegenerateFitError:
                    print(f"warning: too few distinct distances to fit SF{sf} "
                          "trend; skipping its curve", file=sys.stderr)
                    continue
            else:
                trend = pooled
            curve = reception_curve(trend, sf, d_min, d_max, args.grid_steps)
            rows.extend([sf, str(d), str(p)] for d, p in curve.points)
    else:
        print("warning: degenerate distance range, skipping reception curves",
              file=sys.stderr)
    return _csv_text(["sf", "distance_m", "p_recv"], rows)


def _report_path_loss_fit_csv(samples, model) -> str:
    rows = []
    for s in samples:
        predicted = predict_path_loss(model, s.distance_m)
        rows.append([str(s.distance_m), str(s.path_loss_db), str(predicted),
                     str(s.path_loss_db - predicted)])
    return _csv_text(["distance_m", "measured_db", "predicted_db", "residual_db"],
                     rows)


def cmd_report(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    samples = _load_samples(args.samples)
    edges = default_edges(max(s.distance_m for s in samples), args.bin_width_m)
    _write_text(out / "cdf.csv", _report_cdf_csv(samples))
    _write_text(out / "boxplot.csv", _report_boxplot_csv(samples, edges))
    _write_text(out / "margin.csv", _report_margin_csv(samples, edges))
    _write_text(out / "snr_vs_distance.csv", _report_snr_scatter_csv(samples))
    _write_text(out / "reception_curves.csv", _report_curves_csv(samples, args))
    written = ["cdf.csv", "boxplot.csv", "margin.csv", "snr_vs_distance.csv",
               "reception_curves.csv"]
    if args.model is not None:
        with open(args.model, encoding="utf-8") as fh:
            model = model_from_dict(json.load(fh))
        _write_text(out / "path_loss_fit.csv",
                    _report_path_loss_fit_csv(samples, model))
        written.append("path_loss_fit.csv")
    print(f"wrote {', '.join(written)} to {out}")
    return 0


def _load_scenario_with_seed(args: argparse.Namespace):
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    return scenario


def cmd_synth(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    scenario = _load_scenario_with_seed(args)
    files = generate(scenario)
    _write_text(out / "transmissions.csv", files.transmissions_csv)
    _write_text(out / "receptions.csv", files.receptions_csv)
    _write_text(out / "gateways.csv", files.gateways_csv)
    n_rx = files.receptions_csv.count("\n") - 1
    n_tx = files.transmissions_csv.count("\n") - 1
    print(f"generated {n_tx} transmissions, {n_rx} receptions "
          f"across {len(scenario.gateways)} gateways (seed={scenario.seed})")
    return 0


def cmd_roundtrip(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    scenario = _load_scenario_with_seed(args)
    files = generate(scenario)
    _write_text(out / "transmissions.csv", files.transmissions_csv)
    _write_text(out / "receptions.csv", files.receptions_csv)
    _write_text(out / "gateways.csv", files.gateways_csv)

    txs = parse_transmissions(out / "transmissions.csv")
    rxs = parse_receptions(out / "receptions.csv")
    gateways = parse_gateways(out / "gateways.csv")
    samples, rejects = join_samples(txs, rxs, gateways)
    if not samples:
        raise ValueError("synthetic campaign produced no joinable samples")
    _write_text(out / "samples.csv", samples_to_csv(samples))
    _write_text(out / "rejects.csv", rejects_to_csv(rejects))
    model, diag = _fit_and_save(samples, out)

    truth = scenario.channel
    print(f"truth:  A={truth.intercept_a_db:.6f} n={truth.exponent_n:.6f} "
          f"sigma={truth.sigma_db:.6f}")
    print(f"fitted: A={model.intercept_a_db:.6f} n={model.exponent_n:.6f} "
          f"sigma={model.sigma_db:.6f}")
    print(f"delta:  A={model.intercept_a_db - truth.intercept_a_db:+.6f} "
          f"n={model.exponent_n - truth.exponent_n:+.6f} "
          f"sigma={model.sigma_db - truth.sigma_db:+.6f}")
    print(f"mae_db={diag.mae_db:.6f} rmse_db={diag.rmse_db:.6f} "
          f"samples={diag.sample_count} rejects={len(rejects)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lorafield",
        description="LoRaWAN field-measurement analysis: link distances, "
                    "path loss fits, SF thresholds, coverage statistics.")
    parser.add_argument("--version", action="version",
                        version=f"lorafield {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("join", help="join receptions to transmissions")
    p.add_argument("--tx", required=True, help="transmissions.csv")
    p.add_argument("--rx", required=True, help="receptions.csv")
    p.add_argument("--gw", required=True, help="gateways.csv")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_join)

    p = sub.add_parser("fit", help="fit the log-distance path loss model")
    p.add_argument("--samples", required=True, help="samples.csv from join")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="emit plot-ready coverage statistics")
    p.add_argument("--samples", required=True, help="samples.csv from join")
    p.add_argument("--model", help="model.json from fit (adds path_loss_fit.csv)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--bin-width-m", type=float, default=500.0,
                   help="distance bin width in meters (default 500)")
    p.add_argument("--trend-mode", choices=["pooled", "per-sf"], default="pooled",
                   help="SNR trend for reception curves (default pooled)")
    p.add_argument("--grid-steps", type=int, default=DEFAULT_GRID_STEPS,
                   help="points per reception curve (default 100)")
    p.add_argument("--grid-min-m", type=float, default=None,
                   help="curve grid start in meters (default min distance)")
    p.add_argument("--grid-max-m", type=float, default=None,
                   help="curve grid end in meters (default max distance)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic campaign")
    p.add_argument("--scenario", required=True, help="scenario.json")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("roundtrip",
                       help="synth, join and fit; print truth vs recovered")
    p.add_argument("--scenario", required=True, help="scenario.json")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario seed")
    p.set_defaults(func=cmd_roundtrip)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, JoinError, DegenerateFitError, ValueError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
