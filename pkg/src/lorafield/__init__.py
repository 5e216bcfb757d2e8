"""lorafield: turn LoRaWAN field-measurement logs into calibrated
log-distance path loss models and coverage statistics."""

__version__ = "0.1.0"

from .geo import EARTH, EarthModel, GeoPoint, horizontal_distance, link_distance_3d
from .ingest import (DataRate, GatewayRecord, JoinError, JoinPolicy, LinkSample,
                     ParseError, Reception, Reject, Transmission, join_samples,
                     parse_gateways, parse_receptions, parse_samples,
                     parse_transmissions)
from .model import (DEFAULT_SF_TABLE, DegenerateFitError, FitDiagnostics,
                    PathLossModel, ReceptionCurve, SfTable, SnrTrend, dr_to_sf,
                    fit_path_loss, fit_snr_trend, is_demodulable, mae,
                    predict_path_loss, reception_curve, reception_probability,
                    rmse, snr_threshold, standard_normal_cdf)
from .stats import (DistanceBins, EmpiricalCdf, GatewaySummary, boxplot_by_bin,
                    cdf, default_edges, per_gateway_summary,
                    threshold_margin_rate)
from .synth import (CampaignFiles, Scenario, fit_recovery_scenario, generate,
                    helikite_scenario, load_scenario, save_scenario, simulate)
