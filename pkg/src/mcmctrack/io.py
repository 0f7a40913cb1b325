"""File formats: scenario JSON, truth/frames/figure CSV, reports LDJSON,
and the run manifest.

Every data file carries a schema-version field in its header; reruns with
the same seed produce byte-identical data files. The manifest records
wall-clock timestamps and is therefore excluded from that guarantee; data
files reference it by name.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io as _io
import json
import math
import os
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, InputDataError
from .filters import DynamicsConfig, SensorModel
from .likelihoods import ClutterModel, uniform_clutter
from .simulate import MeasurementFrame, ScenarioConfig, SpawnEvent, TruthScan
from .tracker import TrackerReport

SCENARIO_SCHEMA = "mcmctrack.scenario.v1"
TRUTH_SCHEMA = "mcmctrack.truth.v1"
FRAMES_SCHEMA = "mcmctrack.frames.v1"
REPORT_SCHEMA = "mcmctrack.report.v1"
HISTORY_SCHEMA = "mcmctrack.history.v1"
SUMMARY_SCHEMA = "mcmctrack.summary.v1"
FIG_ESTIMATES_SCHEMA = "mcmctrack.fig-estimates.v1"
FIG_COUNTS_SCHEMA = "mcmctrack.fig-counts.v1"
MANIFEST_SCHEMA = "mcmctrack.manifest.v1"

MANIFEST_NAME = "manifest.json"
OUT_DIR_ENV = "MCMCTRACK_OUT"


def _require(payload: dict, key: str, path: str):
    if key not in payload:
        raise ConfigError(f"{path}.{key} is missing")
    return payload[key]


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "schema": SCENARIO_SCHEMA,
        "name": cfg.name,
        "seed": cfg.seed,
        "duration_s": cfg.duration,
        "scan_interval_s": cfg.scan_interval,
        "objects": [[float(v) for v in s] for s in cfg.objects],
        "spawn_events": [
            {
                "time_s": ev.time,
                "parent_index": ev.parent_index,
                "fragment_count": ev.fragment_count,
                "velocity_std_kmps": ev.velocity_std,
            }
            for ev in cfg.spawn_events
        ],
        "sensor": {
            "origin_km": [float(v) for v in cfg.sensor.origin],
            "boresight_angle_rad": cfg.sensor.boresight_angle,
            "fov_half_angle_rad": cfg.sensor.fov_half_angle,
            "noise_cov_km2": [[float(v) for v in row] for row in cfg.sensor.r],
            "p_d": cfg.sensor.p_d,
            "max_range_km": cfg.sensor.max_range,
        },
        "clutter": {
            "density_per_km2": cfg.clutter.density_value,
            "expected_count": cfg.clutter.expected_count,
        },
        "dynamics": {
            "mu_km3_s2": cfg.dynamics.mu,
            "q": cfg.dynamics.q,
            "integrator_substeps": cfg.dynamics.integrator_substeps,
        },
        "initial_position_std_km": cfg.initial_position_std_km,
        "initial_velocity_std_kmps": cfg.initial_velocity_std_kmps,
    }


def scenario_from_dict(payload: dict) -> ScenarioConfig:
    if payload.get("schema") != SCENARIO_SCHEMA:
        raise ConfigError(f"schema must be {SCENARIO_SCHEMA}")
    sensor_d = _require(payload, "sensor", "scenario")
    try:
        sensor = SensorModel(
            origin=np.asarray(_require(sensor_d, "origin_km", "scenario.sensor"), dtype=float),
            boresight_angle=float(_require(sensor_d, "boresight_angle_rad", "scenario.sensor")),
            fov_half_angle=float(_require(sensor_d, "fov_half_angle_rad", "scenario.sensor")),
            r=np.asarray(_require(sensor_d, "noise_cov_km2", "scenario.sensor"), dtype=float),
            p_d=float(_require(sensor_d, "p_d", "scenario.sensor")),
            max_range=float(sensor_d.get("max_range_km", 1.0e5)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario.sensor: {exc}") from exc
    clutter_d = payload.get("clutter", {})
    density = clutter_d.get("density_per_km2")
    expected = float(clutter_d.get("expected_count", 0.0))
    clutter = (
        uniform_clutter(sensor, expected)
        if density is None
        else ClutterModel(float(density), expected)
    )
    dyn_d = payload.get("dynamics", {})
    dynamics = DynamicsConfig(
        mu=float(dyn_d.get("mu_km3_s2", 398600.4418)),
        dt=float(_require(payload, "scan_interval_s", "scenario")),
        q=float(dyn_d.get("q", 0.0)),
        integrator_substeps=int(dyn_d.get("integrator_substeps", 16)),
    )
    spawns = []
    for i, ev in enumerate(payload.get("spawn_events", [])):
        spawns.append(
            SpawnEvent(
                time=float(_require(ev, "time_s", f"scenario.spawn_events[{i}]")),
                parent_index=int(_require(ev, "parent_index", f"scenario.spawn_events[{i}]")),
                fragment_count=int(_require(ev, "fragment_count", f"scenario.spawn_events[{i}]")),
                velocity_std=float(_require(ev, "velocity_std_kmps", f"scenario.spawn_events[{i}]")),
            )
        )
    objects = [np.asarray(row, dtype=float) for row in _require(payload, "objects", "scenario")]
    return ScenarioConfig(
        objects=objects,
        sensor=sensor,
        clutter=clutter,
        dynamics=dynamics,
        duration=float(_require(payload, "duration_s", "scenario")),
        scan_interval=float(_require(payload, "scan_interval_s", "scenario")),
        spawn_events=spawns,
        seed=int(payload.get("seed", 0)),
        name=str(payload.get("name", "custom")),
        initial_position_std_km=float(payload.get("initial_position_std_km", 2.0)),
        initial_velocity_std_kmps=float(payload.get("initial_velocity_std_kmps", 0.05)),
    )


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise InputDataError(f"scenario file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file is not valid JSON: {exc}") from exc
    return scenario_from_dict(payload)


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(cfg), indent=2) + "\n")


def _float_repr(v: float) -> str:
    return repr(float(v))


def write_truth_csv(truth: Sequence[TruthScan], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={TRUTH_SCHEMA} manifest={MANIFEST_NAME}\n")
        writer = csv.writer(fh)
        writer.writerow(["time_s", "object_id", "x_km", "y_km", "vx_kmps", "vy_kmps"])
        for scan in truth:
            for oid, s in scan.objects:
                writer.writerow([_float_repr(scan.time), oid, *(_float_repr(v) for v in s)])


def read_truth_csv(path: str | Path) -> list[TruthScan]:
    path = Path(path)
    if not path.exists():
        raise InputDataError(f"truth file not found: {path}")
    scans: dict[float, list[tuple[str, np.ndarray]]] = {}
    with open(path, newline="") as fh:
        rows = [r for r in fh if not r.startswith("#")]
    reader = csv.DictReader(_io.StringIO("".join(rows)))
    for row in reader:
        try:
            t = float(row["time_s"])
            state = np.array(
                [float(row["x_km"]), float(row["y_km"]), float(row["vx_kmps"]), float(row["vy_kmps"])]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputDataError(f"bad truth row {row}: {exc}") from exc
        scans.setdefault(t, []).append((row["object_id"], state))
    return [TruthScan(time=t, objects=tuple(scans[t])) for t in sorted(scans)]


def write_frames_csv(frames: Sequence[MeasurementFrame], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={FRAMES_SCHEMA} manifest={MANIFEST_NAME}\n")
        writer = csv.writer(fh)
        writer.writerow(["time_s", "return_x_km", "return_y_km", "truth_tag"])
        for frame in frames:
            tags = frame.truth_tags or [""] * frame.n_returns
            for z, tag in zip(frame.returns, tags):
                writer.writerow([_float_repr(frame.time), _float_repr(z[0]), _float_repr(z[1]), tag])
            if frame.n_returns == 0:
                writer.writerow([_float_repr(frame.time), "", "", "__empty__"])


def read_frames_csv(path: str | Path) -> list[MeasurementFrame]:
    path = Path(path)
    if not path.exists():
        raise InputDataError(f"frames file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in fh if not r.startswith("#")]
    reader = csv.DictReader(_io.StringIO("".join(rows)))
    by_time: dict[float, list[tuple[np.ndarray, str]]] = {}
    for row in reader:
        try:
            t = float(row["time_s"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputDataError(f"bad frame row {row}: {exc}") from exc
        if row.get("truth_tag") == "__empty__":
            by_time.setdefault(t, [])
            continue
        try:
            z = np.array([float(row["return_x_km"]), float(row["return_y_km"])])
        except (TypeError, ValueError) as exc:
            raise InputDataError(f"bad frame row {row}: {exc}") from exc
        by_time.setdefault(t, []).append((z, row.get("truth_tag", "")))
    frames = []
    for t in sorted(by_time):
        entries = by_time[t]
        returns = np.array([z for z, _ in entries]).reshape(-1, 2)
        tags = tuple(tag for _, tag in entries)
        frames.append(MeasurementFrame(time=t, returns=returns, truth_tags=tags))
    return frames


def report_to_dict(report: TrackerReport) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "scan": report.scan,
        "time_s": report.time,
        "top_hypothesis_id": report.top_hypothesis_id,
        "estimated_count": report.estimated_count,
        "n_hypotheses": report.n_hypotheses,
        "weight_entropy": report.weight_entropy,
        "hypothesis_count_bound": str(report.hypothesis_count_bound),
        "degenerate": report.degenerate,
        "alpha_used": report.alpha_used,
        "beta_used": report.beta_used,
        "estimates": [
            {
                "label": label,
                "x_km": float(mean[0]),
                "y_km": float(mean[1]),
                "vx_kmps": float(mean[2]),
                "vy_kmps": float(mean[3]),
                "covariance": [[float(v) for v in row] for row in cov],
            }
            for label, mean, cov in report.estimates
        ],
    }


def write_reports_ldjson(reports: Sequence[TrackerReport], path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(
            {"schema": REPORT_SCHEMA + "-header", "manifest": MANIFEST_NAME},
            sort_keys=True,
        ) + "\n")
        for report in reports:
            fh.write(json.dumps(report_to_dict(report), sort_keys=True) + "\n")


def read_reports_ldjson(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise InputDataError(f"reports file not found: {path}")
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            schema = record.get("schema")
            if schema == REPORT_SCHEMA + "-header":
                continue
            if schema != REPORT_SCHEMA:
                raise InputDataError(f"unexpected report schema {schema!r}")
            out.append(record)
    return out


def write_history_ldjson(history: Sequence[tuple[int, Sequence]], path: str | Path) -> None:
    """Full per-scan hypothesis history (weights, parents, track states);
    intended for small runs."""
    with open(path, "w") as fh:
        fh.write(json.dumps(
            {"schema": HISTORY_SCHEMA + "-header", "manifest": MANIFEST_NAME},
            sort_keys=True,
        ) + "\n")
        for scan, hypotheses in history:
            for h in hypotheses:
                record = {
                    "schema": HISTORY_SCHEMA,
                    "scan": scan,
                    "id": h.id,
                    "parent_id": h.parent_id,
                    "weight": h.weight,
                    "tracks": [
                        {
                            "label": t.label,
                            "state": [float(v) for v in t.mean],
                            "covariance": [[float(v) for v in row] for row in t.covariance],
                        }
                        for t in h.tracks
                    ],
                }
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def write_manifest(out_dir: str | Path, payload: dict) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / MANIFEST_NAME
    record = {
        "schema": MANIFEST_SCHEMA,
        "tool_version": __version__,
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        **payload,
    }
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return path


def finalize_manifest(out_dir: str | Path) -> None:
    path = Path(out_dir) / MANIFEST_NAME
    record = json.loads(path.read_text())
    record["finished_utc"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def write_fig_estimates_csv(
    reports: Sequence[dict],
    truth: Sequence[TruthScan] | None,
    path: str | Path,
) -> None:
    """Per-scan truth-vs-estimate position table."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={FIG_ESTIMATES_SCHEMA} manifest={MANIFEST_NAME}\n")
        writer = csv.writer(fh)
        writer.writerow(["time_s", "kind", "id", "x_km", "y_km"])
        truth_by_time = {scan.time: scan for scan in truth or []}
        for record in reports:
            t = record["time_s"]
            scan = truth_by_time.get(t)
            if scan is not None:
                for oid, s in scan.objects:
                    writer.writerow([_float_repr(t), "truth", oid, _float_repr(s[0]), _float_repr(s[1])])
            for est in record["estimates"]:
                writer.writerow(
                    [_float_repr(t), "estimate", est["label"], _float_repr(est["x_km"]), _float_repr(est["y_km"])]
                )


def write_fig_counts_csv(reports: Sequence[dict], path: str | Path) -> None:
    """Per-scan hypothesis-count-bound table (decimal strings)."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={FIG_COUNTS_SCHEMA} manifest={MANIFEST_NAME}\n")
        writer = csv.writer(fh)
        writer.writerow(["time_s", "hypothesis_count_bound"])
        for record in reports:
            writer.writerow([_float_repr(record["time_s"]), record["hypothesis_count_bound"]])


def summarize_run(
    reports: Sequence[dict], truth: Sequence[TruthScan] | None
) -> dict:
    """Cardinality-error time series plus top-hypothesis position RMSE
    against truth (nearest-estimate matching per truth object)."""
    truth_by_time = {scan.time: scan for scan in truth or []}
    scans = []
    for record in reports:
        t = record["time_s"]
        entry: dict = {
            "time_s": t,
            "estimated_count": record["estimated_count"],
            "degenerate": record["degenerate"],
        }
        scan = truth_by_time.get(t)
        if scan is not None:
            entry["truth_count"] = scan.count
            entry["cardinality_error"] = record["estimated_count"] - scan.count
            if record["estimates"] and scan.count:
                est = np.array([[e["x_km"], e["y_km"]] for e in record["estimates"]])
                errs = []
                for _, s in scan.objects:
                    d = np.linalg.norm(est - s[:2], axis=1)
                    errs.append(float(d.min()) ** 2)
                entry["position_rmse_km"] = math.sqrt(sum(errs) / len(errs))
        scans.append(entry)
    out = {"schema": SUMMARY_SCHEMA, "manifest": MANIFEST_NAME, "scans": scans}
    if scans:
        out["final_estimated_count"] = scans[-1]["estimated_count"]
        if "truth_count" in scans[-1]:
            out["final_truth_count"] = scans[-1]["truth_count"]
    return out


def default_out_dir(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return Path(env)
    return Path("mcmctrack-out")
