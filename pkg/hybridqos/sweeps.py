"""
Experiment orchestration: sweep points, per-strategy CSVs, the run manifest and the
bound-versus-simulation validation report
"""

import csv
import importlib.metadata
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .calculus_bounds import BOUNDED_STRATEGIES, BoundQuery, backlog_bound, delay_bound
from .errors import (AllInfeasibleError, CensoredDelayError, EmptyDomainError, InsufficientTailError,
                     UnstableError)
from .geometry_channel import cell_edge_position
from .qos_engine import multi_link_select, select_link
from .scenario import Scenario, SweepAxis, scenario_to_dict, write_resolved
from .simulator import (SimConfig, SimSummary, backlog_threshold, delay_quantile, simulate,
                        summary_json, tail_decay_estimate, worker_count, write_trace_csv)
from .source import SourceSpec
from .strategies import ServiceLmgf, Strategy, build_service

logger = logging.getLogger(__name__)

AXIS_STEMS = {
    SweepAxis.PAVG_DBM: "rho_vs_pavg",
    SweepAxis.THETA: "rho_vs_theta",
    SweepAxis.POSITION_XY: "rho_vs_position",
    SweepAxis.N: "rho_vs_handover_n",
    SweepAxis.USERS: "rho_vs_users",
    SweepAxis.VERTICAL_DISTANCE: "rho_vs_vertical_distance",
    SweepAxis.LAMBDA: "delay_vs_lambda",
    SweepAxis.BETA: "delay_vs_beta",
}
DELAY_AXES = (SweepAxis.LAMBDA, SweepAxis.BETA)
DELAY_COLUMNS = ("q_bits", "d_frames", "d_ms", "c_bits_per_frame")
TOLERATED = (UnstableError, EmptyDomainError, AllInfeasibleError)
TAIL_THRESHOLDS = tuple(range(1, 7))
TAIL_LOAD = 0.98


@dataclass(frozen=True)
class RunOptions:
    quick: bool = False
    threads: Optional[int] = None

    def bound_query(self, scenario: Scenario) -> BoundQuery:
        if self.quick:
            return BoundQuery(scenario.analysis.epsilon, theta_points=100, c_points=16,
                              optimize_split=scenario.analysis.optimize_split)
        return BoundQuery(scenario.analysis.epsilon, optimize_split=scenario.analysis.optimize_split)

    def sim_config(self, scenario: Scenario, thresholds: Sequence[float] = (),
                   keep_trace: bool = False) -> SimConfig:
        spec = scenario.simulation
        frames, seeds, warmup = spec.frames, spec.seed_list(scenario.seed), spec.warmup
        if self.quick:
            frames = max(frames // 10, 2)
            seeds = seeds[:3]
            warmup = min(warmup, frames // 10)
        return SimConfig(frames, seeds, warmup, tuple(spec.thresholds) + tuple(thresholds),
                         keep_trace)


@dataclass
class SweepPoint:
    """One point of the sweep: CSV label columns plus what it changes in the scenario"""
    columns: Dict[str, Any]
    link_kwargs: Dict[str, Any]
    source: SourceSpec
    thetas: Tuple[float, ...]
    handover_n: int


@dataclass
class PointOutput:
    rows: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    selection: List[Dict[str, Any]] = field(default_factory=list)


def sweep_points(scenario: Scenario) -> List[SweepPoint]:
    axis = scenario.sweep.sweep_axis
    values = scenario.sweep.values
    thetas = scenario.analysis.thetas
    n = int(scenario.analysis.handover_n)
    source = scenario.source
    points: List[SweepPoint] = []
    for ratio in scenario.budget.ratios:
        base = {"avg_to_peak_ratio": ratio}

        def point(columns, link_kwargs=None, point_source=source, point_thetas=thetas, point_n=n):
            return SweepPoint({**columns, **base}, {"ratio": ratio, **(link_kwargs or {})},
                              point_source, tuple(point_thetas), point_n)

        if axis is None:
            points.append(point({}))
        elif axis is SweepAxis.PAVG_DBM:
            points.extend(point({"pavg_dbm": v}, {"avg_power_dbm": v}) for v in values)
        elif axis is SweepAxis.THETA:
            points.append(point({}, point_thetas=values))
        elif axis is SweepAxis.POSITION_XY:
            z = scenario.vlc.rx_position_m[2]
            for x, y in values:
                rf, vlc = scenario.moved_to((x, y, z))
                points.append(point({"x_m": x, "y_m": y}, {"rf": rf, "vlc": vlc}))
        elif axis is SweepAxis.N:
            tx = scenario.vlc.tx_position_m
            rx = scenario.vlc.rx_position_m
            places = (("center", (tx[0], tx[1], rx[2])), ("edge", cell_edge_position(scenario.vlc)))
            for label, position in places:
                rf, vlc = scenario.moved_to(position)
                points.extend(point({"n": int(v), "position": label}, {"rf": rf, "vlc": vlc},
                                    point_n=int(v)) for v in values)
        elif axis is SweepAxis.USERS:
            points.extend(point({"users": int(v)}, {"users": int(v)}) for v in values)
        elif axis is SweepAxis.VERTICAL_DISTANCE:
            tx, rx = scenario.vlc.tx_position_m, scenario.vlc.rx_position_m
            for v in values:
                rf, vlc = scenario.moved_to((rx[0], rx[1], tx[2] - v))
                points.append(point({"vertical_distance_m": v}, {"rf": rf, "vlc": vlc}))
        elif axis is SweepAxis.LAMBDA:
            points.extend(point({"lambda_bits_per_frame": v}, point_source=source.with_rate(v))
                          for v in values)
        elif axis is SweepAxis.BETA:
            points.extend(point({"beta": v}, point_source=SourceSpec(
                source.alpha, v, source.lambda_bits_per_frame)) for v in values)
    return points


def axis_strategies(scenario: Scenario) -> Tuple[Strategy, ...]:
    axis = scenario.sweep.sweep_axis
    strategies = scenario.strategy_list
    if axis in DELAY_AXES:
        bounded = tuple(s for s in strategies if s in BOUNDED_STRATEGIES)
        return bounded or BOUNDED_STRATEGIES
    if axis is SweepAxis.N:
        return (Strategy.HYBRID1, Strategy.HANDOVER)
    return strategies


def _services(scenario: Scenario, point: SweepPoint,
              strategies: Sequence[Strategy]) -> Dict[Strategy, ServiceLmgf]:
    link = scenario.link_model(**point.link_kwargs)
    return {s: build_service(s, link, hybrid2_mode=scenario.analysis.hybrid2_mode,
                             gamma=scenario.analysis.gamma, handover_n=point.handover_n)
            for s in strategies}


def _rho_point(scenario: Scenario, point: SweepPoint, strategies: Sequence[Strategy]) -> PointOutput:
    services = _services(scenario, point, strategies)
    frame = scenario.frame_spec(point.link_kwargs.get("users"))
    output = PointOutput({s.value: [] for s in strategies})
    for theta in point.thetas:
        rhos: Dict[Strategy, Optional[float]] = {}
        for strategy, service in services.items():
            row = {**point.columns, "theta_per_bit": theta}
            try:
                rho = service.rho(point.source, theta).rho_bits_per_frame
                row.update(rho_bits_per_frame=rho, rho_kbps=frame.to_kbps(rho), note="")
            except TOLERATED as e:
                rho = None
                row.update(rho_bits_per_frame=None, rho_kbps=None, note=str(e))
            rhos[strategy] = rho
            output.rows[strategy.value].append(row)
        output.selection.append(_selection_row(point, theta, services, rhos))
    return output


def _selection_row(point: SweepPoint, theta: float, services: Dict[Strategy, ServiceLmgf],
                   rhos: Dict[Strategy, Optional[float]]) -> Dict[str, Any]:
    row: Dict[str, Any] = {**point.columns, "theta_per_bit": theta}
    for strategy, rho in rhos.items():
        row[f"rho_{strategy.value}"] = rho
    candidates = [s for s, rho in rhos.items() if rho is not None]
    row["selected"] = ""
    if len(candidates) >= 2:
        row["selected"] = candidates[multi_link_select([rhos[s] for s in candidates])].value
    elif candidates:
        row["selected"] = candidates[0].value
    row["link_choice"] = row["vlc_threshold_bits"] = ""
    if Strategy.RF in services and Strategy.VLC in services:
        try:
            certificate = select_link(services[Strategy.VLC].deterministic_rate,
                                      services[Strategy.RF].lmgf(-theta), point.source, theta)
            row["link_choice"] = certificate.decision.value
            row["vlc_threshold_bits"] = certificate.threshold_bits
        except UnstableError as e:
            row["link_choice"] = f"unstable: {e}"
    return row


def _delay_point(scenario: Scenario, point: SweepPoint, strategies: Sequence[Strategy],
                 options: RunOptions) -> PointOutput:
    services = _services(scenario, point, strategies)
    query = options.bound_query(scenario)
    output = PointOutput({s.value: [] for s in strategies})
    for strategy, service in services.items():
        row = dict(point.columns)
        try:
            backlog = backlog_bound(service, point.source, query)
            delay = delay_bound(service, point.source, query)
            row.update(q_bits=backlog.q_bits, d_frames=delay.d_frames,
                       d_ms=delay.d_ms(scenario.frame.frame_duration_s),
                       c_bits_per_frame=backlog.c_bits_per_frame, note="; ".join(backlog.notes))
        except TOLERATED as e:
            row.update({column: None for column in DELAY_COLUMNS}, note=str(e))
        output.rows[strategy.value].append(row)
    return output


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "nan" if math.isnan(value) else format(value, ".10g")
    return str(value)


def write_csv(path: Path, rows: Sequence[Dict[str, Any]], metadata: Dict[str, Any]) -> Path:
    """Comma-separated, `#` metadata lines, UTF-8, LF endings"""
    columns: List[str] = []
    for row in rows:
        columns.extend(key for key in row if key not in columns)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for key, value in metadata.items():
            f.write(f"# {key}: {value}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row.get(column)) for column in columns])
    return path


def _map_points(func, points: Sequence[SweepPoint], threads: Optional[int]) -> List[PointOutput]:
    workers = max(1, min(threads or worker_count(), len(points)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, points))


def _versions() -> Dict[str, str]:
    versions = {}
    for package in ("hybridqos", "numpy", "scipy", "pyyaml"):
        try:
            versions[package] = importlib.metadata.version(package)
        except importlib.metadata.PackageNotFoundError:
            versions[package] = "unknown"
    return versions


def write_manifest(scenario: Scenario, out_dir: Path, artifacts: Sequence[Path], started: float,
                   command: str, quick: bool) -> Path:
    manifest = {
        "command": command,
        "scenario": scenario_to_dict(scenario),
        "seed": scenario.seed,
        "quick": quick,
        "versions": _versions(),
        "wall_time_s": round(time.perf_counter() - started, 3),
        "artifacts": [Path(p).name for p in artifacts],
    }
    path = out_dir / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def run_scenario(scenario: Scenario, out_dir: Path, options: RunOptions = RunOptions()) -> List[Path]:
    """Compute every sweep point and write one CSV per strategy, selection.csv and the manifest"""
    started = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    axis = scenario.sweep.sweep_axis
    stem = AXIS_STEMS[axis] if axis is not None else AXIS_STEMS[SweepAxis.THETA]
    strategies = axis_strategies(scenario)
    points = sweep_points(scenario)
    logger.info("%s: %d points x %d strategies", scenario.name, len(points), len(strategies))
    if axis in DELAY_AXES:
        outputs = _map_points(lambda p: _delay_point(scenario, p, strategies, options), points,
                              options.threads)
        units = "q in bits; d in frames and ms; c in bits/frame"
    else:
        outputs = _map_points(lambda p: _rho_point(scenario, p, strategies), points, options.threads)
        units = "theta in 1/bit; rho in bits/frame and kbit/s"
    artifacts = [write_resolved(scenario, out_dir / "scenario.resolved.json")]
    for strategy in strategies:
        rows = [row for output in outputs for row in output.rows[strategy.value]]
        metadata = {"scenario": scenario.name, "strategy": strategy.value,
                    "axis": axis.value if axis else "none", "units": units}
        artifacts.append(write_csv(out_dir / f"{stem}_{strategy.value}.csv", rows, metadata))
    selection = [row for output in outputs for row in output.selection]
    if selection:
        artifacts.append(write_csv(out_dir / "selection.csv", selection,
                                   {"scenario": scenario.name, "rule": "largest rho, ties to first"}))
    artifacts.append(write_manifest(scenario, out_dir, artifacts, started, "run", options.quick))
    return artifacts


class RowStatus(Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    SKIP = "SKIP"


@dataclass
class ValidationRow:
    status: RowStatus
    strategy: str
    point: str
    check: str
    empirical: Optional[float]
    analytical: Optional[float]
    note: str = ""

    def __str__(self) -> str:
        emoji = {"PASS": "✅", "FAIL": "❌", "SKIP": "⚠️"}[self.status.value]
        values = ""
        if self.empirical is not None and self.analytical is not None:
            values = f" empirical={self.empirical:.4g} analytical={self.analytical:.4g}"
        note = f" ({self.note})" if self.note else ""
        return f"{emoji} {self.status.value} {self.strategy:<8} {self.point} {self.check}{values}{note}"

    def as_dict(self) -> Dict[str, Any]:
        return {"status": self.status.value, "strategy": self.strategy, "point": self.point,
                "check": self.check, "empirical": self.empirical, "analytical": self.analytical,
                "note": self.note}


def _label(point: SweepPoint) -> str:
    return " ".join(f"{k}={_format(v)}" for k, v in point.columns.items())


def per_seed_row(strategy: str, label: str, check: str, summaries: Sequence[SimSummary],
                 values: Sequence[float], epsilon: float) -> ValidationRow:
    """One row judging every seed on its own; the empirical column holds the worst seed"""
    above = [s.seeds[0] for s, value in zip(summaries, values) if value > epsilon]
    note = f"{len(above)} of {len(values)} seeds above eps"
    if above:
        note += ": seeds " + " ".join(str(seed) for seed in above)
    return ValidationRow(RowStatus.FAIL if above else RowStatus.PASS, strategy, label,
                         f"every seed {check}", max(values), epsilon, note)


def _validate_bounds(scenario: Scenario, point: SweepPoint, index: int, options: RunOptions,
                     traces_dir: Optional[Path]) -> List[ValidationRow]:
    strategies = tuple(s for s in scenario.strategy_list if s in BOUNDED_STRATEGIES) or BOUNDED_STRATEGIES
    services = _services(scenario, point, strategies)
    query = options.bound_query(scenario)
    epsilon = scenario.analysis.epsilon
    label = _label(point)
    rows: List[ValidationRow] = []
    bounds = {}
    for strategy, service in services.items():
        try:
            bounds[strategy] = (backlog_bound(service, point.source, query),
                                delay_bound(service, point.source, query))
        except TOLERATED as e:
            rows.append(ValidationRow(RowStatus.SKIP, strategy.value, label, "bounds", None, None, str(e)))
    if not bounds:
        return rows
    thresholds = [backlog_threshold(backlog.q_bits) for backlog, _ in bounds.values()]
    config = options.sim_config(scenario, thresholds, keep_trace=traces_dir is not None)
    results = simulate(config, [services[s] for s in bounds], point.source, options.threads)
    for strategy, (backlog, delay) in bounds.items():
        result = results[strategy.value]
        summary = result.summary
        q = backlog_threshold(backlog.q_bits)
        backlog_check = f"Pr{{Q>q}}<=eps q={backlog.q_bits:.6g}"
        delay_check = f"Pr{{delay>d}}<=eps d={delay.d_frames:.6g}"
        overflow = summary.overflow_probability(q)
        rows.append(ValidationRow(RowStatus.PASS if overflow <= epsilon else RowStatus.FAIL,
                                  strategy.value, label, backlog_check, overflow, epsilon))
        late = summary.delay_exceedance(delay.d_frames)
        try:
            note = f"delay quantile {delay_quantile(summary, epsilon)} frames"
        except (InsufficientTailError, CensoredDelayError) as e:
            note = str(e)
        rows.append(ValidationRow(RowStatus.PASS if late <= epsilon else RowStatus.FAIL,
                                  strategy.value, label, delay_check, late, epsilon, note))
        if len(result.per_seed) > 1:
            seeds = result.per_seed
            rows.append(per_seed_row(strategy.value, label, backlog_check, seeds,
                                     [s.overflow_probability(q) for s in seeds], epsilon))
            rows.append(per_seed_row(strategy.value, label, delay_check, seeds,
                                     [s.delay_exceedance(delay.d_frames) for s in seeds], epsilon))
        if traces_dir is not None and result.traces:
            traces_dir.mkdir(parents=True, exist_ok=True)
            stem = f"point{index:03d}_{strategy.value}"
            write_trace_csv(result.traces[0], traces_dir / f"trace_{stem}.csv",
                            {"point": label, "q_bits": backlog.q_bits, "d_frames": delay.d_frames})
            summary_json(summary, traces_dir / f"summary_{stem}.json")
    return rows


def _validate_tail(scenario: Scenario, point: SweepPoint, options: RunOptions) -> List[ValidationRow]:
    rows: List[ValidationRow] = []
    label = _label(point)
    strategies = [s for s in (Strategy.VLC, Strategy.HYBRID1) if s in scenario.strategy_list] \
        or [Strategy.VLC, Strategy.HYBRID1]
    services = _services(scenario, point, strategies)
    source = point.source
    for theta in scenario.validation.tail_thetas:
        for strategy, service in services.items():
            check = f"theta_hat in [0.8, 1.3]*theta theta={theta:g}"
            try:
                rho = service.rho(source, theta).rho_bits_per_frame
            except TOLERATED as e:
                rows.append(ValidationRow(RowStatus.SKIP, strategy.value, label, check, None, None, str(e)))
                continue
            if source.p_on <= 0.0:
                rows.append(ValidationRow(RowStatus.SKIP, strategy.value, label, check, None, theta,
                                          "source never on"))
                continue
            loaded = source.with_rate(TAIL_LOAD * rho / source.p_on)
            q_grid = [k / theta for k in TAIL_THRESHOLDS]
            result = simulate(options.sim_config(scenario, q_grid), [service], loaded, options.threads)
            try:
                estimate = tail_decay_estimate(result[strategy.value].summary, q_grid)
            except InsufficientTailError as e:
                rows.append(ValidationRow(RowStatus.SKIP, strategy.value, label, check, None, theta, str(e)))
                continue
            inside = 0.8 * theta <= estimate.theta_hat <= 1.3 * theta
            rows.append(ValidationRow(RowStatus.PASS if inside else RowStatus.FAIL, strategy.value, label,
                                      check, estimate.theta_hat, theta,
                                      f"SE {estimate.standard_error:.3g}"))
    return rows


def run_validation(scenario: Scenario, out_dir: Path, options: RunOptions = RunOptions(),
                   traces_dir: Optional[Path] = None) -> Tuple[List[ValidationRow], List[Path]]:
    """Analytical bounds against simulated queues at every sweep point"""
    started = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: List[ValidationRow] = []
    points = sweep_points(scenario)
    for index, point in enumerate(points):
        rows.extend(_validate_bounds(scenario, point, index, options, traces_dir))
    if scenario.validation.tail_thetas:
        for point in points[:1]:
            rows.extend(_validate_tail(scenario, point, options))
    artifacts = [write_resolved(scenario, out_dir / "scenario.resolved.json"),
                 write_csv(out_dir / "validation.csv", [row.as_dict() for row in rows],
                           {"scenario": scenario.name, "epsilon": scenario.analysis.epsilon})]
    artifacts.append(write_manifest(scenario, out_dir, artifacts, started, "validate", options.quick))
    return rows, artifacts
