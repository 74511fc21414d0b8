"""
Frame-level queue simulator

Replays the transmitter buffer under each strategy and measures overflow
probabilities, FCFS delays and the tail decay rate. Arrivals are rounded up
and services down to whole bits so the Lindley recursion runs exactly in
int64. Backlogs are computed chunk by chunk with the closed form
Q_l = X_l - min(0, min_{k<=l} X_k) over the running sum X of A - S.

Every strategy of one seed sees the same arrival and fading streams.
"""

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CensoredDelayError, InsufficientTailError
from .geometry_channel import sample_fading_power
from .source import OnOffGenerator, SourceSpec
from .strategies import HandoverService, ServiceLmgf

logger = logging.getLogger(__name__)

CHUNK_FRAMES = 1 << 20
BATCHES = 10
MIN_EXCEEDANCES = 50
TAIL_FRAMES_HINT = 100_000


def worker_count() -> int:
    """Worker pool size from HYBRIDQOS_THREADS, default min(4, cpu count)"""
    default = min(4, os.cpu_count() or 1)
    raw = os.environ.get("HYBRIDQOS_THREADS")
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
        if value < 1:
            raise ValueError(raw)
    except ValueError:
        logger.warning("ignoring HYBRIDQOS_THREADS=%r, using 1 worker", raw)
        return 1
    return value


def backlog_threshold(q: float) -> float:
    """Smallest whole-bit backlog strictly above q; Pr{Q > q} is measured at it"""
    return float(math.floor(q) + 1)


@dataclass(frozen=True)
class SimConfig:
    """Horizon, seeds and measurement thresholds; frames includes the warmup"""
    frames: int = 1_000_000
    seeds: Tuple[int, ...] = (0,)
    warmup: int = 10_000
    thresholds: Tuple[float, ...] = ()
    keep_trace: bool = False
    chunk_frames: int = CHUNK_FRAMES

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "thresholds", tuple(sorted({float(q) for q in self.thresholds})))
        if self.frames < 1:
            raise ValueError("frames must be at least 1")
        if not 0 <= self.warmup < self.frames:
            raise ValueError("warmup must lie in [0, frames)")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.chunk_frames < 1:
            raise ValueError("chunk_frames must be at least 1")
        if any(q < 0 for q in self.thresholds):
            raise ValueError("thresholds must be nonnegative")

    @property
    def measured_frames(self) -> int:
        return self.frames - self.warmup


@dataclass
class QueueTrace:
    """Per-frame streams of one seed; arrays are empty unless the config keeps traces"""
    strategy: str
    seed: int
    arrivals: np.ndarray
    services: np.ndarray
    backlog: np.ndarray
    states: np.ndarray
    first_frame: int = 0


@dataclass
class SimSummary:
    strategy: str
    seeds: Tuple[int, ...]
    measured_frames: int
    thresholds: np.ndarray
    batch_frames: np.ndarray
    batch_exceedances: np.ndarray
    delay_histogram: np.ndarray
    censored_delays: int = 0
    arrival_bits: int = 0
    service_bits: int = 0
    backlog_sum: float = 0.0
    max_backlog: int = 0
    vlc_blocks: int = 0
    rf_blocks: int = 0
    switches_from_vlc: int = 0
    switches_from_rf: int = 0

    @property
    def exceedances(self) -> np.ndarray:
        return self.batch_exceedances.sum(axis=0)

    @property
    def mean_backlog(self) -> float:
        return self.backlog_sum / self.measured_frames

    @property
    def mean_arrival(self) -> float:
        return self.arrival_bits / self.measured_frames

    @property
    def mean_service(self) -> float:
        """Offered service per frame (capacity, not throughput)"""
        return self.service_bits / self.measured_frames

    @property
    def delay_samples(self) -> int:
        return int(self.delay_histogram.sum())

    @property
    def switch_from_vlc(self) -> Optional[float]:
        return self.switches_from_vlc / self.vlc_blocks if self.vlc_blocks else None

    @property
    def switch_from_rf(self) -> Optional[float]:
        return self.switches_from_rf / self.rf_blocks if self.rf_blocks else None

    def _threshold_index(self, q: float) -> int:
        matches = np.flatnonzero(np.isclose(self.thresholds, q, rtol=1e-12, atol=0.0))
        if matches.size == 0:
            raise ValueError(f"q={q:g} is not one of the simulated thresholds")
        return int(matches[0])

    def overflow_probability(self, q: float) -> float:
        """Empirical Pr{Q >= q}"""
        return float(self.exceedances[self._threshold_index(q)] / self.measured_frames)

    @property
    def delay_population(self) -> int:
        """Frames with arrivals, served or still pending when the run ended"""
        return self.delay_samples + self.censored_delays

    def delay_exceedance(self, d: float) -> float:
        """Empirical Pr{delay > d} over frames that carried arrivals; pending ones count as late"""
        population = self.delay_population
        if population == 0:
            return 0.0
        start = max(0, int(math.floor(d)) + 1)
        return float((self.delay_histogram[start:].sum() + self.censored_delays) / population)

    @classmethod
    def merge(cls, summaries: Sequence["SimSummary"]) -> "SimSummary":
        """Pool seeds; batches are concatenated, counters summed"""
        first = summaries[0]
        width = max(s.delay_histogram.size for s in summaries)
        histogram = np.zeros(width, dtype=np.int64)
        for s in summaries:
            histogram[:s.delay_histogram.size] += s.delay_histogram
        return cls(
            strategy=first.strategy,
            seeds=tuple(seed for s in summaries for seed in s.seeds),
            measured_frames=sum(s.measured_frames for s in summaries),
            thresholds=first.thresholds,
            batch_frames=np.concatenate([s.batch_frames for s in summaries]),
            batch_exceedances=np.vstack([s.batch_exceedances for s in summaries]),
            delay_histogram=histogram,
            censored_delays=sum(s.censored_delays for s in summaries),
            arrival_bits=sum(s.arrival_bits for s in summaries),
            service_bits=sum(s.service_bits for s in summaries),
            backlog_sum=sum(s.backlog_sum for s in summaries),
            max_backlog=max(s.max_backlog for s in summaries),
            vlc_blocks=sum(s.vlc_blocks for s in summaries),
            rf_blocks=sum(s.rf_blocks for s in summaries),
            switches_from_vlc=sum(s.switches_from_vlc for s in summaries),
            switches_from_rf=sum(s.switches_from_rf for s in summaries),
        )

    def to_dict(self) -> Dict[str, object]:
        return {
            "strategy": self.strategy,
            "seeds": list(self.seeds),
            "measured_frames": self.measured_frames,
            "mean_arrival_bits_per_frame": self.mean_arrival,
            "mean_service_bits_per_frame": self.mean_service,
            "mean_backlog_bits": self.mean_backlog,
            "max_backlog_bits": self.max_backlog,
            "thresholds_bits": self.thresholds.tolist(),
            "exceedances": self.exceedances.tolist(),
            "delay_samples": self.delay_samples,
            "censored_delays": self.censored_delays,
            "switch_from_vlc": self.switch_from_vlc,
            "switch_from_rf": self.switch_from_rf,
        }


@dataclass
class SimulationResult:
    summary: SimSummary
    per_seed: List[SimSummary]
    traces: List[QueueTrace] = field(default_factory=list)


class DelayTracker:
    """FCFS virtual delays from cumulative arrival targets and departure checkpoints

    The bits that arrived in frame l have all left at the first checkpoint
    whose cumulative departures reach the cumulative arrivals up to l. Targets
    not reached inside a chunk stay pending for the next one.
    """

    def __init__(self):
        self.pending_frames = np.empty(0, dtype=np.int64)
        self.pending_targets = np.empty(0, dtype=np.int64)
        self.histogram = np.zeros(1, dtype=np.int64)

    def add_targets(self, frames: np.ndarray, targets: np.ndarray) -> None:
        self.pending_frames = np.concatenate([self.pending_frames, frames])
        self.pending_targets = np.concatenate([self.pending_targets, targets])

    def resolve(self, times: np.ndarray, departures: np.ndarray,
                to_delay: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> None:
        if self.pending_targets.size == 0 or departures.size == 0:
            return
        index = np.searchsorted(departures, self.pending_targets, side="left")
        found = index < departures.size
        if np.any(found):
            delays = to_delay(times[index[found]], self.pending_frames[found])
            counts = np.bincount(delays)
            if counts.size > self.histogram.size:
                counts[:self.histogram.size] += self.histogram
                self.histogram = counts
            else:
                self.histogram[:counts.size] += counts
        self.pending_frames = self.pending_frames[~found]
        self.pending_targets = self.pending_targets[~found]


class _QueueState:
    """Running backlog, cumulative counters and measurements of one strategy"""

    def __init__(self, name: str, config: SimConfig, keep_trace: bool):
        self.name = name
        self.config = config
        self.backlog = 0
        self.cum_arrivals = 0
        self.cum_departures = 0
        self.delays = DelayTracker()
        self.thresholds = np.asarray(config.thresholds, dtype=float)
        self.batch_exceedances = np.zeros((BATCHES, self.thresholds.size), dtype=np.int64)
        self.batch_frames = np.zeros(BATCHES, dtype=np.int64)
        self.arrival_bits = 0
        self.service_bits = 0
        self.backlog_sum = 0.0
        self.max_backlog = 0
        self.keep_trace = keep_trace
        self.trace_parts: Dict[str, List[np.ndarray]] = {"A": [], "S": [], "Q": [], "state": []}
        self.vlc_blocks = self.rf_blocks = 0
        self.switches_from_vlc = self.switches_from_rf = 0

    def measure(self, frames: np.ndarray, arrivals: np.ndarray, services: np.ndarray,
                backlog: np.ndarray) -> None:
        """Frame-end backlogs and per-frame totals for the given global frame indices"""
        measured = frames >= self.config.warmup
        if not np.any(measured):
            return
        q = backlog[measured]
        batch = (frames[measured] - self.config.warmup) * BATCHES // self.config.measured_frames
        self.batch_frames += np.bincount(batch, minlength=BATCHES)
        for j, threshold in enumerate(self.thresholds):
            self.batch_exceedances[:, j] += np.bincount(batch[q >= threshold], minlength=BATCHES)
        self.arrival_bits += int(arrivals[measured].sum())
        self.service_bits += int(services[measured].sum())
        self.backlog_sum += float(q.sum())
        self.max_backlog = max(self.max_backlog, int(q.max()))

    def add_delay_targets(self, frames: np.ndarray, arrivals: np.ndarray,
                          cum_arrivals: np.ndarray) -> None:
        wanted = (frames >= self.config.warmup) & (arrivals > 0)
        self.delays.add_targets(frames[wanted], cum_arrivals[wanted])

    def record(self, arrivals, services, backlog, states) -> None:
        if self.keep_trace:
            for key, values in (("A", arrivals), ("S", services), ("Q", backlog), ("state", states)):
                self.trace_parts[key].append(values)

    def summary(self, seed: int) -> SimSummary:
        return SimSummary(
            strategy=self.name, seeds=(seed,), measured_frames=self.config.measured_frames,
            thresholds=self.thresholds, batch_frames=self.batch_frames,
            batch_exceedances=self.batch_exceedances, delay_histogram=self.delays.histogram,
            censored_delays=int(self.delays.pending_frames.size), arrival_bits=self.arrival_bits,
            service_bits=self.service_bits, backlog_sum=self.backlog_sum,
            max_backlog=self.max_backlog, vlc_blocks=self.vlc_blocks, rf_blocks=self.rf_blocks,
            switches_from_vlc=self.switches_from_vlc, switches_from_rf=self.switches_from_rf)

    def trace(self, seed: int) -> QueueTrace:
        def joined(key, dtype):
            parts = self.trace_parts[key]
            return np.concatenate(parts) if parts else np.empty(0, dtype=dtype)
        return QueueTrace(self.name, seed, joined("A", np.int64), joined("S", np.int64),
                          joined("Q", np.int64), joined("state", bool))


def lindley(backlog0: int, increments: np.ndarray) -> np.ndarray:
    """Backlog after each step starting from backlog0, Q = max(0, Q + increment)"""
    running = backlog0 + np.cumsum(increments)
    return running - np.minimum(0, np.minimum.accumulate(running))


def quantize_arrivals(bits: np.ndarray) -> np.ndarray:
    return np.ceil(bits - 1e-9).astype(np.int64)


def quantize_services(bits: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(bits, dtype=float) + 1e-9).astype(np.int64)


def _frame_chunk(state: _QueueState, start: int, arrivals: np.ndarray, services: np.ndarray,
                 on: np.ndarray) -> None:
    frames = np.arange(start, start + arrivals.size, dtype=np.int64)
    backlog = lindley(state.backlog, arrivals - services)
    cum_arrivals = state.cum_arrivals + np.cumsum(arrivals)
    cum_departures = cum_arrivals - backlog
    state.add_delay_targets(frames, arrivals, cum_arrivals)
    state.delays.resolve(frames, cum_departures, lambda done, frame: done - frame)
    state.measure(frames, arrivals, services, backlog)
    state.record(arrivals, services, backlog, on)
    state.backlog = int(backlog[-1])
    state.cum_arrivals = int(cum_arrivals[-1])


class _HandoverBlocks:
    """Stream of transmission blocks: end time in sub-frames, capacity and link"""

    def __init__(self, service: HandoverService, rng: np.random.Generator):
        self.service = service
        self.rng = rng
        self.n = service.n
        self.clock = 0
        self.last_rf: Optional[bool] = None
        self.times = np.empty(0, dtype=np.int64)
        self.capacity = np.empty(0, dtype=np.int64)
        self.rf = np.empty(0, dtype=bool)

    def _extend(self, count: int) -> None:
        h2 = sample_fading_power(self.service.link.sampler, count, self.rng)
        rf = self.service.uses_rf(h2)
        previous = np.concatenate([[rf[0] if self.last_rf is None else self.last_rf], rf[:-1]])
        switched = rf != previous
        durations = self.n + switched.astype(np.int64)
        times = self.clock + np.cumsum(durations)
        self.clock = int(times[-1])
        self.last_rf = bool(rf[-1])
        self.times = np.concatenate([self.times, times])
        self.capacity = np.concatenate(
            [self.capacity, quantize_services(self.service.frame_service(h2))])
        self.rf = np.concatenate([self.rf, rf])

    def take_until(self, end_time: int, hint: int):
        """Blocks ending at or before end_time, removed from the stream"""
        while self.times.size == 0 or self.times[-1] < end_time:
            self._extend(max(hint, 16))
        cut = int(np.searchsorted(self.times, end_time, side="right"))
        taken = self.times[:cut], self.capacity[:cut], self.rf[:cut]
        self.times, self.capacity, self.rf = self.times[cut:], self.capacity[cut:], self.rf[cut:]
        return taken


def _handover_chunk(state: _QueueState, blocks: _HandoverBlocks, start: int,
                    arrivals: np.ndarray, on: np.ndarray, previous_rf: List[Optional[bool]]) -> None:
    n = blocks.n
    count = arrivals.size
    frames = np.arange(start, start + count, dtype=np.int64)
    arrival_times = n * frames
    end_time = n * (start + count)
    block_times, capacity, rf = blocks.take_until(end_time, count)
    # services at a tie precede the arrivals of the frame that starts then
    times = np.concatenate([block_times, arrival_times])
    kinds = np.concatenate([np.zeros(block_times.size, dtype=np.int8), np.ones(count, dtype=np.int8)])
    increments = np.concatenate([-capacity, arrivals])
    order = np.lexsort((kinds, times))
    times, kinds, increments = times[order], kinds[order], increments[order]
    backlog = lindley(state.backlog, increments)
    cum_arrivals_events = state.cum_arrivals + np.cumsum(np.where(kinds == 1, increments, 0))
    cum_departures = cum_arrivals_events - backlog
    arrival_positions = np.flatnonzero(kinds == 1)
    cum_arrivals = cum_arrivals_events[arrival_positions]
    # backlog at the end of each frame: just before the next frame's arrival
    frame_end_backlog = np.concatenate([backlog[arrival_positions[1:] - 1], backlog[-1:]])
    services_per_frame = np.bincount((block_times - 1) // n - start, weights=capacity,
                                     minlength=count)[:count].astype(np.int64)
    state.add_delay_targets(frames, arrivals, cum_arrivals)
    service_positions = np.flatnonzero(kinds == 0)
    state.delays.resolve(times[service_positions], cum_departures[service_positions],
                         lambda done, frame: (done - n * frame + n - 1) // n - 1)
    state.measure(frames, arrivals, services_per_frame, frame_end_backlog)
    state.record(arrivals, services_per_frame, frame_end_backlog, on)
    measured = (block_times - 1) // n >= state.config.warmup
    rf_measured = rf[measured]
    if rf_measured.size:
        last = previous_rf[0]
        preceding = np.concatenate([[last if last is not None else rf_measured[0]], rf_measured[:-1]])
        has_predecessor = np.ones(rf_measured.size, dtype=bool)
        has_predecessor[0] = last is not None
        from_vlc = has_predecessor & ~preceding
        from_rf = has_predecessor & preceding
        state.vlc_blocks += int(from_vlc.sum())
        state.rf_blocks += int(from_rf.sum())
        state.switches_from_vlc += int((from_vlc & rf_measured).sum())
        state.switches_from_rf += int((from_rf & ~rf_measured).sum())
        previous_rf[0] = bool(rf_measured[-1])
    state.backlog = int(backlog[-1])
    state.cum_arrivals = int(cum_arrivals_events[-1])


def simulate_seed(seed: int, config: SimConfig, services: Sequence[ServiceLmgf],
                  source: SourceSpec) -> Dict[str, Tuple[QueueTrace, SimSummary]]:
    """One seed for several strategies sharing the arrival and fading streams"""
    arrival_rng = np.random.default_rng([seed, 0])
    fading_rng = np.random.default_rng([seed, 1])
    generator = OnOffGenerator(source, arrival_rng)
    frame_services = [s for s in services if not isinstance(s, HandoverService)]
    handovers = [s for s in services if isinstance(s, HandoverService)]
    states = {s.name: _QueueState(s.name, config, config.keep_trace) for s in services}
    block_streams = {s.name: _HandoverBlocks(s, np.random.default_rng([seed, 2, s.n]))
                     for s in handovers}
    previous_rf = {s.name: [None] for s in handovers}
    sampler = services[0].link.sampler
    start = 0
    while start < config.frames:
        count = min(config.chunk_frames, config.frames - start)
        on = generator.states(count)
        arrivals = quantize_arrivals(np.where(on, source.lambda_bits_per_frame, 0.0))
        if frame_services:
            h2 = sample_fading_power(sampler, count, fading_rng)
            for service in frame_services:
                served = quantize_services(service.frame_service(h2))
                _frame_chunk(states[service.name], start, arrivals, served, on)
        for service in handovers:
            _handover_chunk(states[service.name], block_streams[service.name], start, arrivals, on,
                            previous_rf[service.name])
        start += count
    return {name: (state.trace(seed), state.summary(seed)) for name, state in states.items()}


def simulate(config: SimConfig, services: Sequence[ServiceLmgf], source: SourceSpec,
             threads: Optional[int] = None) -> Dict[str, SimulationResult]:
    """All seeds in a thread pool; results merged in seed order"""
    if not services:
        raise ValueError("nothing to simulate")
    if config.measured_frames < TAIL_FRAMES_HINT:
        logger.debug("%d measured frames is short for tail estimates", config.measured_frames)
    for service in services:
        capacity = service.mean_rate()
        if source.mean_rate >= capacity:
            logger.warning("%s: mean arrival %.6g >= mean service %.6g bits/frame, queue is unstable",
                           service.name, source.mean_rate, capacity)
    workers = min(threads or worker_count(), len(config.seeds))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        runs = list(pool.map(lambda seed: simulate_seed(seed, config, services, source), config.seeds))
    results = {}
    for service in services:
        per_seed = [run[service.name][1] for run in runs]
        traces = [run[service.name][0] for run in runs] if config.keep_trace else []
        results[service.name] = SimulationResult(SimSummary.merge(per_seed), per_seed, traces)
    return results


@dataclass(frozen=True)
class TailEstimate:
    theta_hat: float
    standard_error: float
    q_grid: Tuple[float, ...]
    exceedances: Tuple[int, ...]


def _decay_slope(q: np.ndarray, probabilities: np.ndarray) -> float:
    return -float(np.polyfit(q, np.log(probabilities), 1)[0])


def tail_decay_estimate(summary: SimSummary, q_grid: Optional[Sequence[float]] = None) -> TailEstimate:
    """Least-squares decay rate of log Pr{Q >= q}, with a delete-one-batch jackknife SE"""
    if q_grid is None:
        indices = np.arange(summary.thresholds.size)
    else:
        indices = np.array([summary._threshold_index(q) for q in q_grid])
    if indices.size < 2:
        raise ValueError("need at least two thresholds to fit a decay rate")
    q = summary.thresholds[indices]
    counts = summary.batch_exceedances[:, indices]
    totals = counts.sum(axis=0)
    largest = int(totals[np.argmax(q)])
    if largest < MIN_EXCEEDANCES:
        raise InsufficientTailError(largest, MIN_EXCEEDANCES)
    theta_hat = _decay_slope(q, totals / summary.batch_frames.sum())
    estimates = []
    for b in range(counts.shape[0]):
        kept = totals - counts[b]
        frames = summary.batch_frames.sum() - summary.batch_frames[b]
        if frames > 0 and np.all(kept > 0):
            estimates.append(_decay_slope(q, kept / frames))
    if len(estimates) >= 2:
        k = len(estimates)
        spread = np.asarray(estimates) - np.mean(estimates)
        standard_error = math.sqrt((k - 1) / k * float(np.sum(spread ** 2)))
    else:
        standard_error = math.nan
    return TailEstimate(theta_hat, standard_error, tuple(float(v) for v in q),
                        tuple(int(c) for c in totals))


def delay_quantile(summary: SimSummary, epsilon: float) -> int:
    """Smallest d (frames) with at least a 1 - ε fraction of delays <= d, pending delays counted as longer"""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    population = summary.delay_population
    if population * epsilon < MIN_EXCEEDANCES:
        raise InsufficientTailError(int(population * epsilon), MIN_EXCEEDANCES)
    target = (1.0 - epsilon) * population - 1e-9
    cumulative = np.cumsum(summary.delay_histogram)
    if cumulative.size == 0 or cumulative[-1] < target:
        raise CensoredDelayError(summary.censored_delays, population, epsilon)
    return int(np.searchsorted(cumulative, target, side="left"))


def write_trace_csv(trace: QueueTrace, path: Path, metadata: Optional[Dict[str, object]] = None) -> Path:
    """frame,state,A,S,Q with `#` metadata lines; bits throughout"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = {"strategy": trace.strategy, "seed": trace.seed, "units": "bits"}
    lines.update(metadata or {})
    with open(path, "w", encoding="utf-8", newline="") as f:
        for key, value in lines.items():
            f.write(f"# {key}: {value}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["frame", "state", "A", "S", "Q"])
        frames = range(trace.first_frame, trace.first_frame + trace.arrivals.size)
        for frame, on, a, s, q in zip(frames, trace.states, trace.arrivals, trace.services,
                                      trace.backlog):
            writer.writerow([frame, "on" if on else "off", int(a), int(s), int(q)])
    return path


def summary_json(summary: SimSummary, path: Optional[Path] = None) -> str:
    text = json.dumps(summary.to_dict(), indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text
