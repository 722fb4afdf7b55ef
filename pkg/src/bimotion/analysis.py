"""Post-processing of simulation results."""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .circuit import NeuronKind, Subcircuit, coincidence_window, neuron_count
from .engine import SimResult
from .errors import ComparisonError, InvalidParameterError

# absorbs float rounding when matching a fire to the spike that caused it
_MATCH_TOL = 1e-9


class Direction(str, Enum):
    LEFT_TO_RIGHT = "LeftToRight"
    RIGHT_TO_LEFT = "RightToLeft"


_DIRECTION_OF = {Subcircuit.L2R.value: Direction.LEFT_TO_RIGHT,
                 Subcircuit.R2L.value: Direction.RIGHT_TO_LEFT}


@dataclass(frozen=True)
class DirectionEvent:
    time: float
    direction: Direction
    pair_index: int
    neuron_id: int


@dataclass(frozen=True)
class AnalysisConfig:
    kappa: float = 0.5
    t_epi: float = 0.1
    theta_active: float = 0.5

    def __post_init__(self) -> None:
        if not 0 < self.kappa <= 1:
            raise InvalidParameterError(f"kappa must lie in (0, 1], got {self.kappa}")
        if not self.t_epi >= 0:
            raise InvalidParameterError(f"t_epi must be >= 0, got {self.t_epi}")
        if not self.theta_active > 0:
            raise InvalidParameterError(f"theta_active must be > 0, got {self.theta_active}")


def classify(result: SimResult) -> list[DirectionEvent]:
    """One direction event per combined-neuron fire, in time order."""
    return [
        DirectionEvent(r.time, _DIRECTION_OF[r.subcircuit], r.index, r.neuron_id)
        for r in result.fire_log
        if r.kind == NeuronKind.COMBINED.value and r.subcircuit in _DIRECTION_OF
    ]


@dataclass(frozen=True)
class PotentialTrace:
    time: np.ndarray
    total_potential: np.ndarray
    active_count: np.ndarray
    active_fraction: np.ndarray
    integrated_potential: float
    peak_active_fraction: float


def potential_trace(result: SimResult) -> PotentialTrace:
    total = result.total_potential
    frac = result.active_fraction
    integral = float(np.trapezoid(total, result.sample_times)) if len(total) > 1 else 0.0
    return PotentialTrace(
        time=result.sample_times,
        total_potential=total,
        active_count=result.active_count,
        active_fraction=frac,
        integrated_potential=integral,
        peak_active_fraction=float(frac.max()) if len(frac) else 0.0,
    )


@dataclass(frozen=True)
class EpilepsyReport:
    triggered: bool
    intervals: list[tuple[float, float]]


def epilepsy_indicator(result: SimResult, config: AnalysisConfig) -> EpilepsyReport:
    """Find sustained spans where the active fraction is at or above ``kappa``.

    A span runs from its first to its last qualifying sample; it counts only
    when that duration reaches ``t_epi``.
    """
    n = len(result.detector_ids)
    if n == 0:
        return EpilepsyReport(False, [])
    frac = (result.potentials >= config.theta_active).sum(axis=1) / n
    hot = frac >= config.kappa
    times = result.sample_times
    intervals: list[tuple[float, float]] = []
    start = None
    for k, flag in enumerate(hot):
        if flag and start is None:
            start = k
        if start is not None and (not flag or k == len(hot) - 1):
            stop = k if flag else k - 1
            if times[stop] - times[start] >= config.t_epi:
                intervals.append((float(times[start]), float(times[stop])))
            start = None
    return EpilepsyReport(bool(intervals), intervals)


@dataclass(frozen=True)
class Detection:
    neuron_id: int
    time: float
    latency: float


def detection_latencies(result: SimResult) -> list[Detection]:
    """Delay from the later contributing sensor spike to each combined fire.

    Contributors are found by walking the excitatory connections upstream
    and matching each hop against the fire log.
    """
    circuit = result.circuit
    fires: dict[int, list[float]] = defaultdict(list)
    for r in result.fire_log:
        fires[r.neuron_id].append(r.time)

    def latest_in(nid: int, lo: float, hi: float) -> float | None:
        times = fires.get(nid, [])
        k = bisect_right(times, hi + _MATCH_TOL)
        if k and times[k - 1] >= lo - _MATCH_TOL:
            return times[k - 1]
        return None

    def sensor_time(nid: int, t_fire: float) -> float | None:
        n = circuit.neuron(nid)
        if n.kind is NeuronKind.SENSOR:
            return t_fire
        exc = [c for c in circuit.incoming(nid) if c.excitatory]
        if len(exc) != 1:
            return None
        c = exc[0]
        t = latest_in(c.src, t_fire - c.delay, t_fire - c.delay)
        return None if t is None else sensor_time(c.src, t)

    out: list[Detection] = []
    for r in result.fire_log:
        if r.kind != NeuronKind.COMBINED.value:
            continue
        node = circuit.neuron(r.neuron_id)
        exc = [c for c in circuit.incoming(r.neuron_id) if c.excitatory]
        try:
            window = coincidence_window(node.params.tau, exc[0].weight, node.params.theta)
        except (InvalidParameterError, IndexError):
            window = 0.0
        roots = []
        for c in exc:
            t_up = latest_in(c.src, r.time - c.delay - window, r.time - c.delay)
            root = None if t_up is None else sensor_time(c.src, t_up)
            if root is None:
                break
            roots.append(root)
        else:
            out.append(Detection(r.neuron_id, r.time, r.time - max(roots)))
    return out


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return 1.0 if a == 0 else math.inf
    return a / b


@dataclass(frozen=True)
class ComparisonReport:
    integrated_potential: tuple[float, float]
    peak_active_fraction: tuple[float, float]
    detector_neurons: tuple[int, int]
    detection_latencies: tuple[tuple[float, ...], tuple[float, ...]]
    potential_ratio: float
    peak_active_fraction_ratio: float

    def mean_latency(self, which: int) -> float:
        lat = self.detection_latencies[which]
        return sum(lat) / len(lat) if lat else math.nan


def _same_scenario(a: SimResult, b: SimResult) -> bool:
    if a.t_end != b.t_end or a.dt_sample != b.dt_sample:
        return False
    key = lambda ev: (ev.time, ev.dst, ev.weight)  # noqa: E731
    return sorted(map(key, a.stimulus)) == sorted(map(key, b.stimulus))


def compare(a: SimResult, b: SimResult) -> ComparisonReport:
    """Ratios are ``a / b``; two zeros compare as 1.0."""
    if not _same_scenario(a, b):
        raise ComparisonError("results come from different stimuli or sampling")
    ta, tb = potential_trace(a), potential_trace(b)
    return ComparisonReport(
        integrated_potential=(ta.integrated_potential, tb.integrated_potential),
        peak_active_fraction=(ta.peak_active_fraction, tb.peak_active_fraction),
        detector_neurons=(neuron_count(a.circuit).detector_neurons,
                          neuron_count(b.circuit).detector_neurons),
        detection_latencies=(tuple(d.latency for d in detection_latencies(a)),
                             tuple(d.latency for d in detection_latencies(b))),
        potential_ratio=_ratio(ta.integrated_potential, tb.integrated_potential),
        peak_active_fraction_ratio=_ratio(ta.peak_active_fraction, tb.peak_active_fraction),
    )
