"""Event-driven leaky integrate-and-fire simulation over a :class:`CircuitSpec`.

Membrane potentials are only touched when a spike arrives; between arrivals
they are decayed analytically. Pending spikes live in a binary heap keyed on
``(time, dst, seq)`` so simultaneous arrivals are processed in a fixed order.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .circuit import CircuitSpec, NeuronKind, NeuronParams, structural_errors
from .errors import InvalidParameterError

STIMULUS_SRC = -1


class SpikeEvent(NamedTuple):
    time: float
    dst: int
    weight: float
    src: int = STIMULUS_SRC
    seq: int = 0


class FireRecord(NamedTuple):
    time: float
    neuron_id: int
    kind: str
    subcircuit: str
    index: int


@dataclass
class NeuronState:
    u: float = 0.0
    last_update: float = 0.0
    refractory_until: float = -math.inf
    fire_times: list[float] = field(default_factory=list)


def decay(u: float, t_last: float, t: float, tau: float) -> float:
    if t < t_last:
        raise RuntimeError(f"event ordering broken: decay from {t_last} back to {t}")
    if u == 0.0 or t == t_last:
        return u
    return u * math.exp(-(t - t_last) / tau)


def deliver(state: NeuronState, params: NeuronParams, weight: float, t: float) -> bool:
    """Apply one input pulse at time ``t``; returns True if the neuron fires.

    ``state`` is updated in place. Inputs landing inside the refractory
    period are dropped.
    """
    if t < state.refractory_until:
        state.last_update = t
        return False
    state.u = decay(state.u, state.last_update, t, params.tau) + weight
    state.last_update = t
    if state.u >= params.theta:
        state.u = 0.0
        state.refractory_until = t + params.t_ref
        state.fire_times.append(t)
        return True
    return False


@dataclass(frozen=True)
class SimResult:
    """Output of one simulation run.

    ``potentials`` holds the sampled membrane potential of every detector
    neuron (rows follow ``sample_times``, columns follow ``detector_ids``).
    ``total_potential`` is the row sum of the positive part; ``active_count``
    counts entries at or above ``theta_active``.
    """

    circuit: CircuitSpec
    stimulus: tuple[SpikeEvent, ...]
    t_end: float
    dt_sample: float
    theta_active: float
    fire_log: tuple[FireRecord, ...]
    detector_ids: tuple[int, ...]
    sample_times: np.ndarray
    potentials: np.ndarray
    engine: str = "event"

    @property
    def total_potential(self) -> np.ndarray:
        return np.clip(self.potentials, 0.0, None).sum(axis=1)

    @property
    def active_count(self) -> np.ndarray:
        return (self.potentials >= self.theta_active).sum(axis=1)

    @property
    def active_fraction(self) -> np.ndarray:
        n = len(self.detector_ids)
        if n == 0:
            return np.zeros(len(self.sample_times))
        return self.active_count / n

    def fires_of(self, neuron_id: int) -> list[float]:
        return [r.time for r in self.fire_log if r.neuron_id == neuron_id]


def sample_grid(t_end: float, dt_sample: float) -> np.ndarray:
    n = int(math.floor(t_end / dt_sample + 1e-9)) + 1
    return np.arange(n) * dt_sample


def check_run_args(circuit: CircuitSpec, stimulus, t_end: float, dt_sample: float) -> None:
    if not t_end > 0:
        raise InvalidParameterError(f"t_end must be > 0, got {t_end}")
    if not dt_sample > 0:
        raise InvalidParameterError(f"dt_sample must be > 0, got {dt_sample}")
    errors = structural_errors(circuit)
    if errors:
        raise InvalidParameterError("; ".join(map(str, errors)))
    sensors = {n.id for n in circuit.neurons if n.kind is NeuronKind.SENSOR}
    for ev in stimulus:
        if not 0 <= ev.time <= t_end:
            raise InvalidParameterError(f"stimulus time {ev.time} outside [0, {t_end}]")
        if ev.dst not in sensors:
            raise InvalidParameterError(f"stimulus targets non-sensor neuron {ev.dst}")


def run(
    circuit: CircuitSpec,
    stimulus: list[SpikeEvent] | tuple[SpikeEvent, ...],
    t_end: float,
    dt_sample: float,
    theta_active: float = 0.5,
) -> SimResult:
    stimulus = tuple(stimulus)
    check_run_args(circuit, stimulus, t_end, dt_sample)

    neurons = {n.id: n for n in circuit.neurons}
    states = {nid: NeuronState() for nid in neurons}
    fanout: dict[int, list[tuple[int, float, float]]] = {nid: [] for nid in neurons}
    for c in circuit.connections:
        fanout[c.src].append((c.dst, c.weight, c.delay))

    detector_ids = tuple(n.id for n in circuit.neurons if n.kind is not NeuronKind.SENSOR)
    det_states = [states[i] for i in detector_ids]
    det_tau = [neurons[i].params.tau for i in detector_ids]
    sample_times = sample_grid(t_end, dt_sample)
    potentials = np.zeros((len(sample_times), len(detector_ids)))
    next_sample = 0

    def take_samples(before: float, inclusive: bool) -> None:
        nonlocal next_sample
        while next_sample < len(sample_times):
            ts = sample_times[next_sample]
            if ts > before or (ts == before and not inclusive):
                break
            row = potentials[next_sample]
            for j, (st, tau) in enumerate(zip(det_states, det_tau)):
                row[j] = decay(st.u, st.last_update, ts, tau)
            next_sample += 1

    queue: list[tuple[float, int, int, float, int]] = []
    seq = 0
    for ev in sorted(stimulus, key=lambda e: (e.time, e.dst, e.seq)):
        heapq.heappush(queue, (ev.time, ev.dst, seq, ev.weight, ev.src))
        seq += 1

    fire_log: list[FireRecord] = []
    while queue:
        t, dst, _, weight, _src = heapq.heappop(queue)
        if t > t_end:
            break
        take_samples(t, inclusive=False)
        spec = neurons[dst]
        if deliver(states[dst], spec.params, weight, t):
            fire_log.append(FireRecord(t, dst, spec.kind.value, spec.subcircuit.value, spec.index))
            for target, w, delay in fanout[dst]:
                heapq.heappush(queue, (t + delay, target, seq, w, dst))
                seq += 1
    take_samples(t_end, inclusive=True)

    fire_log.sort(key=lambda r: (r.time, r.neuron_id))
    return SimResult(
        circuit=circuit,
        stimulus=stimulus,
        t_end=t_end,
        dt_sample=dt_sample,
        theta_active=theta_active,
        fire_log=tuple(fire_log),
        detector_ids=detector_ids,
        sample_times=sample_times,
        potentials=potentials,
    )
