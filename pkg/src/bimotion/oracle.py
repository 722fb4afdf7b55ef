"""Independent references for the event engine.

``predict_fires`` / ``predict_timeline`` evaluate the closed-form activation
times of a single constant-velocity crossing: simple neurons fire one
excitatory delay after their sensor unless a neighbour's inhibition got there
first, and a combined neuron fires iff its two arrivals fall inside the
coincidence window.

``dense_simulate`` integrates the same neuron model on a fixed time grid.
Spikes keep their exact (sub-step) timestamps for scheduling, but decay,
delivery and threshold checks all happen at step boundaries; reported fire
times are the step boundary, so they trail the exact time by less than ``dt``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .circuit import (
    CircuitSpec,
    ConnectionSpec,
    NeuronKind,
    Subcircuit,
    coincidence_window,
    structural_errors,
)
from .engine import FireRecord, SimResult, SpikeEvent, sample_grid
from .errors import InvalidParameterError, UnsupportedScenarioError
from .stimulus import Scenario, scenario_events, sensor_spike_times


@dataclass(frozen=True)
class ActivationTimeline:
    neuron_id: int
    index: int
    subcircuit: Subcircuit
    t0: float
    A_L: float
    A_R: float
    C_L: float
    C_R: float
    fires: bool

    @property
    def mismatch(self) -> float:
        return self.C_L - self.C_R


def _topological(circuit: CircuitSpec) -> list[int]:
    preds: dict[int, set[int]] = defaultdict(set)
    for c in circuit.connections:
        preds[c.dst].add(c.src)
    done: set[int] = set()
    order: list[int] = []

    def visit(nid: int) -> None:
        if nid in done:
            return
        done.add(nid)
        for p in sorted(preds[nid]):
            visit(p)
        order.append(nid)

    for n in sorted(circuit.neurons, key=lambda n: n.id):
        visit(n.id)
    return order


def _single_object(scenario: Scenario):
    if len(scenario.objects) != 1:
        raise UnsupportedScenarioError(
            f"analytic timeline covers exactly one object, got {len(scenario.objects)}"
        )
    return scenario.objects[0]


def _window(circuit: CircuitSpec, nid: int, exc: list[ConnectionSpec]) -> float:
    return coincidence_window(circuit.neuron(nid).params.tau, exc[0].weight,
                              circuit.neuron(nid).params.theta)


def predict_fires(circuit: CircuitSpec, scenario: Scenario) -> dict[int, float]:
    """Closed-form fire time of every neuron that fires during one crossing."""
    if structural_errors(circuit):
        raise InvalidParameterError("circuit is structurally invalid")
    traj = _single_object(scenario)
    if scenario.array.n_sensors != circuit.n_sensors:
        raise InvalidParameterError("scenario and circuit disagree on sensor count")
    spikes = sensor_spike_times(traj, scenario.array)

    fired: dict[int, float] = {}
    for s in circuit.sensors:
        times = [t for t in spikes[s.index] if t <= scenario.t_end]
        if times:
            fired[s.id] = times[0]

    for nid in _topological(circuit):
        n = circuit.neuron(nid)
        if n.kind is NeuronKind.SENSOR:
            continue
        p = n.params
        inc = circuit.incoming(nid)
        exc = [c for c in inc if c.excitatory]
        inh = [c for c in inc if not c.excitatory]
        arrivals = sorted(fired[c.src] + c.delay for c in exc if c.src in fired)

        if n.kind in (NeuronKind.RELAY, NeuronKind.SIMPLE):
            if len(exc) != 1 or len(inh) > 1:
                raise UnsupportedScenarioError(f"neuron {nid} is not a single-input unit")
            if not arrivals:
                continue
            a_exc = arrivals[0]
            u = exc[0].weight
            if inh and inh[0].src in fired:
                a_inh = fired[inh[0].src] + inh[0].delay
                if a_inh <= a_exc:
                    u += inh[0].weight * math.exp(-(a_exc - a_inh) / p.tau)
            t_fire = a_exc if u >= p.theta else None
        elif n.kind is NeuronKind.COMBINED:
            if len(exc) != 2 or inh:
                raise UnsupportedScenarioError(f"neuron {nid} is not a two-input coincidence unit")
            if len(arrivals) < 2:
                continue
            eps = _window(circuit, nid, exc)
            t_fire = arrivals[1] if arrivals[1] - arrivals[0] <= eps else None
        else:  # pragma: no cover - enum is closed
            raise UnsupportedScenarioError(f"unknown neuron kind {n.kind}")

        if t_fire is not None and t_fire <= scenario.t_end:
            fired[nid] = t_fire
    return fired


def motion_subcircuit(velocity: float) -> Subcircuit:
    return Subcircuit.L2R if velocity > 0 else Subcircuit.R2L


def predict_timeline(circuit: CircuitSpec, scenario: Scenario) -> list[ActivationTimeline]:
    """Per-unit activation times for the subcircuit matching the motion.

    Only combined neurons whose two upstream units both activate are listed.
    ``fires`` also requires the opposite subcircuit to stay silent.
    """
    traj = _single_object(scenario)
    fired = predict_fires(circuit, scenario)
    direction = motion_subcircuit(traj.velocity)
    opposite_silent = not any(
        n.id in fired
        for n in circuit.of_kind(NeuronKind.COMBINED)
        if n.subcircuit is not direction
    )

    def root_time(src: int) -> float:
        n = circuit.neuron(src)
        if n.kind is NeuronKind.SENSOR:
            return fired[src]
        upstream = [c for c in circuit.incoming(src) if c.excitatory][0]
        return fired[upstream.src]

    out: list[ActivationTimeline] = []
    for n in sorted(circuit.of_kind(NeuronKind.COMBINED, direction), key=lambda n: n.index):
        exc = sorted((c for c in circuit.incoming(n.id) if c.excitatory), key=lambda c: -c.delay)
        long_in, short_in = exc
        if long_in.src not in fired or short_in.src not in fired:
            continue
        A_L, A_R = fired[long_in.src], fired[short_in.src]
        C_L, C_R = A_L + long_in.delay, A_R + short_in.delay
        eps = _window(circuit, n.id, exc)
        out.append(ActivationTimeline(
            neuron_id=n.id,
            index=n.index,
            subcircuit=direction,
            t0=root_time(long_in.src),
            A_L=A_L,
            A_R=A_R,
            C_L=C_L,
            C_R=C_R,
            fires=abs(C_L - C_R) <= eps and opposite_silent and max(C_L, C_R) <= scenario.t_end,
        ))
    return out


def dense_simulate(
    circuit: CircuitSpec,
    scenario: Scenario,
    dt: float,
    dt_sample: float = 1e-3,
    theta_active: float = 0.5,
    stimulus: Sequence[SpikeEvent] | None = None,
) -> SimResult:
    """Fixed-step reference simulation of ``scenario`` on ``circuit``.

    ``stimulus`` overrides the sensor events derived from the scenario; the
    scenario then only supplies ``t_end``.
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be > 0, got {dt}")
    min_delay = min((c.delay for c in circuit.connections), default=math.inf)
    if dt >= min_delay:
        raise InvalidParameterError(f"dt={dt} must be below the shortest delay {min_delay}")
    if structural_errors(circuit):
        raise InvalidParameterError("circuit is structurally invalid")

    t_end = scenario.t_end
    stimulus = tuple(scenario_events(scenario) if stimulus is None else stimulus)
    ids = [n.id for n in circuit.neurons]
    slot = {nid: k for k, nid in enumerate(ids)}
    specs = list(circuit.neurons)
    u = np.zeros(len(ids))
    leak = np.exp(-dt / np.array([n.params.tau for n in specs]))
    theta = [n.params.theta for n in specs]
    t_ref = [n.params.t_ref for n in specs]
    refractory_until = [-math.inf] * len(ids)
    out_edges: list[list[tuple[int, float, float]]] = [[] for _ in ids]
    for c in circuit.connections:
        out_edges[slot[c.src]].append((slot[c.dst], c.weight, c.delay))

    def step_of(t: float) -> int:
        return max(0, math.ceil(t / dt - 1e-7))

    pending: dict[int, list[tuple[float, int, int, float]]] = defaultdict(list)
    order = 0
    for ev in stimulus:
        pending[step_of(ev.time)].append((ev.time, slot[ev.dst], order, ev.weight))
        order += 1

    detector = [slot[n.id] for n in specs if n.kind is not NeuronKind.SENSOR]
    sample_times = sample_grid(t_end, dt_sample)
    sample_at: dict[int, list[int]] = defaultdict(list)
    for j, ts in enumerate(sample_times):
        sample_at[int(round(ts / dt))].append(j)
    potentials = np.zeros((len(sample_times), len(detector)))

    fires: list[FireRecord] = []
    n_steps = math.ceil(t_end / dt - 1e-9)
    for k in range(n_steps + 1):
        if k:
            u *= leak
        batch = pending.pop(k, None)
        if batch:
            batch.sort()
            for t_exact, j, _, w in batch:
                if t_exact > t_end or t_exact < refractory_until[j]:
                    continue
                u[j] += w
                if u[j] >= theta[j]:
                    u[j] = 0.0
                    refractory_until[j] = t_exact + t_ref[j]
                    n = specs[j]
                    fires.append(FireRecord(k * dt, n.id, n.kind.value, n.subcircuit.value, n.index))
                    for dst, w2, delay in out_edges[j]:
                        arrival = t_exact + delay
                        pending[step_of(arrival)].append((arrival, dst, order, w2))
                        order += 1
        for row in sample_at.get(k, ()):
            potentials[row] = u[detector]

    fires.sort(key=lambda r: (r.time, r.neuron_id))
    return SimResult(
        circuit=circuit,
        stimulus=stimulus,
        t_end=t_end,
        dt_sample=dt_sample,
        theta_active=theta_active,
        fire_log=tuple(fires),
        detector_ids=tuple(ids[j] for j in detector),
        sample_times=sample_times,
        potentials=potentials,
        engine="dense",
    )
