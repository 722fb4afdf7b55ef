"""Detector circuits as explicit weighted, delayed graphs.

Two families are built here:

* the bi-directional detector: per direction, one *simple* neuron per
  adjacent sensor pair (excited by one sensor, inhibited by its neighbour)
  and one *combined* coincidence neuron per adjacent simple pair;
* the Braitenberg-style prototype: per direction, one *relay* neuron per
  adjacent sensor pair plus one coincidence neuron fed by the relay and by a
  long delay line straight from the other sensor.

Sensors always take ids ``0 .. n_sensors - 1`` (left to right); detector
neurons follow.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from .errors import InvalidParameterError

# Relative tolerance for the delay-plan identity; the builders compute it
# with a single addition so it only ever absorbs one rounding step.
PLAN_RTOL = 1e-12


class NeuronKind(str, Enum):
    SENSOR = "Sensor"
    SIMPLE = "Simple"
    COMBINED = "Combined"
    RELAY = "Relay"


class Subcircuit(str, Enum):
    L2R = "L2R"
    R2L = "R2L"
    NONE = "None"


class CircuitFamily(str, Enum):
    BIDIRECTIONAL = "Bidirectional"
    PROTOTYPE_L2R = "PrototypeL2R"
    PROTOTYPE_R2L = "PrototypeR2L"
    PROTOTYPE_PAIR = "PrototypePair"
    # hand-assembled graphs used by tests and experiments
    CUSTOM = "Custom"


@dataclass(frozen=True)
class NeuronParams:
    tau: float
    theta: float
    t_ref: float = 0.0

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise InvalidParameterError(f"tau must be > 0, got {self.tau}")
        if not self.theta > 0:
            raise InvalidParameterError(f"theta must be > 0, got {self.theta}")
        if not self.t_ref >= 0:
            raise InvalidParameterError(f"t_ref must be >= 0, got {self.t_ref}")


@dataclass(frozen=True)
class NeuronSpec:
    id: int
    kind: NeuronKind
    subcircuit: Subcircuit
    index: int
    params: NeuronParams


@dataclass(frozen=True)
class ConnectionSpec:
    src: int
    dst: int
    weight: float
    delay: float

    def __post_init__(self) -> None:
        if self.weight == 0:
            raise InvalidParameterError("connection weight must be non-zero")
        if not self.delay >= 0:
            raise InvalidParameterError(f"delay must be >= 0, got {self.delay}")

    @property
    def excitatory(self) -> bool:
        return self.weight > 0


@dataclass(frozen=True)
class DelayPlan:
    """Connection latencies (seconds) and the geometry they were tuned for.

    ``delta_RB`` is the long simple-to-combined delay, ``delta_LB`` the short
    one. A plan produced by :func:`tune_delays` satisfies
    ``delta_RB - delta_LB == spacing_R / v_design``; plans built by hand (for
    detuning experiments) may not, which :func:`validate` reports.
    """

    delta_E: float
    delta_I: float
    delta_LB: float
    delta_RB: float
    spacing_R: float
    v_design: float

    def __post_init__(self) -> None:
        for name in ("delta_E", "delta_I", "delta_LB", "delta_RB", "spacing_R", "v_design"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidParameterError(f"{name} must be a finite value > 0, got {value}")

    @property
    def design_gap(self) -> float:
        """Sensor-to-sensor crossing interval R/V at the design velocity."""
        return self.spacing_R / self.v_design


@dataclass(frozen=True)
class CircuitParams:
    """Per-kind neuron parameters and the two synaptic weight magnitudes."""

    sensor: NeuronParams = NeuronParams(tau=1.0, theta=1.0, t_ref=0.0)
    simple: NeuronParams = NeuronParams(tau=1.0, theta=1.0, t_ref=0.3)
    combined: NeuronParams = NeuronParams(tau=0.05, theta=1.8, t_ref=0.3)
    relay: NeuronParams = NeuronParams(tau=0.05, theta=1.0, t_ref=0.3)
    w_exc: float = 1.0
    w_inh: float = 2.0

    def __post_init__(self) -> None:
        if not self.w_exc > 0:
            raise InvalidParameterError(f"w_exc must be > 0, got {self.w_exc}")
        if not self.w_inh >= 0:
            raise InvalidParameterError(f"w_inh must be >= 0, got {self.w_inh}")

    def for_kind(self, kind: NeuronKind) -> NeuronParams:
        return {
            NeuronKind.SENSOR: self.sensor,
            NeuronKind.SIMPLE: self.simple,
            NeuronKind.COMBINED: self.combined,
            NeuronKind.RELAY: self.relay,
        }[kind]


@dataclass(frozen=True)
class CircuitSpec:
    neurons: tuple[NeuronSpec, ...]
    connections: tuple[ConnectionSpec, ...]
    n_sensors: int
    plan: DelayPlan
    family: CircuitFamily
    _by_id: dict[int, NeuronSpec] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "neurons", tuple(self.neurons))
        object.__setattr__(self, "connections", tuple(self.connections))
        object.__setattr__(self, "_by_id", {n.id: n for n in self.neurons})

    def neuron(self, neuron_id: int) -> NeuronSpec:
        return self._by_id[neuron_id]

    def incoming(self, neuron_id: int) -> list[ConnectionSpec]:
        return [c for c in self.connections if c.dst == neuron_id]

    def outgoing(self, neuron_id: int) -> list[ConnectionSpec]:
        return [c for c in self.connections if c.src == neuron_id]

    def of_kind(self, kind: NeuronKind, subcircuit: Subcircuit | None = None) -> list[NeuronSpec]:
        return [
            n
            for n in self.neurons
            if n.kind is kind and (subcircuit is None or n.subcircuit is subcircuit)
        ]

    @property
    def sensors(self) -> list[NeuronSpec]:
        return sorted(self.of_kind(NeuronKind.SENSOR), key=lambda n: n.index)

    @property
    def detector_neurons(self) -> list[NeuronSpec]:
        return [n for n in self.neurons if n.kind is not NeuronKind.SENSOR]


# --------------------------------------------------------------------------
# Delay tuning


def tune_delays(
    spacing_R: float,
    v_design: float,
    delta_LB: float,
    delta_E: float,
    delta_I: float,
) -> DelayPlan:
    """Return the plan whose long/short delay difference equals R / v_design."""
    args = dict(spacing_R=spacing_R, v_design=v_design, delta_LB=delta_LB,
                delta_E=delta_E, delta_I=delta_I)
    for name, value in args.items():
        if not (value > 0 and math.isfinite(value)):
            raise InvalidParameterError(f"{name} must be a finite value > 0, got {value}")
    return DelayPlan(
        delta_E=delta_E,
        delta_I=delta_I,
        delta_LB=delta_LB,
        delta_RB=delta_LB + spacing_R / v_design,
        spacing_R=spacing_R,
        v_design=v_design,
    )


def default_plan() -> DelayPlan:
    return tune_delays(spacing_R=0.1, v_design=0.5, delta_LB=0.01, delta_E=0.05, delta_I=0.05)


def coincidence_window(tau: float, weight: float, theta: float) -> float:
    """Largest arrival gap for which two pulses of ``weight`` reach ``theta``.

    Solves ``weight * exp(-eps / tau) + weight == theta`` for a neuron that
    starts at rest. Requires ``weight < theta <= 2 * weight``.
    """
    if not weight < theta <= 2 * weight:
        raise InvalidParameterError(
            f"coincidence needs weight < theta <= 2*weight (weight={weight}, theta={theta})"
        )
    return tau * math.log(weight / (theta - weight))


# --------------------------------------------------------------------------
# Builders


class _Builder:
    def __init__(self, n_sensors: int, plan: DelayPlan, params: CircuitParams):
        self.plan = plan
        self.params = params
        self.neurons: list[NeuronSpec] = []
        self.connections: list[ConnectionSpec] = []
        self.sensor_ids = [
            self.add(NeuronKind.SENSOR, Subcircuit.NONE, i) for i in range(n_sensors)
        ]

    def add(self, kind: NeuronKind, subcircuit: Subcircuit, index: int) -> int:
        nid = len(self.neurons)
        self.neurons.append(NeuronSpec(nid, kind, subcircuit, index, self.params.for_kind(kind)))
        return nid

    def connect(self, src: int, dst: int, weight: float, delay: float) -> None:
        if weight == 0:
            return
        self.connections.append(ConnectionSpec(src, dst, weight, delay))

    def finish(self, family: CircuitFamily) -> CircuitSpec:
        return CircuitSpec(
            neurons=tuple(self.neurons),
            connections=tuple(self.connections),
            n_sensors=len(self.sensor_ids),
            plan=self.plan,
            family=family,
        )


def _bidirectional_half(b: _Builder, direction: Subcircuit) -> None:
    plan, w_e, w_i = b.plan, b.params.w_exc, b.params.w_inh
    s = b.sensor_ids
    n = len(s)
    simple = [b.add(NeuronKind.SIMPLE, direction, i) for i in range(n - 1)]
    combined = [b.add(NeuronKind.COMBINED, direction, i) for i in range(n - 2)]
    for i, p in enumerate(simple):
        if direction is Subcircuit.L2R:
            exc_src, inh_src = s[i], s[i + 1]
        else:
            exc_src, inh_src = s[i + 1], s[i]
        b.connect(exc_src, p, w_e, plan.delta_E)
        # w_inh == 0 leaves the simple neuron without inhibition; validate() flags it
        b.connect(inh_src, p, -w_i, plan.delta_I)
    for i, c in enumerate(combined):
        # the simple neuron that fires first feeds the long delay line
        if direction is Subcircuit.L2R:
            first, second = simple[i], simple[i + 1]
        else:
            first, second = simple[i + 1], simple[i]
        b.connect(first, c, w_e, plan.delta_RB)
        b.connect(second, c, w_e, plan.delta_LB)


def _prototype_half(b: _Builder, direction: Subcircuit) -> None:
    plan, w_e = b.plan, b.params.w_exc
    s = b.sensor_ids
    n = len(s)
    relays = [b.add(NeuronKind.RELAY, direction, i) for i in range(n - 1)]
    combined = [b.add(NeuronKind.COMBINED, direction, i) for i in range(n - 1)]
    long_delay = plan.delta_E + plan.design_gap + plan.delta_LB
    for i, (d, c) in enumerate(zip(relays, combined)):
        if direction is Subcircuit.L2R:
            early, late = s[i], s[i + 1]
        else:
            early, late = s[i + 1], s[i]
        b.connect(late, d, w_e, plan.delta_E)
        b.connect(d, c, w_e, plan.delta_LB)
        b.connect(early, c, w_e, long_delay)


def build_bidirectional(
    n_sensors: int, plan: DelayPlan, params: CircuitParams | None = None
) -> CircuitSpec:
    if n_sensors < 3:
        raise InvalidParameterError(
            f"bi-directional detector needs at least 3 sensors, got {n_sensors}"
        )
    b = _Builder(n_sensors, plan, params or CircuitParams())
    _bidirectional_half(b, Subcircuit.L2R)
    _bidirectional_half(b, Subcircuit.R2L)
    return b.finish(CircuitFamily.BIDIRECTIONAL)


def build_prototype(
    n_sensors: int,
    direction: Subcircuit,
    plan: DelayPlan,
    params: CircuitParams | None = None,
) -> CircuitSpec:
    if n_sensors < 2:
        raise InvalidParameterError(f"prototype detector needs at least 2 sensors, got {n_sensors}")
    direction = Subcircuit(direction)
    if direction is Subcircuit.NONE:
        raise InvalidParameterError("prototype direction must be L2R or R2L")
    b = _Builder(n_sensors, plan, params or CircuitParams())
    _prototype_half(b, direction)
    family = (
        CircuitFamily.PROTOTYPE_L2R if direction is Subcircuit.L2R else CircuitFamily.PROTOTYPE_R2L
    )
    return b.finish(family)


def build_prototype_pair(
    n_sensors: int, plan: DelayPlan, params: CircuitParams | None = None
) -> CircuitSpec:
    """Both prototype directions mounted side by side on one sensor row."""
    if n_sensors < 2:
        raise InvalidParameterError(f"prototype detector needs at least 2 sensors, got {n_sensors}")
    b = _Builder(n_sensors, plan, params or CircuitParams())
    _prototype_half(b, Subcircuit.L2R)
    _prototype_half(b, Subcircuit.R2L)
    return b.finish(CircuitFamily.PROTOTYPE_PAIR)


def build(
    family: CircuitFamily | str,
    n_sensors: int,
    plan: DelayPlan,
    params: CircuitParams | None = None,
) -> CircuitSpec:
    family = CircuitFamily(family)
    if family is CircuitFamily.BIDIRECTIONAL:
        return build_bidirectional(n_sensors, plan, params)
    if family is CircuitFamily.PROTOTYPE_PAIR:
        return build_prototype_pair(n_sensors, plan, params)
    if family is CircuitFamily.PROTOTYPE_L2R:
        return build_prototype(n_sensors, Subcircuit.L2R, plan, params)
    if family is CircuitFamily.PROTOTYPE_R2L:
        return build_prototype(n_sensors, Subcircuit.R2L, plan, params)
    raise InvalidParameterError(f"no builder for family {family.value}")


# --------------------------------------------------------------------------
# Counting and validation


@dataclass(frozen=True)
class NeuronCount:
    sensors: int
    detector_neurons: int
    by_kind: dict[str, int]


def neuron_count(circuit: CircuitSpec) -> NeuronCount:
    """Count neurons; sensors are shared front-end and not detector neurons."""
    by_kind = Counter(n.kind.value for n in circuit.neurons)
    sensors = by_kind.get(NeuronKind.SENSOR.value, 0)
    return NeuronCount(
        sensors=sensors,
        detector_neurons=len(circuit.neurons) - sensors,
        by_kind=dict(sorted(by_kind.items())),
    )


class Violation(NamedTuple):
    check: str  # "structure" | "blocking" | "window" | "plan"
    message: str

    def __str__(self) -> str:
        return f"{self.check}: {self.message}"


def structural_errors(circuit: CircuitSpec) -> list[Violation]:
    out: list[Violation] = []

    def bad(msg: str) -> None:
        out.append(Violation("structure", msg))

    ids = [n.id for n in circuit.neurons]
    dupes = sorted(i for i, k in Counter(ids).items() if k > 1)
    if dupes:
        bad(f"duplicate neuron ids {dupes}")
    by_id = {n.id: n for n in circuit.neurons}

    sensors = [n for n in circuit.neurons if n.kind is NeuronKind.SENSOR]
    if sorted(n.index for n in sensors) != list(range(circuit.n_sensors)):
        bad(f"sensors must be indexed 0..{circuit.n_sensors - 1}")
    for n in sensors:
        if n.subcircuit is not Subcircuit.NONE:
            bad(f"sensor {n.id} has subcircuit {n.subcircuit.value}")

    pairs = Counter((c.src, c.dst) for c in circuit.connections)
    for (src, dst), k in sorted(pairs.items()):
        if k > 1:
            bad(f"connection {src}->{dst} appears {k} times")
    for c in circuit.connections:
        if c.src not in by_id or c.dst not in by_id:
            bad(f"connection {c.src}->{c.dst} references a missing neuron")
        elif by_id[c.dst].kind is NeuronKind.SENSOR:
            bad(f"sensor {c.dst} has an incoming connection from {c.src}")

    # Kahn's algorithm over the detector-only subgraph
    nodes = {n.id for n in circuit.neurons if n.kind is not NeuronKind.SENSOR}
    succ: dict[int, list[int]] = defaultdict(list)
    indeg = {i: 0 for i in nodes}
    for c in circuit.connections:
        if c.src in nodes and c.dst in nodes:
            succ[c.src].append(c.dst)
            indeg[c.dst] += 1
    ready = [i for i, d in indeg.items() if d == 0]
    seen = 0
    while ready:
        i = ready.pop()
        seen += 1
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    if seen != len(nodes):
        bad("detector subgraph contains a cycle")
    return out


def _blocking_violations(
    circuit: CircuitSpec, v_min: float, v_max: float
) -> list[Violation]:
    out: list[Violation] = []
    R = circuit.plan.spacing_R
    for n in circuit.of_kind(NeuronKind.SIMPLE):
        p = n.params
        inc = circuit.incoming(n.id)
        exc = [c for c in inc if c.excitatory]
        inh = [c for c in inc if not c.excitatory]
        if len(exc) != 1:
            out.append(Violation("blocking", f"simple neuron {n.id} has {len(exc)} excitatory inputs"))
            continue
        w_e, d_e = exc[0].weight, exc[0].delay
        if w_e < p.theta:
            out.append(Violation(
                "blocking", f"simple neuron {n.id} cannot be activated by one stimulus "
                f"(w_e={w_e} < theta={p.theta})"))
        if not inh:
            out.append(Violation(
                "blocking", f"simple neuron {n.id} has no inhibitory input; "
                f"residual w_e={w_e} >= theta={p.theta} in the wrong direction"))
            continue
        w_i, d_i = -inh[0].weight, inh[0].delay
        # wrong direction: inhibition leads excitation by R/v + d_e - d_i,
        # smallest at v_max, most decayed at v_min
        lead_fast = R / v_max + d_e - d_i
        lead_slow = R / v_min + d_e - d_i
        if lead_fast <= 0:
            out.append(Violation(
                "blocking", f"simple neuron {n.id}: at v={v_max} excitation arrives "
                f"{-lead_fast:.6g} s before inhibition"))
            continue
        residual = w_e - w_i * math.exp(-lead_slow / p.tau)
        if residual >= p.theta:
            out.append(Violation(
                "blocking", f"simple neuron {n.id}: wrong-direction residual {residual:.6g} "
                f">= theta {p.theta} at v={v_min}"))
        # right direction: excitation must land before the neighbour's inhibition
        if not d_e < R / v_max + d_i:
            out.append(Violation(
                "blocking", f"simple neuron {n.id}: inhibition pre-empts excitation "
                f"in the preferred direction at v={v_max}"))
    return out


def _window_violations(circuit: CircuitSpec, v_max: float) -> list[Violation]:
    out: list[Violation] = []
    R = circuit.plan.spacing_R
    for n in circuit.of_kind(NeuronKind.COMBINED):
        exc = [c for c in circuit.incoming(n.id) if c.excitatory]
        if len(exc) != 2 or exc[0].weight != exc[1].weight:
            out.append(Violation(
                "window", f"combined neuron {n.id} needs two equal excitatory inputs"))
            continue
        w = exc[0].weight
        try:
            eps = coincidence_window(n.params.tau, w, n.params.theta)
        except InvalidParameterError as err:
            out.append(Violation("window", f"combined neuron {n.id}: {err}"))
            continue
        if not eps < 2 * R / v_max:
            out.append(Violation(
                "window", f"combined neuron {n.id}: window {eps:.6g} s not below "
                f"2R/v_max = {2 * R / v_max:.6g} s"))
    return out


def _plan_violations(plan: DelayPlan) -> list[Violation]:
    out: list[Violation] = []
    if plan.delta_I < 0:
        out.append(Violation("plan", f"delta_I = {plan.delta_I} < 0"))
    lhs = plan.delta_RB - plan.delta_LB
    if not math.isclose(lhs, plan.design_gap, rel_tol=PLAN_RTOL, abs_tol=1e-15):
        out.append(Violation(
            "plan", f"delta_RB - delta_LB = {lhs!r} differs from R/v_design = {plan.design_gap!r}"))
    return out


def validate(circuit: CircuitSpec, v_min: float, v_max: float) -> list[Violation]:
    """Collect every violated operating condition over ``[v_min, v_max]``.

    An empty list means the circuit is structurally sound, blocks the wrong
    direction at every velocity in range, has a coincidence window narrower
    than twice the fastest crossing interval, and carries a tuned plan.
    """
    v_design = circuit.plan.v_design
    if not 0 < v_min <= v_design <= v_max:
        raise InvalidParameterError(
            f"need 0 < v_min <= v_design <= v_max, got {v_min}, {v_design}, {v_max}"
        )
    out = structural_errors(circuit)
    if out:
        return out
    out += _blocking_violations(circuit, v_min, v_max)
    out += _window_violations(circuit, v_max)
    out += _plan_violations(circuit.plan)
    return out


# --------------------------------------------------------------------------
# Netlist export


def to_netlist(circuit: CircuitSpec) -> str:
    lines = []
    for n in sorted(circuit.neurons, key=lambda n: n.id):
        p = n.params
        lines.append(
            f"N {n.id} {n.kind.value} {n.subcircuit.value} {n.index} "
            f"{p.tau!r} {p.theta!r} {p.t_ref!r}"
        )
    for c in sorted(circuit.connections, key=lambda c: (c.src, c.dst)):
        lines.append(f"C {c.src} {c.dst} {c.weight!r} {c.delay!r}")
    return "\n".join(lines) + "\n"
