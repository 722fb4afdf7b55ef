"""Flat INI-style run configuration.

Sections ``[array]``, ``[delays]``, ``[neurons]``, ``[analysis]``,
``[engine]`` and ``[sweep]`` may each appear once; ``[object]`` may repeat,
one block per moving object. Every key is optional. ``#`` starts a comment.

Example::

    [array]
    n_sensors = 5
    spacing = 0.1

    [delays]
    design_velocity = 0.5      # spacing is taken from [array]

    [object]
    velocity = -0.5            # x0 defaults to just outside the row
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .analysis import AnalysisConfig
from .circuit import CircuitFamily, CircuitParams, DelayPlan, NeuronParams, tune_delays
from .errors import ConfigError, InvalidParameterError
from .stimulus import ObjectTrajectory, Scenario, SensorArray, crossing

FAMILY_NAMES = {
    "bidirectional": CircuitFamily.BIDIRECTIONAL,
    "prototype_pair": CircuitFamily.PROTOTYPE_PAIR,
    "prototype_l2r": CircuitFamily.PROTOTYPE_L2R,
    "prototype_r2l": CircuitFamily.PROTOTYPE_R2L,
}

_KINDS = ("sensor", "simple", "combined", "relay")

# key -> (type, default); None default means "derived later"
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "array": {
        "n_sensors": (int, 5),
        "spacing": (float, 0.1),
        "sigma": (float, 0.04),
        "amplitude": (float, 1.0),
        "sensor_threshold": (float, 0.5),
        "hysteresis": (float, 0.5),
        "lateral_sigma": (float, 0.2),
    },
    "delays": {
        "design_velocity": (float, 0.5),
        "delta_e": (float, 0.05),
        "delta_i": (float, 0.05),
        "delta_lb": (float, 0.01),
        "v_min": (float, 0.1),
        "v_max": (float, 2.0),
    },
    "neurons": {
        "w_exc": (float, 1.0),
        "w_inh": (float, 2.0),
        **{
            f"{kind}_{name}": (float, getattr(getattr(CircuitParams(), kind), name))
            for kind in _KINDS
            for name in ("tau", "theta", "t_ref")
        },
    },
    "analysis": {
        "kappa": (float, 0.5),
        "t_epi": (float, 0.1),
        "theta_active": (float, 0.5),
    },
    "engine": {
        "t_end": (float, 2.0),
        "dt_sample": (float, 0.001),
        "dense_dt": (float, 1e-4),
        "family": (str, "bidirectional"),
    },
    "sweep": {
        "v_start": (float, 0.40),
        "v_stop": (float, 0.60),
        "v_step": (float, 0.005),
    },
    "object": {
        "x0": (float, None),
        "velocity": (float, None),
        "t_start": (float, 0.0),
        "distance": (float, 0.0),
    },
}


@dataclass(frozen=True)
class SweepGrid:
    v_start: float = 0.40
    v_stop: float = 0.60
    v_step: float = 0.005

    def values(self) -> list[float]:
        n = int(round((self.v_stop - self.v_start) / self.v_step))
        return [round(self.v_start + k * self.v_step, 12) for k in range(n + 1)]


@dataclass(frozen=True)
class RunConfig:
    array: SensorArray = field(default_factory=SensorArray)
    plan: DelayPlan = field(default_factory=lambda: tune_delays(0.1, 0.5, 0.01, 0.05, 0.05))
    params: CircuitParams = field(default_factory=CircuitParams)
    objects: tuple[ObjectTrajectory, ...] = ()
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    family: CircuitFamily = CircuitFamily.BIDIRECTIONAL
    t_end: float = 2.0
    dt_sample: float = 0.001
    dense_dt: float = 1e-4
    v_min: float = 0.1
    v_max: float = 2.0
    sweep: SweepGrid = field(default_factory=SweepGrid)

    @property
    def scenario(self) -> Scenario:
        return Scenario(array=self.array, objects=self.objects, t_end=self.t_end)


class _Section:
    def __init__(self, name: str, line: int):
        self.name = name
        self.line = line
        self.values: dict[str, object] = {}
        self.lines: dict[str, int] = {}

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        return SCHEMA[self.name][key][1]

    def blame(self, message: str) -> int:
        hits = [k for k in self.lines if k in message]
        return self.lines[max(hits, key=len)] if hits else self.line


def _tokenize(text: str) -> list[_Section]:
    sections: list[_Section] = []
    current: _Section | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in SCHEMA:
                raise ConfigError(f"unknown section [{name}]", lineno)
            if name != "object" and any(s.name == name for s in sections):
                raise ConfigError(f"section [{name}] appears twice", lineno)
            current = _Section(name, lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if current is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        schema = SCHEMA[current.name]
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in [{current.name}]", lineno)
        if key in current.values:
            raise ConfigError(f"duplicate key {key!r} in [{current.name}]", lineno)
        kind = schema[key][0]
        try:
            current.values[key] = kind(value)
        except ValueError:
            raise ConfigError(f"{key} expects {kind.__name__}, got {value!r}", lineno) from None
        current.lines[key] = lineno
    return sections


def parse_config(text: str) -> RunConfig:
    sections = _tokenize(text)
    single = {s.name: s for s in sections if s.name != "object"}
    sec = {name: single.get(name) or _Section(name, 0) for name in SCHEMA if name != "object"}

    def build(section: _Section, factory):
        try:
            return factory()
        except InvalidParameterError as err:
            raise ConfigError(str(err), section.blame(str(err)) or None) from None

    a = sec["array"]
    array = build(a, lambda: SensorArray(
        n_sensors=a.get("n_sensors"),
        spacing_R=a.get("spacing"),
        sigma=a.get("sigma"),
        amplitude=a.get("amplitude"),
        sensor_threshold=a.get("sensor_threshold"),
        hysteresis=a.get("hysteresis"),
        lateral_sigma=a.get("lateral_sigma"),
    ))

    d = sec["delays"]
    plan = build(d, lambda: tune_delays(
        spacing_R=array.spacing_R,
        v_design=d.get("design_velocity"),
        delta_LB=d.get("delta_lb"),
        delta_E=d.get("delta_e"),
        delta_I=d.get("delta_i"),
    ))

    nsec = sec["neurons"]
    params = build(nsec, lambda: CircuitParams(
        w_exc=nsec.get("w_exc"),
        w_inh=nsec.get("w_inh"),
        **{
            kind: NeuronParams(
                tau=nsec.get(f"{kind}_tau"),
                theta=nsec.get(f"{kind}_theta"),
                t_ref=nsec.get(f"{kind}_t_ref"),
            )
            for kind in _KINDS
        },
    ))

    an = sec["analysis"]
    analysis = build(an, lambda: AnalysisConfig(
        kappa=an.get("kappa"), t_epi=an.get("t_epi"), theta_active=an.get("theta_active")
    ))

    e = sec["engine"]
    family_name = e.get("family")
    if family_name not in FAMILY_NAMES:
        raise ConfigError(
            f"family must be one of {sorted(FAMILY_NAMES)}, got {family_name!r}",
            e.lines.get("family"),
        )
    for key in ("t_end", "dt_sample", "dense_dt"):
        if not e.get(key) > 0:
            raise ConfigError(f"{key} must be > 0", e.lines.get(key) or None)

    v_min, v_max = d.get("v_min"), d.get("v_max")
    if not 0 < v_min <= plan.v_design <= v_max:
        raise ConfigError(
            "need 0 < v_min <= design_velocity <= v_max", d.lines.get("v_min") or d.line or None
        )

    sw = sec["sweep"]
    if not (sw.get("v_step") > 0 and 0 < sw.get("v_start") <= sw.get("v_stop")):
        raise ConfigError("sweep needs 0 < v_start <= v_stop and v_step > 0", sw.line or None)
    sweep = SweepGrid(sw.get("v_start"), sw.get("v_stop"), sw.get("v_step"))

    objects = []
    for s in (s for s in sections if s.name == "object"):
        velocity = s.get("velocity")
        if velocity is None:
            velocity = plan.v_design

        def make(s=s, velocity=velocity):
            if velocity == 0:
                raise InvalidParameterError("velocity must be non-zero")
            x0 = s.get("x0")
            if x0 is None:
                x0 = crossing(array, velocity).x0
            return ObjectTrajectory(
                x0=x0, velocity=velocity, t_start=s.get("t_start"), distance_d=s.get("distance")
            )

        objects.append(build(s, make))
    if not any(s.name == "object" for s in sections):
        objects.append(crossing(array, plan.v_design))

    config = RunConfig(
        array=array,
        plan=plan,
        params=params,
        objects=tuple(objects),
        analysis=analysis,
        family=FAMILY_NAMES[family_name],
        t_end=e.get("t_end"),
        dt_sample=e.get("dt_sample"),
        dense_dt=e.get("dense_dt"),
        v_min=v_min,
        v_max=v_max,
        sweep=sweep,
    )
    try:
        config.scenario
    except InvalidParameterError as err:
        raise ConfigError(str(err), e.lines.get("t_end") or None) from None
    return config


def default_config() -> RunConfig:
    return parse_config("")
