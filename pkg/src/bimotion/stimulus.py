"""Moving objects in front of a linear sensor row, and the spikes they cause.

Each object produces a separable Gaussian stimulus on sensor ``i`` (placed
at ``x_i = i * R``)::

    A * exp(-d**2 / (2 * lateral_sigma**2)) * exp(-(x(t) - x_i)**2 / (2 * sigma**2))

For constant velocity every threshold crossing has a closed form, so no time
stepping is done here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .engine import SpikeEvent
from .errors import InvalidParameterError


@dataclass(frozen=True)
class SensorArray:
    n_sensors: int = 5
    spacing_R: float = 0.1
    sigma: float = 0.04
    amplitude: float = 1.0
    sensor_threshold: float = 0.5
    hysteresis: float = 0.5
    lateral_sigma: float = 0.2

    def __post_init__(self) -> None:
        if self.n_sensors < 1:
            raise InvalidParameterError(f"n_sensors must be >= 1, got {self.n_sensors}")
        for name in ("spacing_R", "sigma", "amplitude", "lateral_sigma", "sensor_threshold"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.sensor_threshold < self.amplitude:
            raise InvalidParameterError("sensor_threshold must be below amplitude")
        if not 0 < self.hysteresis < 1:
            raise InvalidParameterError(f"hysteresis must lie in (0, 1), got {self.hysteresis}")

    def position(self, i: int) -> float:
        return i * self.spacing_R


@dataclass(frozen=True)
class ObjectTrajectory:
    x0: float
    velocity: float
    t_start: float = 0.0
    distance_d: float = 0.0

    def __post_init__(self) -> None:
        if self.velocity == 0 or not math.isfinite(self.velocity):
            raise InvalidParameterError("object velocity must be finite and non-zero")
        if self.t_start < 0:
            raise InvalidParameterError(f"t_start must be >= 0, got {self.t_start}")

    def x(self, t: float) -> float:
        return self.x0 + self.velocity * (t - self.t_start)


@dataclass(frozen=True)
class Scenario:
    array: SensorArray = field(default_factory=SensorArray)
    objects: tuple[ObjectTrajectory, ...] = ()
    t_end: float = 2.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        latest = max((o.t_start for o in self.objects), default=0.0)
        if not self.t_end > latest:
            raise InvalidParameterError(f"t_end={self.t_end} must exceed every object t_start")


def effective_amplitude(traj: ObjectTrajectory, array: SensorArray) -> float:
    return array.amplitude * math.exp(-traj.distance_d**2 / (2 * array.lateral_sigma**2))


def intensity(traj: ObjectTrajectory, array: SensorArray, sensor_index: int, t: float) -> float:
    offset = traj.x(t) - array.position(sensor_index)
    return effective_amplitude(traj, array) * math.exp(-(offset**2) / (2 * array.sigma**2))


def crossing_radius(a_eff: float, level: float, sigma: float) -> float | None:
    """Along-array distance at which a Gaussian of peak ``a_eff`` equals ``level``."""
    if a_eff <= level:
        return None
    return sigma * math.sqrt(2 * math.log(a_eff / level))


def _on_off_times(
    traj: ObjectTrajectory, array: SensorArray, sensor_index: int
) -> tuple[float, float] | None:
    """(rising crossing, re-arm instant) of one object over one sensor."""
    a_eff = effective_amplitude(traj, array)
    r_on = crossing_radius(a_eff, array.sensor_threshold, array.sigma)
    if r_on is None:
        return None
    r_off = crossing_radius(a_eff, array.hysteresis * array.sensor_threshold, array.sigma)
    v = traj.velocity
    direction = 1.0 if v > 0 else -1.0
    x_i = array.position(sensor_index)
    offset = traj.x0 - x_i
    if abs(offset) <= r_on:
        # already inside the receptive field when the object appears
        t_on = traj.t_start
    elif offset * v < 0:
        t_on = traj.t_start + (x_i - traj.x0 - direction * r_on) / v
    else:
        return None
    t_off = traj.t_start + (x_i - traj.x0 + direction * r_off) / v
    return t_on, t_off


def sensor_spike_times(traj: ObjectTrajectory, array: SensorArray) -> list[list[float]]:
    """Spike times per sensor (index order) for a single object."""
    out: list[list[float]] = []
    for i in range(array.n_sensors):
        window = _on_off_times(traj, array, i)
        out.append([] if window is None else [window[0]])
    return out


def scenario_events(scenario: Scenario, weight: float = 1.0) -> list[SpikeEvent]:
    """Merge all objects into one time-ordered list of sensor stimulus events.

    Sensor ``i`` is addressed as neuron id ``i``, matching the circuit
    builders. Objects are not superposed: a sensor that has fired stays
    disarmed until every object currently over it has dropped below the
    re-arm level.
    """
    array = scenario.array
    events: list[tuple[float, int]] = []
    for i in range(array.n_sensors):
        windows = sorted(
            w for w in (_on_off_times(o, array, i) for o in scenario.objects) if w is not None
        )
        busy_until = -math.inf
        for t_on, t_off in windows:
            if t_on >= busy_until and t_on <= scenario.t_end:
                events.append((t_on, i))
            busy_until = max(busy_until, t_off)
    events.sort()
    return [SpikeEvent(time=t, dst=i, weight=weight, seq=k) for k, (t, i) in enumerate(events)]


def crossing(
    array: SensorArray, velocity: float, t_start: float = 0.0, distance_d: float = 0.0
) -> ObjectTrajectory:
    """An object that starts outside every receptive field and sweeps across the row.

    The start point is one spacing beyond the end sensor, pushed further out
    when the receptive field is wider than that.
    """
    a_eff = array.amplitude * math.exp(-distance_d**2 / (2 * array.lateral_sigma**2))
    reach = crossing_radius(a_eff, array.sensor_threshold, array.sigma) or 0.0
    margin = max(array.spacing_R, 2 * reach)
    if velocity > 0:
        x0 = -margin
    else:
        x0 = array.position(array.n_sensors - 1) + margin
    return ObjectTrajectory(x0=x0, velocity=velocity, t_start=t_start, distance_d=distance_d)


def traversal_end(traj: ObjectTrajectory, array: SensorArray) -> float:
    """Time at which the object has passed the far end of the row."""
    a_eff = effective_amplitude(traj, array)
    reach = crossing_radius(a_eff, array.hysteresis * array.sensor_threshold, array.sigma) or 0.0
    margin = max(array.spacing_R, reach)
    if traj.velocity > 0:
        far = array.position(array.n_sensors - 1) + margin
    else:
        far = -margin
    return traj.t_start + max(0.0, (far - traj.x0) / traj.velocity)


def single_crossing_scenario(
    array: SensorArray | None = None, velocity: float = 0.5, t_end: float = 2.0
) -> Scenario:
    array = array or SensorArray()
    return Scenario(array=array, objects=(crossing(array, velocity),), t_end=t_end)


def two_object_scenario(
    array: SensorArray | None = None, speed: float = 0.5, t_end: float = 3.0
) -> Scenario:
    """Left-to-right crossing followed by a right-to-left one once the first is clear."""
    array = array or SensorArray()
    first = crossing(array, speed)
    second = crossing(array, -speed, t_start=traversal_end(first, array) + 0.2)
    return Scenario(array=array, objects=(first, second), t_end=t_end)


def reflect(scenario: Scenario) -> Scenario:
    """Mirror the scenario about the middle of the sensor row."""
    width = (scenario.array.n_sensors - 1) * scenario.array.spacing_R
    objects = tuple(replace(o, x0=width - o.x0, velocity=-o.velocity) for o in scenario.objects)
    return replace(scenario, objects=objects)
