"""Spiking bi-directional motion detectors and the Braitenberg prototype baseline."""

from .circuit import (
    CircuitFamily,
    CircuitParams,
    CircuitSpec,
    ConnectionSpec,
    DelayPlan,
    NeuronKind,
    NeuronParams,
    NeuronSpec,
    Subcircuit,
    build_bidirectional,
    build_prototype,
    build_prototype_pair,
    coincidence_window,
    default_plan,
    neuron_count,
    to_netlist,
    tune_delays,
    validate,
)
from .engine import SimResult, SpikeEvent, run
from .stimulus import ObjectTrajectory, Scenario, SensorArray, scenario_events

__all__ = [
    "CircuitFamily",
    "CircuitParams",
    "CircuitSpec",
    "ConnectionSpec",
    "DelayPlan",
    "NeuronKind",
    "NeuronParams",
    "NeuronSpec",
    "ObjectTrajectory",
    "Scenario",
    "SensorArray",
    "SimResult",
    "SpikeEvent",
    "Subcircuit",
    "build_bidirectional",
    "build_prototype",
    "build_prototype_pair",
    "coincidence_window",
    "default_plan",
    "neuron_count",
    "run",
    "scenario_events",
    "to_netlist",
    "tune_delays",
    "validate",
]
