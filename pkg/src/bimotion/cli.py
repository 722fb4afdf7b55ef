"""Build, simulate and compare spiking motion-detector circuits.

Usage: ``bimotion <command> [config.ini] [-o OUTDIR]``. Without a config file
every parameter takes its default. Exit codes: 0 success, 1 configuration
error, 2 validation failure, 3 verification disagreement.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import analysis, oracle
from .circuit import (
    CircuitFamily,
    CircuitSpec,
    NeuronKind,
    build,
    neuron_count,
    to_netlist,
    validate,
)
from .config import RunConfig, parse_config
from .engine import SimResult, run
from .errors import ConfigError, InvalidParameterError, UnsupportedScenarioError
from .stimulus import Scenario, crossing, scenario_events, traversal_end

log = logging.getLogger("bimotion")

EXIT_OK, EXIT_CONFIG, EXIT_INVALID, EXIT_DISAGREE = 0, 1, 2, 3


def fmt(x) -> str:
    """Shortest round-trip text for numbers; everything else via str()."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float) or hasattr(x, "dtype") and x.dtype.kind == "f":
        return repr(float(x))
    return str(x)


def write_kv(path: Path, pairs: list[tuple[str, object]]) -> None:
    path.write_text("".join(f"{k}={fmt(v)}\n" for k, v in pairs))


def write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return parse_config("")
    return parse_config(Path(path).read_text(encoding="utf-8"))


def build_circuit(cfg: RunConfig, family: CircuitFamily | None = None) -> CircuitSpec:
    return build(family or cfg.family, cfg.array.n_sensors, cfg.plan, cfg.params)


def simulate(cfg: RunConfig, circuit: CircuitSpec, scenario: Scenario | None = None) -> SimResult:
    scenario = scenario or cfg.scenario
    return run(
        circuit,
        scenario_events(scenario),
        scenario.t_end,
        cfg.dt_sample,
        theta_active=cfg.analysis.theta_active,
    )


def write_run_outputs(cfg: RunConfig, result: SimResult, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(
        outdir / "events.csv",
        ["time", "neuron_id", "kind", "subcircuit", "index", "event"],
        ((r.time, r.neuron_id, r.kind, r.subcircuit, r.index, "fire") for r in result.fire_log),
    )
    trace = analysis.potential_trace(result)
    write_csv(
        outdir / "trace.csv",
        ["time", "total_potential", "active_count", "active_fraction"],
        zip(trace.time, trace.total_potential, trace.active_count, trace.active_fraction),
    )
    directions = analysis.classify(result)
    write_csv(
        outdir / "directions.csv",
        ["time", "direction", "pair_index"],
        ((d.time, d.direction.value, d.pair_index) for d in directions),
    )
    epi = analysis.epilepsy_indicator(result, cfg.analysis)
    write_kv(outdir / "summary.txt", [
        ("integrated_potential", trace.integrated_potential),
        ("peak_active_fraction", trace.peak_active_fraction),
        ("n_direction_events", len(directions)),
        ("epilepsy_triggered", epi.triggered),
        ("detector_neurons", neuron_count(result.circuit).detector_neurons),
    ])


def maybe_emit_netlist(args, circuit: CircuitSpec) -> None:
    if getattr(args, "emit_netlist", None):
        Path(args.emit_netlist).write_text(to_netlist(circuit))


# --------------------------------------------------------------------------
# commands


def cmd_tune(cfg: RunConfig, args) -> int:
    p = cfg.plan
    for key in ("delta_E", "delta_I", "delta_LB", "delta_RB", "spacing_R", "v_design"):
        print(f"{key}={fmt(getattr(p, key))}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, args) -> int:
    circuit = build_circuit(cfg)
    maybe_emit_netlist(args, circuit)
    violations = validate(circuit, cfg.v_min, cfg.v_max)
    for v in violations:
        print(v)
    if violations:
        return EXIT_INVALID
    print(f"ok: {circuit.family.value} circuit valid for v in [{cfg.v_min}, {cfg.v_max}]")
    return EXIT_OK


def cmd_run(cfg: RunConfig, args) -> int:
    circuit = build_circuit(cfg)
    maybe_emit_netlist(args, circuit)
    result = simulate(cfg, circuit)
    write_run_outputs(cfg, result, Path(args.outdir))
    log.info("wrote %d fire events to %s", len(result.fire_log), args.outdir)
    return EXIT_OK


def cmd_compare(cfg: RunConfig, args) -> int:
    outdir = Path(args.outdir)
    results = {}
    for family, sub in ((CircuitFamily.BIDIRECTIONAL, "bidirectional"),
                        (CircuitFamily.PROTOTYPE_PAIR, "prototype_pair")):
        results[family] = simulate(cfg, build_circuit(cfg, family))
        write_run_outputs(cfg, results[family], outdir / sub)
    a, b = results[CircuitFamily.BIDIRECTIONAL], results[CircuitFamily.PROTOTYPE_PAIR]
    report = analysis.compare(a, b)
    write_kv(outdir / "compare.txt", [
        ("family_a", CircuitFamily.BIDIRECTIONAL.value),
        ("family_b", CircuitFamily.PROTOTYPE_PAIR.value),
        ("detector_neurons_a", report.detector_neurons[0]),
        ("detector_neurons_b", report.detector_neurons[1]),
        ("integrated_potential_a", report.integrated_potential[0]),
        ("integrated_potential_b", report.integrated_potential[1]),
        ("potential_ratio", report.potential_ratio),
        ("peak_active_fraction_a", report.peak_active_fraction[0]),
        ("peak_active_fraction_b", report.peak_active_fraction[1]),
        ("peak_active_fraction_ratio", report.peak_active_fraction_ratio),
        ("mean_detection_latency_a", report.mean_latency(0)),
        ("mean_detection_latency_b", report.mean_latency(1)),
        ("epilepsy_triggered_a", analysis.epilepsy_indicator(a, cfg.analysis).triggered),
        ("epilepsy_triggered_b", analysis.epilepsy_indicator(b, cfg.analysis).triggered),
    ])
    print((outdir / "compare.txt").read_text(), end="")
    return EXIT_OK


def sweep_point(cfg: RunConfig, speed: float) -> tuple[float, bool, float | None, bool]:
    """Simulate one grid velocity; returns (velocity, fired, first time, predicted)."""
    template = cfg.objects[0]
    velocity = math.copysign(speed, template.velocity)
    traj = crossing(cfg.array, velocity, t_start=template.t_start, distance_d=template.distance_d)
    circuit = build_circuit(cfg)
    longest = max(c.delay for c in circuit.connections)
    t_end = max(cfg.t_end, traversal_end(traj, cfg.array) + 3 * longest + 0.1)
    scenario = Scenario(array=cfg.array, objects=(traj,), t_end=t_end)
    result = simulate(cfg, circuit, scenario)
    direction = oracle.motion_subcircuit(velocity).value
    hits = [r.time for r in result.fire_log
            if r.kind == NeuronKind.COMBINED.value and r.subcircuit == direction]
    predicted = any(t.fires for t in oracle.predict_timeline(circuit, scenario))
    return speed, bool(hits), (hits[0] if hits else None), predicted


def cmd_sweep(cfg: RunConfig, args) -> int:
    grid = cfg.sweep.values()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(sweep_point, [cfg] * len(grid), grid))
    else:
        rows = [sweep_point(cfg, v) for v in grid]
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(
        outdir / "sweep.csv",
        ["velocity", "fired", "first_event_time", "predicted_fired"],
        ((v, f, "" if t is None else t, p) for v, f, t, p in rows),
    )
    mismatches = sum(f != p for _, f, _, p in rows)
    print(f"{len(rows)} velocities, {sum(f for _, f, _, _ in rows)} fired, "
          f"{mismatches} engine/oracle mismatches")
    return EXIT_OK


def agreement(
    event: SimResult, dense: SimResult, predicted: dict[int, float], dense_dt: float
) -> list[str]:
    """Disagreements between the three routes, as human-readable lines."""
    problems = []
    ev_fires: dict[int, list[float]] = {}
    for r in event.fire_log:
        ev_fires.setdefault(r.neuron_id, []).append(r.time)
    de_fires: dict[int, list[float]] = {}
    for r in dense.fire_log:
        de_fires.setdefault(r.neuron_id, []).append(r.time)
    for nid in sorted(set(ev_fires) | set(de_fires) | set(predicted)):
        e, d = ev_fires.get(nid, []), de_fires.get(nid, [])
        p = [predicted[nid]] if nid in predicted else []
        if not len(e) == len(d) == len(p):
            problems.append(f"neuron {nid}: fire counts event={len(e)} dense={len(d)} analytic={len(p)}")
            continue
        for te, td, tp in zip(e, d, p):
            if abs(td - te) > dense_dt * (1 + 1e-6):
                problems.append(f"neuron {nid}: dense {td!r} vs event {te!r} differ by more than dt")
            if abs(tp - te) > 1e-9 * max(1.0, abs(te)):
                problems.append(f"neuron {nid}: analytic {tp!r} vs event {te!r}")
    return problems


def cmd_verify(cfg: RunConfig, args) -> int:
    circuit = build_circuit(cfg)
    maybe_emit_netlist(args, circuit)
    scenario = cfg.scenario
    predicted = oracle.predict_fires(circuit, scenario)
    event = simulate(cfg, circuit)
    dense = oracle.dense_simulate(circuit, scenario, cfg.dense_dt, cfg.dt_sample,
                                  cfg.analysis.theta_active)
    problems = agreement(event, dense, predicted, cfg.dense_dt)
    for line in problems:
        print(line)
    print(f"event fires={len(event.fire_log)} dense fires={len(dense.fire_log)} "
          f"analytic fires={len(predicted)}: {'DISAGREE' if problems else 'agree'}")
    return EXIT_DISAGREE if problems else EXIT_OK


COMMANDS = {
    "tune": cmd_tune,
    "validate": cmd_validate,
    "run": cmd_run,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


HELP = {
    "tune": "print the delay plan derived from spacing and design velocity",
    "validate": "check circuit structure and the blocking and window conditions",
    "run": "simulate the configured scenario and write CSV traces",
    "compare": "run bidirectional and prototype-pair circuits side by side",
    "sweep": "sweep object speed and record which speeds are detected",
    "verify": "cross-check the event engine against the dense and analytic oracles",
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bimotion", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("config", nargs="?", help="INI config file (defaults if omitted)")
        if name in ("run", "compare", "sweep"):
            p.add_argument("-o", "--outdir", default="out")
        if name in ("run", "validate", "verify"):
            p.add_argument("--emit-netlist", metavar="PATH")
        if name == "sweep":
            p.add_argument("-j", "--jobs", type=int, default=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, InvalidParameterError, UnsupportedScenarioError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
