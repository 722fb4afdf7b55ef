import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bimotion.circuit import (
    CircuitFamily,
    CircuitSpec,
    ConnectionSpec,
    NeuronKind,
    NeuronParams,
    NeuronSpec,
    Subcircuit,
    build_bidirectional,
    build_prototype_pair,
    default_plan,
)
from bimotion.engine import NeuronState, SpikeEvent, decay, deliver, run
from bimotion.errors import InvalidParameterError
from bimotion.oracle import dense_simulate
from bimotion.stimulus import Scenario, SensorArray

SIMPLE = NeuronParams(tau=1.0, theta=1.0, t_ref=0.3)
COMBINED = NeuronParams(tau=0.05, theta=1.8, t_ref=0.3)


def spikes(*times):
    return [SpikeEvent(t, i, 1.0, seq=i) for i, t in enumerate(times)]


# ---- decay / deliver ------------------------------------------------------

def test_decay_closed_forms():
    assert decay(1.0, 0.0, 0.0, 1.0) == 1.0
    assert decay(2.0, 0.0, 1.0, 1.0) == pytest.approx(2 * math.exp(-1), abs=1e-15)
    assert decay(2.0, 0.0, 1.0, 1.0) == pytest.approx(0.7358, abs=1e-4)
    assert decay(0.0, 0.3, 7.0, 0.2) == 0.0


def test_decay_refuses_time_travel():
    with pytest.raises(RuntimeError):
        decay(1.0, 1.0, 0.5, 1.0)


@given(u=st.floats(-5, 5), a=st.floats(0, 3), b=st.floats(0, 3), tau=st.floats(0.01, 5))
def test_decay_composes(u, a, b, tau):
    once = decay(u, 0.0, a + b, tau)
    twice = decay(decay(u, 0.0, a, tau), a, a + b, tau)
    assert once == pytest.approx(twice, rel=1e-12, abs=1e-300)


def test_threshold_equality_fires():
    st_ = NeuronState()
    assert deliver(st_, SIMPLE, 1.0, 0.0)
    assert st_.u == 0.0 and st_.refractory_until == pytest.approx(0.3)
    assert st_.fire_times == [0.0]


def test_wrong_direction_blocking_case():
    st_ = NeuronState()
    assert not deliver(st_, SIMPLE, -2.0, 1.0)
    assert not deliver(st_, SIMPLE, 1.0, 1.2)
    assert st_.u == pytest.approx(1 - 2 * math.exp(-0.2), abs=1e-12)
    assert st_.u == pytest.approx(-0.637, abs=1e-3)


def test_exact_coincidence_fires_combined():
    st_ = NeuronState()
    assert not deliver(st_, COMBINED, 1.0, 0.5)
    assert st_.u == 1.0
    assert deliver(st_, COMBINED, 1.0, 0.5)


def test_refractory_discards_input():
    st_ = NeuronState()
    deliver(st_, SIMPLE, 1.0, 0.0)
    assert not deliver(st_, SIMPLE, 5.0, 0.1)
    assert st_.u == 0.0 and st_.last_update == 0.1
    assert deliver(st_, SIMPLE, 1.0, 0.3)
    assert st_.fire_times == [0.0, 0.3]


# ---- run ------------------------------------------------------------------

@pytest.fixture
def bi3():
    return build_bidirectional(3, default_plan())


def test_tuned_crossing_n3(bi3):
    res = run(bi3, spikes(1.0, 1.2, 1.4), t_end=3.0, dt_sample=0.01)
    by_id = {r.neuron_id: r.time for r in res.fire_log}
    p0, p1, c0 = (n.id for n in (
        bi3.of_kind(NeuronKind.SIMPLE, Subcircuit.L2R) + bi3.of_kind(NeuronKind.COMBINED, Subcircuit.L2R)
    ))
    assert by_id[p0] == pytest.approx(1.05, abs=1e-12)
    assert by_id[p1] == pytest.approx(1.25, abs=1e-12)
    assert by_id[c0] == pytest.approx(1.26, abs=1e-12)
    r2l = {n.id for n in bi3.neurons if n.subcircuit is Subcircuit.R2L}
    assert not r2l & set(by_id)


def test_reversed_crossing_silences_l2r(bi3):
    res = run(bi3, spikes(1.4, 1.2, 1.0), t_end=3.0, dt_sample=0.01)
    l2r_comb = {n.id for n in bi3.of_kind(NeuronKind.COMBINED, Subcircuit.L2R)}
    assert not any(r.neuron_id in l2r_comb for r in res.fire_log)
    # the mirror subcircuit sees its preferred direction
    r2l_comb = bi3.of_kind(NeuronKind.COMBINED, Subcircuit.R2L)[0].id
    assert res.fires_of(r2l_comb) == [pytest.approx(1.26, abs=1e-12)]
    # same verdict from the fixed-step reference
    sc = Scenario(array=SensorArray(n_sensors=3), objects=(), t_end=3.0)
    dense = dense_simulate(bi3, sc, 1e-4, stimulus=spikes(1.4, 1.2, 1.0))
    assert {r.neuron_id for r in dense.fire_log} == {r.neuron_id for r in res.fire_log}


def test_empty_stimulus_is_quiet(bi3):
    res = run(bi3, [], t_end=1.0, dt_sample=0.1)
    assert res.fire_log == ()
    assert np.all(res.total_potential == 0)
    assert len(res.sample_times) == 11


@pytest.mark.parametrize("t_end, dt", [(0.0, 0.1), (-1.0, 0.1), (1.0, 0.0), (1.0, -0.5)])
def test_run_rejects_bad_horizon(bi3, t_end, dt):
    with pytest.raises(InvalidParameterError):
        run(bi3, [], t_end=t_end, dt_sample=dt)


def test_run_rejects_stimulus_outside_window_or_non_sensor(bi3):
    with pytest.raises(InvalidParameterError):
        run(bi3, [SpikeEvent(2.0, 0, 1.0)], t_end=1.0, dt_sample=0.1)
    with pytest.raises(InvalidParameterError):
        run(bi3, [SpikeEvent(0.5, 4, 1.0)], t_end=1.0, dt_sample=0.1)


def test_events_past_horizon_are_dropped(bi3):
    res = run(bi3, spikes(0.9), t_end=0.92, dt_sample=0.01)
    assert [r.neuron_id for r in res.fire_log] == [0]


def test_isolated_neuron_trace_integrates_to_tau(plan):
    sensor = NeuronSpec(0, NeuronKind.SENSOR, Subcircuit.NONE, 0, NeuronParams(1.0, 1.0))
    leaky = NeuronSpec(1, NeuronKind.RELAY, Subcircuit.L2R, 0, NeuronParams(1.0, 2.0))
    c = CircuitSpec((sensor, leaky), (ConnectionSpec(0, 1, 1.0, 0.0),), 1, plan, CircuitFamily.CUSTOM)
    res = run(c, [SpikeEvent(0.0, 0, 1.0)], t_end=20.0, dt_sample=0.001)
    assert res.potentials[0, 0] == 1.0
    assert res.potentials[1000, 0] == pytest.approx(math.exp(-1), rel=1e-12)
    area = np.trapezoid(res.total_potential, res.sample_times)
    assert area == pytest.approx(1.0, abs=1e-4)


def _random_stimulus(rng, n, t_end):
    k = rng.randint(0, 3 * n)
    return [SpikeEvent(round(rng.uniform(0, t_end * 0.8), 6), rng.randrange(n), 1.0, seq=j)
            for j in range(k)]


def _serialize(res):
    return json.dumps({
        "fires": [list(r) for r in res.fire_log],
        "trace": res.potentials.tolist(),
    })


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 7), family=st.sampled_from(["bi", "pair"]))
def test_engine_invariants_random_stimuli(seed, n, family):
    rng = random.Random(seed)
    plan = default_plan()
    c = build_bidirectional(n, plan) if family == "bi" else build_prototype_pair(n, plan)
    stim = _random_stimulus(rng, n, 3.0)
    res = run(c, stim, t_end=3.0, dt_sample=0.01)

    # determinism
    assert _serialize(res) == _serialize(run(c, stim, t_end=3.0, dt_sample=0.01))

    # sorted log
    keys = [(r.time, r.neuron_id) for r in res.fire_log]
    assert keys == sorted(keys)

    # refractoriness
    by_neuron = {}
    for r in res.fire_log:
        by_neuron.setdefault(r.neuron_id, []).append(r.time)
    for nid, times in by_neuron.items():
        t_ref = c.neuron(nid).params.t_ref
        assert all(b - a >= t_ref - 1e-12 for a, b in zip(times, times[1:]))

    # causality: nothing downstream fires before the earliest stimulus plus shortest path
    if stim:
        first = min(e.time for e in stim)
        min_delay = min(x.delay for x in c.connections)
        for r in res.fire_log:
            if r.kind != NeuronKind.SENSOR.value:
                assert r.time >= first + min_delay - 1e-12

    # sensors fire exactly when stimulated (t_ref = 0, weight = theta)
    sensor_fires = sorted((r.time, r.neuron_id) for r in res.fire_log if r.kind == "Sensor")
    assert sensor_fires == sorted((e.time, e.dst) for e in stim)

    assert np.all(res.total_potential >= 0)


@pytest.mark.parametrize("gap", [0.0, 0.005, 0.011, 0.0112, 0.02])
def test_coincidence_window_in_engine(gap):
    # two pulses into a resting combined neuron fire iff they are within eps
    eps = 0.05 * math.log(1 / 0.8)
    st_ = NeuronState()
    deliver(st_, COMBINED, 1.0, 1.0)
    fired = deliver(st_, COMBINED, 1.0, 1.0 + gap)
    assert fired == (gap <= eps)
