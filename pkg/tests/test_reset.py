import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsuta import reset as reset_mod
from dsuta.controllers import DSUTA, AdaptConfig
from dsuta.model import ConfigurationError, ParamSet
from dsuta.reset import (
    DynamicReset,
    FixedReset,
    GaussianStats,
    OracleReset,
    ResetStrategy,
    fit_gaussian,
    fixed_reset_step,
    lii,
    make_strategy,
    oracle_reset_step,
    shift_z,
)


def _xs(stream, n):
    return [u.features for u in stream.utterances[:n]]


def test_fit_gaussian_examples():
    g = fit_gaussian([1.0, 2.0, 3.0])
    assert (g.mu, g.sigma, g.n_samples) == (2.0, 1.0, 3)
    assert fit_gaussian([5.0, 5.0]).sigma == 1e-12
    with pytest.raises(ConfigurationError):
        fit_gaussian([1.0])


def test_shift_z_examples():
    stats = GaussianStats(0.0, 1.0, 50)
    assert shift_z([0.0] * 5, stats) == 0.0
    assert shift_z([1.0] * 4, stats) == 2.0
    assert not shift_z([1.0] * 4, stats) > reset_mod.Z_THRESHOLD
    assert shift_z([1.5] * 4, stats) == 3.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20), st.floats(-5, 5), st.floats(0.01, 10))
def test_shift_z_matches_per_sample_form(liis, mu, sigma):
    M = len(liis)
    direct = sum((v - mu) / (sigma / math.sqrt(M)) for v in liis) / M
    assert shift_z(liis, GaussianStats(mu, sigma, 2)) == pytest.approx(direct, rel=1e-9, abs=1e-9)


def test_lii_identities(rng):
    a, b = ParamSet.random(4, 3, rng), ParamSet.random(4, 3, rng)
    x = rng.standard_normal((9, 4))
    assert lii(a, a, x) == 0.0
    assert lii(a, b, x) == pytest.approx(-lii(b, a, x), abs=1e-15)


def test_fixed_and_oracle_rules():
    assert [t for t in range(1, 201) if fixed_reset_step(50, t)] == [50, 100, 150, 200]
    assert fixed_reset_step(1, 7)
    assert oracle_reset_step({500, 1000}, 500) and not oracle_reset_step({500, 1000}, 501)
    with pytest.raises(ConfigurationError):
        FixedReset(0)


def test_oracle_resets_at_every_boundary(phi_pre, hard_stream):
    ctrl = DSUTA(phi_pre, AdaptConfig(N=0, M=5), reset=OracleReset(hard_stream.boundaries))
    fired = [ctrl.t for x in _xs(hard_stream, len(hard_stream)) if ctrl.step(x).reset_fired]
    assert len(fired) == 124
    assert fired == sorted(hard_stream.boundaries)


def test_fixed_reset_in_controller(phi_pre, hard_stream):
    ctrl = DSUTA(phi_pre, AdaptConfig(N=0, M=5), reset=FixedReset(50))
    fired = [ctrl.t for x in _xs(hard_stream, 200) if ctrl.step(x).reset_fired]
    assert fired == [50, 100, 150, 200]


def test_construction_window(phi_pre, hard_stream):
    strat = DynamicReset(K=100, P=2)
    ctrl = DSUTA(phi_pre, AdaptConfig(N=1, M=5), reset=strat)
    xs = _xs(hard_stream, 100)
    for t, x in enumerate(xs, 1):
        if t == 50:
            expected_d = ctrl.phi_t.copy()
        ctrl.step(x)
        if t < 100:
            assert strat.state.phase == "construction" and strat.state.stats is None
    s = strat.state
    assert s.phi_d.equals(expected_d)
    assert len(s.collected_liis) == 50
    assert s.phase == "detection"
    assert s.stats == fit_gaussian(s.collected_liis)
    # collected values are exactly the LIIs of samples 51..100 under the snapshot
    recomputed = [lii(expected_d, phi_pre, x) for x in xs[50:]]
    np.testing.assert_array_equal(s.collected_liis, recomputed)


def test_dynamic_counters(phi_pre, hard_stream):
    ctrl = DSUTA(phi_pre, AdaptConfig(N=5, M=5), reset=DynamicReset(K=100, P=2))
    for x in _xs(hard_stream, 100):
        ctrl.step(x)
    assert (ctrl.counters.forwards, ctrl.counters.backwards) == (720, 520)


class _Script:
    """Stand-in for the LII function that returns scripted values by call index."""

    def __init__(self, fn):
        self.fn, self.calls = fn, 0

    def __call__(self, *args, **kwargs):
        self.calls += 1
        return self.fn(self.calls)


def _scripted(t):
    if t <= 10:
        return [0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0, -1.0, 1.0, 0.0][t - 1]
    if t <= 30:
        # windows ending at 15, 20, 25, 30: exceed, calm, exceed, exceed
        return {15: 10.0, 20: 0.0, 25: 10.0, 30: 10.0}[5 * math.ceil(t / 5)]
    return 10.0 + (1.0 if t % 2 else -1.0)


def test_patience_law_and_post_reset_state(monkeypatch, phi_pre, hard_stream):
    script = _Script(_scripted)
    monkeypatch.setattr(reset_mod, "lii", script)
    strat = DynamicReset(K=10, P=2)
    ctrl = DSUTA(phi_pre, AdaptConfig(N=1, M=5), reset=strat)
    outcomes = {}
    for t, x in enumerate(_xs(hard_stream, 60), 1):
        outcomes[t] = ctrl.step(x)
        if t == 30:
            assert outcomes[t].reset_fired and not outcomes[t].meta_updated
            assert ctrl.phi_t.equals(phi_pre)
            assert ctrl.buffer == []
            assert ctrl.slow_opt.state.step == 0 and ctrl.slow_opt.state.m is None
            s = strat.state
            assert (s.phase, s.last_reset, s.patience_counter) == ("construction", 30, 0)
            assert s.phi_d is None and s.stats is None and s.collected_liis == []
    assert script.calls == 60
    # the discarded meta-gradient at t=30 is still evaluated and counted
    assert (ctrl.counters.forwards, ctrl.counters.backwards) == (60 + 12 + 120, 60 + 12)
    assert [t for t, o in outcomes.items() if o.reset_fired] == [30]
    assert [(e["t"], e["patience_counter"]) for e in strat.events[:4]] == [(15, 1), (20, 0), (25, 1), (30, 2)]
    assert outcomes[15].z == pytest.approx(10.0 * math.sqrt(5))
    # after the reset nothing is tested until t > r + K
    assert all(e["t"] > 40 for e in strat.events[4:])


def test_no_reset_inside_construction(monkeypatch, phi_pre, hard_stream):
    # an absurd indicator never triggers a reset while statistics are being built
    monkeypatch.setattr(reset_mod, "lii", _Script(lambda t: 1e6 * t))
    strat = DynamicReset(K=100, P=1)
    ctrl = DSUTA(phi_pre, AdaptConfig(N=0, M=5), reset=strat)
    fired = [ctrl.t for x in _xs(hard_stream, 300) if ctrl.step(x).reset_fired]
    assert fired and all(b - a > 100 for a, b in zip([0] + fired, fired))


def test_make_strategy():
    assert type(make_strategy(None)) is ResetStrategy
    assert make_strategy({"variant": "fixed", "freq": 7}).freq == 7
    assert make_strategy({"variant": "oracle"}, [3, 9]).boundaries == {3, 9}
    d = make_strategy({"variant": "dynamic", "K": 20, "P": 3})
    assert (d.state.K, d.state.k, d.state.P) == (20, 10, 3)
    with pytest.raises(ConfigurationError):
        make_strategy({"variant": "sometimes"})
    with pytest.raises(ConfigurationError):
        DynamicReset(K=3)
