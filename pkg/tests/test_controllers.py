import numpy as np
import pytest

from dsuta.controllers import CSUTA, DSUTA, SUTA, AdaptationError, AdaptConfig, SourceModel, suta_adapt
from dsuta.model import ParamSet, forward, greedy_ctc_decode
from dsuta.objective import batched_suta_loss_grad, suta_loss_grad
from dsuta.optim import OptimizerConfig

GD = OptimizerConfig("plain-gd", 1e-2)


def _xs(stream, n):
    return [u.features for u in stream.utterances[:n]]


def test_adapt_zero_steps_is_copy(phi_pre, hard_stream):
    x = hard_stream.utterances[0].features
    out = suta_adapt(phi_pre, x, AdaptConfig(N=0))
    assert out.equals(phi_pre) and out is not phi_pre
    assert greedy_ctc_decode(forward(out, x)) == greedy_ctc_decode(forward(phi_pre, x))


def test_adapt_single_gd_step(phi_pre, hard_stream):
    x = hard_stream.utterances[0].features
    before = phi_pre.copy()
    out = suta_adapt(phi_pre, x, AdaptConfig(N=1, fast_optimizer=GD))
    _, g = suta_loss_grad(phi_pre, x)
    expected = ParamSet(phi_pre.weight - 1e-2 * g.weight, phi_pre.bias - 1e-2 * g.bias)
    assert out.equals(expected)
    assert phi_pre.equals(before)


def test_suta_is_stateless(phi_pre, hard_stream):
    x = hard_stream.utterances[3].features
    ctrl = SUTA(phi_pre, AdaptConfig(N=3))
    first = ctrl.step(x)
    second = ctrl.step(x)
    assert first.prediction == second.prediction
    assert first.adapted_loss_trace == second.adapted_loss_trace
    assert len(first.adapted_loss_trace) == 4


def test_suta_counts(phi_pre, hard_stream):
    ctrl = SUTA(phi_pre, AdaptConfig(N=10))
    for x in _xs(hard_stream, 20):
        ctrl.step(x)
    assert (ctrl.counters.forwards, ctrl.counters.backwards) == (200, 200)


def test_source_counts(phi_pre, hard_stream):
    ctrl = SourceModel(phi_pre, AdaptConfig(N=0))
    for x in _xs(hard_stream, 20):
        ctrl.step(x)
    assert (ctrl.counters.forwards, ctrl.counters.backwards) == (20, 0)


def test_csuta_zero_steps_matches_source(phi_pre, hard_stream):
    cfg = AdaptConfig(N=0)
    c, s = CSUTA(phi_pre, cfg), SourceModel(phi_pre, cfg)
    for x in _xs(hard_stream, 30):
        assert c.step(x).prediction == s.step(x).prediction


def test_csuta_first_step_equals_suta_adapt(phi_pre, hard_stream):
    cfg = AdaptConfig(N=1)
    x = hard_stream.utterances[0].features
    c = CSUTA(phi_pre, cfg)
    c.step(x)
    assert c.phi.equals(suta_adapt(phi_pre, x, cfg))


def test_csuta_two_step_composition(phi_pre, hard_stream):
    cfg = AdaptConfig(N=1, fast_optimizer=GD)
    x1, x2 = _xs(hard_stream, 2)
    c = CSUTA(phi_pre, cfg)
    c.step(x1)
    c.step(x2)
    _, g1 = suta_loss_grad(phi_pre, x1)
    p1 = ParamSet(phi_pre.weight - 1e-2 * g1.weight, phi_pre.bias - 1e-2 * g1.bias)
    _, g2 = suta_loss_grad(p1, x2)
    p2 = ParamSet(p1.weight - 1e-2 * g2.weight, p1.bias - 1e-2 * g2.bias)
    assert c.phi.equals(p2)


def test_dsuta_meta_update_schedule_and_buffer_law(phi_pre, hard_stream):
    ctrl = DSUTA(phi_pre, AdaptConfig(N=1, M=5))
    updated = []
    for x in _xs(hard_stream, 23):
        out = ctrl.step(x)
        assert len(ctrl.buffer) == ctrl.t % 5
        if out.meta_updated:
            updated.append(ctrl.t)
    assert updated == [5, 10, 15, 20]


def test_fast_adaptation_never_touches_meta_params(phi_pre, hard_stream):
    ctrl = DSUTA(phi_pre, AdaptConfig(N=4, M=5))
    for x in _xs(hard_stream, 12):
        before = ctrl.phi_t.copy()
        out = ctrl.step(x)
        if not out.meta_updated:
            assert ctrl.phi_t.equals(before)
        else:
            assert not ctrl.phi_t.equals(before)


def test_meta_update_uses_current_meta_params(phi_pre, hard_stream):
    cfg = AdaptConfig(N=2, M=3, slow_optimizer=GD)
    ctrl = DSUTA(phi_pre, cfg)
    xs = _xs(hard_stream, 3)
    for x in xs:
        ctrl.step(x)
    _, g = batched_suta_loss_grad(phi_pre, xs)
    assert ctrl.phi_t.equals(ParamSet(phi_pre.weight - 1e-2 * g.weight, phi_pre.bias - 1e-2 * g.bias))


def test_dsuta_with_null_update_equals_suta(phi_pre, hard_stream):
    cfg = AdaptConfig(N=3, M=5, update_enabled=False)
    d, s = DSUTA(phi_pre, cfg), SUTA(phi_pre, cfg)
    for x in _xs(hard_stream, 60):
        a, b = d.step(x), s.step(x)
        assert a.prediction == b.prediction
        assert a.adapted_loss_trace == b.adapted_loss_trace
    assert d.phi_t.equals(phi_pre)


def test_dsuta_counts(phi_pre, hard_stream):
    ctrl = DSUTA(phi_pre, AdaptConfig(N=5, M=5))
    for x in _xs(hard_stream, 100):
        ctrl.step(x)
    assert (ctrl.counters.forwards, ctrl.counters.backwards) == (520, 520)


def test_loss_trace_monotone_with_small_gd(phi_pre, hard_stream):
    cfg = AdaptConfig(N=6, M=5, fast_optimizer=OptimizerConfig("plain-gd", 1e-3))
    ctrl = DSUTA(phi_pre, cfg)
    for x in _xs(hard_stream, 40):
        trace = ctrl.step(x).adapted_loss_trace
        assert len(trace) == 7
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))


def test_runs_are_deterministic(phi_pre, hard_stream):
    def outcomes():
        ctrl = DSUTA(phi_pre, AdaptConfig(N=2, M=5))
        return [ctrl.step(x) for x in _xs(hard_stream, 40)]

    assert outcomes() == outcomes()


def test_non_finite_loss_aborts(phi_pre):
    x = np.full((4, phi_pre.d), np.nan)
    with pytest.raises(AdaptationError, match="non-finite"):
        SUTA(phi_pre, AdaptConfig(N=2)).step(x)


def test_invalid_adapt_config():
    with pytest.raises(ValueError):
        AdaptConfig(N=-1)
    with pytest.raises(ValueError):
        AdaptConfig(M=0)
