import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ladderlab.labeling import ContinuityConfig, LabelLadder, Method, label_continuity, label_overlap, label_recursive
from ladderlab.observables import (
    FeatureKind,
    FrequencyCurve,
    ResonanceFeature,
    cavity_frequency_curve,
    detect_features,
    features_of_kind,
    occupancy_curve,
    peak_mask,
)
from ladderlab.operators import SystemSpec
from ladderlab.spectrum import solve

from conftest import full_solution


def _ladder(energy, nq=None):
    energy = np.asarray(energy, dtype=float)
    k = len(energy)
    return LabelLadder(0, Method.CONTINUITY, np.arange(k), energy,
                       np.zeros(k) if nq is None else np.asarray(nq, float), np.zeros(k, bool), {"delta": 0.01})


def _curve(values):
    values = np.asarray(values, dtype=float)
    return FrequencyCurve(np.arange(len(values)), values)


def test_linear_ladder_constant_frequency():
    curve = cavity_frequency_curve(_ladder(0.3 + 0.97 * np.arange(40)))
    assert np.allclose(curve.values, 0.97, atol=1e-13)
    assert len(curve) == 39 and curve.n[-1] == 38
    with pytest.raises(ValueError):
        cavity_frequency_curve(_ladder([1.0]))


def test_decoupled_curves():
    sol = solve(SystemSpec(0.05, 1.6, 0.0, 0.0, 3, 20))
    lad = label_continuity(sol, 0, ContinuityConfig(0.01, 15, truncation_margin=0))
    assert np.all(cavity_frequency_curve(lad).values == 1.0) or np.allclose(cavity_frequency_curve(lad).values, 1.0, atol=1e-12)
    assert np.allclose(occupancy_curve(lad).values, 0.0, atol=1e-20)
    assert cavity_frequency_curve(lad).provenance["method"] == "continuity"


def test_constant_curve_has_no_features():
    assert detect_features(_curve(np.full(100, 1.001))) == []
    with pytest.raises(ValueError):
        detect_features(_curve(np.ones(10)), peak_threshold=0)


def test_smooth_drift_has_no_features():
    n = np.arange(200)
    assert detect_features(_curve(1.002 - 5e-6 * n - 1e-8 * n ** 2)) == []


def test_isolated_peak():
    f = np.full(120, 1.0015)
    f[60:63] += [3e-4, 9e-4, 2e-4]
    feats = detect_features(_curve(f))
    assert [(x.kind, x.n) for x in feats] == [(FeatureKind.PEAK, 61)]
    assert feats[0].magnitude == pytest.approx(9e-4)
    assert str(feats[0]).startswith("Peak 61 ")


def test_negative_peak():
    f = np.full(80, 1.0)
    f[30] -= 5e-4
    assert features_of_kind(detect_features(_curve(f)), "Peak") == [30]


def test_monotone_step_down_is_drop_up_is_jump():
    f = np.full(120, 1.0015)
    f[70:] -= 2e-3
    feats = detect_features(_curve(f))
    assert [(x.kind, x.n) for x in feats] == [(FeatureKind.DROP, 70)]
    assert feats[0].magnitude == pytest.approx(2e-3)
    g = np.full(120, 1.0015)
    g[50:] += 1e-3
    assert [(x.kind, x.n) for x in detect_features(_curve(g))] == [(FeatureKind.JUMP, 50)]


def test_overshooting_step_is_jump():
    # discontinuous ladder energy: f spikes down then settles slightly lower
    f = np.full(120, 1.0015)
    f[40] -= 4e-3
    f[41:] -= 2e-4
    feats = detect_features(_curve(f))
    assert [x.kind for x in feats] == [FeatureKind.JUMP]
    assert abs(feats[0].n - 40) <= 1


def test_short_history_is_ignored():
    f = np.full(30, 1.0)
    f[1] = 2.0
    assert detect_features(_curve(f)) == []


def test_peak_mask():
    curve = _curve(np.ones(30))
    keep = peak_mask(curve, [ResonanceFeature(FeatureKind.PEAK, 10, 1.0)], halfwidth=2)
    assert list(np.flatnonzero(~keep)) == [8, 9, 10, 11, 12]


@settings(max_examples=100, deadline=None)
@given(st.integers(20, 100), st.floats(-1e-3, 1e-3), st.floats(1e-6, 5e-5))
def test_sub_threshold_noise_never_flagged(length, offset, scale):
    rng = np.random.default_rng(length)
    f = 1.0 + offset + scale * rng.uniform(-1, 1, length)
    assert detect_features(_curve(f), peak_threshold=1e-4) == []


@pytest.mark.slow
def test_transmon_regime_curves():
    sol = full_solution()
    cont = detect_features(cavity_frequency_curve(label_continuity(sol, 0, ContinuityConfig(0.01, 260))))
    rec = detect_features(cavity_frequency_curve(label_recursive(sol, 0, 260)))
    ov = detect_features(cavity_frequency_curve(label_overlap(sol, 0, 260)))
    peaks = features_of_kind(cont, "Peak")
    assert any(abs(n - 50) <= 5 for n in peaks) and any(abs(n - 180) <= 10 for n in peaks)
    assert any(abs(n - 180) <= 10 for n in features_of_kind(rec, "Drop"))
    assert any(abs(n - 150) <= 10 for n in features_of_kind(ov, "Jump"))
    occ = occupancy_curve(label_recursive(sol, 0, 260)).values
    # recursive occupancy steps up near n ~ 180 and stays up
    assert occ[200:].min() - occ[150:165].max() > 0.3
