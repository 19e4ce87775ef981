import math

import numpy as np
import pytest

from twotime.errors import EmptyEnsembleError, LowStatisticsWarning, TimeRangeError, ValidationError
from twotime.mc import (
    MeasurementPlan,
    RunConfig,
    born_sample,
    compare_to_abl,
    run_trials,
    stats_csv,
    stats_document,
    trial_uniforms,
)
from twotime.scenario import random_scenario, solenoid_event
from twotime.twostate import ProjectiveDecomposition, TwoTimeState, abl_probabilities, overlap

from conftest import S3, T1, T2, T3


def test_trial_uniforms_independent_of_chunking():
    full = trial_uniforms(7, 0, 1000)
    assert full.shape == (1000, 8)
    assert np.array_equal(full[300:700], trial_uniforms(7, 300, 700))
    assert np.array_equal(full[999:], trial_uniforms(7, 999, 1000))
    assert not np.array_equal(full, trial_uniforms(8, 0, 1000))
    assert np.all((full >= 0) & (full < 1))


def test_born_sample_examples():
    dec = ProjectiveDecomposition.boxes(3)
    v = np.array([1, 1j, 1]) / S3
    for u, k in ((0.0, 0), (0.3, 0), (1 / 3 + 1e-9, 1), (0.5, 1), (0.7, 2), (0.999999, 2)):
        got, collapsed = born_sample(v, dec, u)
        assert got == k
        assert abs(np.linalg.norm(collapsed) - 1) < 1e-15
        assert abs(abs(collapsed[k]) - 1) < 1e-15


def test_born_sample_skips_empty_branch():
    dec = ProjectiveDecomposition.boxes(3)
    v = np.array([1, 0, 1]) / math.sqrt(2)
    for u in np.linspace(0, 0.999, 50):
        k, _ = born_sample(v, dec, u)
        assert k != 1


def test_born_weights_examples(rng):
    u = rng.random(30000)
    cases = [
        (np.array([1, 1j, 1]) / S3, ProjectiveDecomposition.from_boxes(3, [0]), [1 / 3, 2 / 3]),
        (np.array([math.sqrt(2), 0, 1]) / S3, ProjectiveDecomposition.boxes(3), [2 / 3, 0, 1 / 3]),
    ]
    for v, dec, expected in cases:
        counts = np.bincount([born_sample(v, dec, x)[0] for x in u], minlength=len(expected))
        expected = np.array(expected)
        se = np.sqrt(expected * (1 - expected) / len(u))
        assert np.all(np.abs(counts / len(u) - expected) <= 4 * se)


def test_born_frequencies(rng):
    dec = ProjectiveDecomposition.boxes(4)
    v = np.array([0.1, 0.5, 0.3, 0.7j])
    v = v / np.linalg.norm(v)
    n = 20000
    counts = np.zeros(4)
    for u in rng.random(n):
        counts[born_sample(v, dec, u)[0]] += 1
    expected = np.abs(v) ** 2
    se = np.sqrt(expected * (1 - expected) / n)
    assert np.all(np.abs(counts / n - expected) <= 4 * se)


def test_rate_without_plan(preset):
    stats = run_trials(RunConfig(100000, 42, preset))
    assert stats.labels == ("none",)
    assert abs(stats.rate - 1 / 9) <= 4 * math.sqrt((1 / 9) * (8 / 9) / 1e5)
    assert stats.postselected == 11314


def test_certainty_triplet_survivors(preset):
    for t, opened, certain in ((T1, [0], "P1"), (T2, [0, 1, 2], "P3"), (T3, [1], "P2")):
        dec = ProjectiveDecomposition.from_boxes(3, opened)
        stats = run_trials(RunConfig(100000, 3, preset, MeasurementPlan(t, dec)))
        assert stats.conditional_probs[certain] == 1.0
        for lab in stats.labels:
            if lab != certain:
                assert stats.outcome_counts[lab] == 0
        assert sum(stats.raw_counts.values()) == 100000


def test_preset_matches_abl_all_boxes(preset):
    tt = TwoTimeState(preset)
    dec = ProjectiveDecomposition.boxes(3)
    stats = run_trials(RunConfig(100000, 11, preset, MeasurementPlan(T1, dec)))
    rep = compare_to_abl(stats, abl_probabilities(tt, dec, T1))
    assert rep.ok and rep.max_abs_z <= 4


def test_deterministic_regardless_of_workers(preset):
    plan = MeasurementPlan(0.4, ProjectiveDecomposition.boxes(3))
    cfg = RunConfig(50000, 99, preset, plan)
    a = run_trials(cfg)
    b = run_trials(cfg, workers=4, chunk_size=777)
    c = run_trials(cfg, workers=3, chunk_size=50000)
    assert a == b == c


def test_sequential_matches_joint(preset):
    dec = ProjectiveDecomposition.boxes(3)
    tt = TwoTimeState(preset)
    for t in (0.2, T2, 1.1):
        seq = run_trials(RunConfig(100000, 5, preset, MeasurementPlan(t, dec, sequential=True)))
        rep = compare_to_abl(seq, abl_probabilities(tt, dec, t))
        assert rep.ok


def test_sequential_single_draw_outcome_distribution(preset):
    # before post-selection the raw counts follow the Born weights
    dec = ProjectiveDecomposition.boxes(3)
    stats = run_trials(RunConfig(60000, 8, preset, MeasurementPlan(0.0, dec, sequential=True)))
    raw = np.array([stats.raw_counts[lab] for lab in stats.labels]) / 60000
    se = math.sqrt((1 / 3) * (2 / 3) / 60000)
    assert np.all(np.abs(raw - 1 / 3) <= 4 * se)


def test_empty_ensemble(preset):
    s = preset.with_states(post=np.array([1, 0, 1]) / math.sqrt(2))
    with pytest.raises(EmptyEnsembleError) as info:
        run_trials(RunConfig(1000, 1, s))
    assert info.value.total_trials == 1000


def test_low_statistics_warning(preset):
    dec = ProjectiveDecomposition.boxes(3)
    stats = run_trials(RunConfig(300, 2, preset, MeasurementPlan(0.4, dec)))
    assert stats.postselected < 100
    with pytest.warns(LowStatisticsWarning):
        rep = compare_to_abl(stats, abl_probabilities(TwoTimeState(preset), dec, 0.4))
    assert rep.warnings


def test_compare_deterministic_prediction(preset):
    dec = ProjectiveDecomposition.boxes(3)
    stats = run_trials(RunConfig(5000, 2, preset, MeasurementPlan(T2, dec)))
    rep = compare_to_abl(stats, [0.0, 0.0, 1.0])
    assert rep.ok and rep.max_abs_z == 0.0
    rep = compare_to_abl(stats, [0.0, 1.0, 0.0])
    assert not rep.ok and math.isinf(rep.max_abs_z)
    doc = stats_document(stats, rep)
    assert doc["outcomes"][1]["z"] is None


def test_run_config_validation(preset):
    with pytest.raises(ValidationError):
        RunConfig(0, 1, preset)
    with pytest.raises(ValidationError):
        RunConfig(10, -1, preset)
    dec = ProjectiveDecomposition.boxes(3)
    with pytest.raises(ValidationError):
        RunConfig(10, 1, preset, [MeasurementPlan(0.1, dec), MeasurementPlan(0.2, dec)])
    with pytest.raises(TimeRangeError):
        RunConfig(10, 1, preset, MeasurementPlan(5.0, dec))
    with pytest.raises(ValidationError):
        RunConfig(10, 1, preset, MeasurementPlan(0.1, ProjectiveDecomposition.boxes(4)))


def test_documents(preset):
    dec = ProjectiveDecomposition.boxes(3)
    stats = run_trials(RunConfig(20000, 4, preset, MeasurementPlan(T1, dec)))
    doc = stats_document(stats)
    assert list(doc) == ["total_trials", "postselected", "outcomes"]
    assert [o["label"] for o in doc["outcomes"]] == ["P1", "P2", "P3"]
    assert sum(o["count"] for o in doc["outcomes"]) == doc["postselected"]
    lines = stats_csv(stats).splitlines()
    assert lines[0] == "label,count,p,stderr"
    assert len(lines) == 4


def test_event_at_final_time_counts(preset):
    # an event at t_f still acts before post-selection
    s = preset.with_events(solenoid_event(3, preset.t_f))
    tt = TwoTimeState(s)
    stats = run_trials(RunConfig(100000, 6, s))
    p = abs(overlap(tt, 0.0)) ** 2
    assert abs(stats.rate - p) <= 4 * math.sqrt(p * (1 - p) / 1e5)


def test_z_scores_across_seeds(preset):
    # 100 independent seeds: |z| <= 4 for at least 99 of them
    dec = ProjectiveDecomposition.boxes(3)
    abl = abl_probabilities(TwoTimeState(preset), dec, 0.6)
    good = 0
    for seed in range(100):
        stats = run_trials(RunConfig(20000, seed, preset, MeasurementPlan(0.6, dec)))
        good += compare_to_abl(stats, abl).ok
    assert good >= 99


def test_random_scenarios_against_abl(rng):
    for _ in range(10):
        s = random_scenario(rng)
        dec = ProjectiveDecomposition.boxes(s.dim)
        t = float(rng.uniform(s.t_i, s.t_f))
        stats = run_trials(RunConfig(50000, int(rng.integers(2**63)), s, MeasurementPlan(t, dec)))
        assert compare_to_abl(stats, abl_probabilities(TwoTimeState(s), dec, t)).ok
