import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import det_counts, eer_sweep, min_dcf_sweep
from tdsv.metrics import DcfParams, ScoreSet, det_curve, det_points, eer, evaluate, min_dcf


def test_scoreset_validation():
    with pytest.raises(ValueError):
        ScoreSet([], [0.1])
    with pytest.raises(ValueError):
        ScoreSet([np.nan], [0.1])


def test_dcf_params_validation():
    with pytest.raises(ValueError):
        DcfParams(p_target=0.0)
    with pytest.raises(ValueError):
        DcfParams(c_miss=0.0, c_fa=0.0)


class TestDet:
    def test_separable_has_zero_point(self):
        pts = det_points(ScoreSet([1.0], [0.0]))
        assert any(p.far == 0 and p.frr == 0 for p in pts)

    def test_sentinels(self):
        pts = det_points(ScoreSet([0.3, 0.5], [0.4]))
        assert (pts[0].far, pts[0].frr) == (1.0, 0.0)
        assert (pts[-1].far, pts[-1].frr) == (0.0, 1.0)
        assert pts[-1].threshold == np.inf

    def test_counting_oracle(self, rng):
        tar = np.round(rng.standard_normal(50) + 1, 1)
        non = np.round(rng.standard_normal(50), 1)
        thr, far, frr = det_curve(ScoreSet(tar, non))
        expected = det_counts(list(tar), list(non))
        assert len(expected) == len(thr)
        for (t0, a0, r0), t1, a1, r1 in zip(expected, thr, far, frr):
            assert (t0, a0, r0) == (t1, a1, r1)

    def test_monotone(self, rng):
        _, far, frr = det_curve(ScoreSet(rng.standard_normal(40), rng.standard_normal(60)))
        assert np.all(np.diff(far) <= 0) and np.all(np.diff(frr) >= 0)


class TestEer:
    def test_separated(self):
        assert eer(ScoreSet([0.9, 0.8], [0.2, 0.1])) == 0.0

    def test_indistinguishable(self):
        assert eer(ScoreSet([0.5, 0.7], [0.5, 0.7])) == 0.5

    def test_interleaved(self):
        tar, non = [0.8, 0.4], [0.6, 0.2]
        assert eer(ScoreSet(tar, non)) == pytest.approx(eer_sweep(tar, non), abs=1e-12)
        assert eer(ScoreSet(tar, non)) == pytest.approx(0.5)

    def test_interpolated_crossing(self):
        # far/frr jump past each other between thresholds; the crossing is interpolated.
        tar, non = [0.3, 0.9, 0.95], [0.1, 0.5]
        assert eer(ScoreSet(tar, non)) == pytest.approx(eer_sweep(tar, non), abs=1e-12)

    def test_sweep_oracle(self, rng):
        for _ in range(20):
            tar = rng.standard_normal(rng.integers(1, 60)) + 0.8
            non = rng.standard_normal(rng.integers(1, 60))
            assert eer(ScoreSet(tar, non)) == pytest.approx(eer_sweep(list(tar), list(non)), abs=1e-9)


class TestMinDcf:
    def test_separated(self):
        assert min_dcf(ScoreSet([0.9, 0.8], [0.2, 0.1])) == 0.0

    def test_identical_scores(self):
        assert min_dcf(ScoreSet([0.5], [0.5])) == pytest.approx(1.0)

    def test_brute_force(self, rng):
        tar = rng.standard_normal(100) + 1
        non = rng.standard_normal(100)
        assert min_dcf(ScoreSet(tar, non)) == pytest.approx(min_dcf_sweep(list(tar), list(non)), abs=1e-9)

    def test_custom_params(self, rng):
        tar, non = rng.standard_normal(30) + 1, rng.standard_normal(30)
        p = DcfParams(0.05, 1.0, 1.0)
        got = min_dcf(ScoreSet(tar, non), p)
        assert got == pytest.approx(min_dcf_sweep(list(tar), list(non), 0.05, 1.0, 1.0), abs=1e-9)


def test_evaluate():
    out = evaluate([0.9, 0.1, 0.8, 0.2], [True, False, True, False])
    assert out == {"eer": 0.0, "mindcf": 0.0, "n_target": 2, "n_nontarget": 2}


scores = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=40)


@settings(max_examples=60, deadline=None)
@given(scores, scores)
def test_rank_transform_invariance(tar, non):
    s = ScoreSet(tar, non)
    t = ScoreSet(np.exp(np.asarray(tar)) * 3 + 1, np.exp(np.asarray(non)) * 3 + 1)
    # exp is strictly increasing but may merge ties near the float grid; skip those.
    if len(set(tar + non)) == len(set(t.targets) | set(t.nontargets)):
        assert eer(s) == eer(t)
        assert min_dcf(s) == min_dcf(t)


@settings(max_examples=60, deadline=None)
@given(scores, scores)
def test_duplication_invariance(tar, non):
    s = ScoreSet(tar, non)
    d = ScoreSet(tar + tar, non + non)
    assert eer(s) == eer(d)
    assert min_dcf(s) == min_dcf(d)


@settings(max_examples=60, deadline=None)
@given(scores, scores)
def test_bounds_and_swap(tar, non):
    s = ScoreSet(tar, non)
    e = eer(s)
    assert 0.0 <= e <= 1.0
    assert 0.0 <= min_dcf(s) <= 1.0 + 1e-12
    assert eer(ScoreSet(-np.asarray(non), -np.asarray(tar))) == pytest.approx(e, abs=1e-12)
