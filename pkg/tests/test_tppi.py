import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpnm.errors import DimensionMismatch, EmptyInfluence, IndexOutOfRange, InvalidBeta
from tpnm.graph import EventSequence
from tpnm.tpmatrix import tp_matrix
from tpnm.tppi import (
    TPPIVector,
    classic_decay,
    decay,
    influence_max,
    log_pair_probability,
    pair_probability,
    representative_index,
    tppi,
    tppi_vector,
)

from conftest import sequences


def seq(*events):
    return EventSequence("x", tuple(events))


def logistic(x):
    return 1.0 / (1.0 + math.exp(-x))


class TestPairProbability:
    def test_zero_inner_product(self):
        for a in (0.1, 0.5, 1.0):
            assert pair_probability([1, 0], [0, 1], a) == 0.5

    def test_hand_value(self):
        assert pair_probability([1.0], [1.0], 1.0) == pytest.approx(0.7310585786, abs=1e-9)

    def test_far_negative_stays_positive_in_log_space(self):
        assert 0 < pair_probability([-50.0], [1.0], 1.0) < 1e-20
        lp = log_pair_probability([-800.0], [1.0], 1.0)
        assert lp == pytest.approx(-800.0)
        assert math.isfinite(lp)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            pair_probability([1, 2], [1, 2, 3], 0.5)

    def test_weight_range(self):
        with pytest.raises(ValueError):
            pair_probability([1.0], [1.0], 1.5)

    @given(st.floats(-30, 30), st.floats(-30, 30), st.floats(0.01, 1.0))
    def test_open_interval_and_monotone(self, x, y, a):
        lo, hi = sorted((x, y))
        p_lo = pair_probability([lo], [1.0], a)
        p_hi = pair_probability([hi], [1.0], a)
        assert 0 < p_lo <= p_hi < 1


class TestInfluenceMax:
    ids = [1, 2, 3, 4, 5]

    def test_single_event_is_empty_product(self):
        s = seq((1, 0))
        f = np.ones((5, 2))
        assert influence_max(s, 0, f, np.ones((5, 5)), 3, self.ids) == 1.0

    def test_four_neutral_neighbours(self):
        s = seq((1, 0), (2, 1), (3, 2), (4, 3), (5, 4))
        f = np.zeros((5, 2))
        assert influence_max(s, 2, f, np.ones((5, 5)), 2, self.ids) == pytest.approx(0.0625)

    def test_alpha_clipping(self):
        s = seq((1, 0), (2, 1), (3, 2))
        rng = np.random.default_rng(0)
        f = rng.normal(size=(5, 3))
        tp = tp_matrix(s, "tp-initial", self.ids)
        assert influence_max(s, 1, f, tp, 50, self.ids) == influence_max(s, 1, f, tp, 3, self.ids)

    def test_mapping_features(self):
        s = seq((1, 0), (2, 1))
        f = {1: [1.0, 0.0], 2: [1.0, 1.0]}
        expected = logistic(1.0 * 0.5)
        assert influence_max(s, 0, f, np.array([[1, 0.5], [0.5, 1]]), 1) == pytest.approx(expected)

    def test_index_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            influence_max(seq((1, 0)), 1, np.ones((5, 1)), np.ones((5, 5)), 1, self.ids)

    def test_alpha_positive(self):
        with pytest.raises(ValueError):
            influence_max(seq((1, 0)), 0, np.ones((5, 1)), np.ones((5, 5)), 0, self.ids)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 10))
    def test_log_space_matches_direct_product(self, seed, window):
        rng = np.random.default_rng(seed)
        length = window + 1
        s = seq(*[(k + 1, k) for k in range(length)])
        ids = list(range(1, length + 1))
        # keep every probability at or above 0.01
        f = rng.uniform(-1.5, 1.5, size=(length, 2))
        tp = rng.uniform(0.01, 1.0, size=(length, length))
        direct = 1.0
        for j in range(1, length):
            direct *= logistic(float(f[0] @ f[j]) * tp[0, j])
        assert min(logistic(float(f[0] @ f[j]) * tp[0, j]) for j in range(1, length)) >= 0.01
        got = influence_max(s, 0, f, tp, window, ids)
        assert got == pytest.approx(direct, rel=1e-12)


class TestTPPI:
    s = seq((1, 0), (2, 100), (3, 250), (2, 400))
    ids = [1, 2, 3]
    f = np.random.default_rng(1).normal(size=(3, 4))

    def tp(self):
        return tp_matrix(self.s, "tp-initial", self.ids, time_scale=60)

    def test_beta_zero_is_influence_max(self):
        assert tppi(self.s, 1, self.f, self.tp(), 2, 0.0, self.ids) == influence_max(self.s, 1, self.f, self.tp(), 2, self.ids)

    def test_scaling(self):
        s = seq((1, 0), (2, 1))
        f = {1: [0.0], 2: [0.0]}
        # influence 0.5 with one neighbour; beta 0.5 halves it
        assert tppi(s, 0, f, np.ones((2, 2)), 1, 0.5) == pytest.approx(0.25)

    @pytest.mark.parametrize("beta", [1.0, -0.1, 2.0])
    def test_invalid_beta(self, beta):
        with pytest.raises(InvalidBeta):
            tppi(self.s, 0, self.f, self.tp(), 1, beta, self.ids)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 0.999))
    def test_ranking_invariant_to_beta(self, beta):
        base = tppi_vector(self.s, self.f, self.tp(), 2, 0.0, "tp-initial", self.ids).p
        scaled = tppi_vector(self.s, self.f, self.tp(), 2, beta, "tp-initial", self.ids).p
        assert sorted(base, key=lambda v: (base[v], v)) == sorted(scaled, key=lambda v: (scaled[v], v))

    def test_representative_index(self):
        assert representative_index(self.s, "tp-initial") == {1: 0, 2: 1, 3: 2}
        assert representative_index(self.s, "tp-recent") == {1: 0, 2: 3, 3: 2}

    def test_vector_covers_visited_nodes(self):
        vec = tppi_vector(self.s, self.f, self.tp(), 3, 0.2, "tp-recent", self.ids)
        assert set(vec.p) == {1, 2, 3}
        assert all(0 <= v <= 0.8 for v in vec.p.values())

    def test_vector_bounds_checked(self):
        with pytest.raises(ValueError):
            TPPIVector({1: 0.9}, beta=0.5, alpha=1)


class TestDecay:
    @pytest.mark.parametrize("theta, d", [(0.525, 0.622), (0.425, 0.563), (0.55, 0.638)])
    def test_table_values(self, theta, d):
        assert decay([theta]).d == pytest.approx(d, abs=1e-3)

    def test_table_node_examples(self):
        start = decay({1: 0.5, 2: 0.8, 3: 0.1, 4: 0.7})
        falling = decay({1: 0.4, 2: 0.7, 3: 0.0, 4: 0.6})
        # one node rising 0.1 -> 0.4 outweighs two falling nodes
        mixed = decay({1: 0.4, 2: 0.7, 3: 0.4, 4: 0.7})
        assert start.d == pytest.approx(0.622, abs=1e-3)
        assert falling.d == pytest.approx(0.563, abs=1e-3)
        assert mixed.d == pytest.approx(0.638, abs=1e-3)
        assert falling.d < start.d < mixed.d

    def test_no_decay_at_full_influence(self):
        assert decay([1.0, 1.0]).d == 1.0

    def test_empty(self):
        with pytest.raises(EmptyInfluence):
            decay({})

    def test_accepts_tppi_vector(self):
        vec = TPPIVector({1: 0.2, 2: 0.4}, beta=0.0, alpha=3)
        assert decay(vec).theta == pytest.approx(0.3)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.lists(st.floats(0, 1), min_size=1, max_size=20))
    def test_range_and_monotone(self, xs, ys):
        a, b = decay(xs), decay(ys)
        for v in (a, b):
            assert math.exp(-1) - 1e-15 <= v.d <= 1.0
        if a.theta < b.theta:
            assert a.d <= b.d

    def test_classic(self):
        assert classic_decay(6, 0.1) == pytest.approx(0.548, abs=1e-3)
        assert classic_decay(6, 0) == 1.0
        assert classic_decay(0, 123.0) == 1.0

    @given(st.floats(0.01, 10), st.floats(0, 5), st.floats(0.001, 5))
    def test_classic_strictly_decreasing(self, theta, t, dt):
        assert classic_decay(theta, t + dt) < classic_decay(theta, t) or classic_decay(theta, t) == 0.0
