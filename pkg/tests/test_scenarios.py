import math

import numpy as np
import pytest

from hamclf.lattice import pattern_set
from hamclf.scenarios import (
    Scenario, bayes_classify, bayes_risk, midpoints, rng_stream, sample_test, sample_train,
    to_finite_distribution, true_eta,
)

S1, S2, S3 = (Scenario(f"setting{k}") for k in (1, 2, 3))


def test_omega_star_and_dims():
    assert S1.omega_star == pattern_set(["10"])
    assert S2.omega_star == pattern_set(["0110", "0001"])
    assert S3.omega_star == pattern_set(["10", "01"])
    assert (S1.d, S2.d, S3.d) == (2, 4, 2)
    assert Scenario.from_number(2) == S2


def test_invalid_scenarios():
    with pytest.raises(ValueError):
        Scenario("setting4")
    with pytest.raises(ValueError):
        Scenario("setting1", p=1.0)


class TestEta:
    def test_examples(self):
        assert true_eta(S1, [0.0, 7.0]) == 0.5
        assert true_eta(S2, [0.3, 0.5, 0.9, 0.5]) == 0.5
        assert true_eta(S3, [1.0, 0.0]) == 1.0

    def test_bayes_classify_setting1(self, rng):
        X = rng.normal(size=(200, 2))
        assert np.array_equal(S1.bayes_classify(X), (X[:, 0] <= 0).astype(int))
        assert bayes_classify(S1, [-0.1, 0.0]) == 1

    def test_range(self, rng):
        for scn in (S1, S2, S3):
            X = rng.random((500, scn.d)) * (6 if scn is S1 else 1) - (3 if scn is S1 else 0)
            eta = scn.eta(X)
            assert np.all((eta >= 0) & (eta <= 1))


class TestBayesRisk:
    def test_setting1_closed_form(self):
        phi = 0.5 * math.erfc(1.0)  # Phi(-sqrt 2)
        assert bayes_risk(S1) == pytest.approx(phi, abs=1e-15)
        assert bayes_risk(S1) == pytest.approx(0.078650, abs=1e-6)

    def test_setting3_quadrature_converged(self):
        assert abs(S3.bayes_risk(400) - S3.bayes_risk(800)) < 1e-5

    def test_setting2_quadrature_converged(self):
        assert abs(S2.bayes_risk(100) - S2.bayes_risk(200)) < 1e-4


class TestSamplers:
    def test_setting3_mechanism_sums_to_one(self):
        X = np.array([[0.5, 0.2], [0.5, 0.8]])
        probs = S3.observation_probabilities(X)
        assert np.allclose(sum(probs.values()), 1.0)
        assert probs[0b11].tolist() == [0.5, 0.25]

    def test_setting2_patterns(self):
        data = S2.sample_train_arrays(2000, rng_stream(0, 0, "train"))
        assert set(np.unique(data.masks)) == {0b0111, 0b1001}

    def test_setting2_mechanism_tracks_x1(self):
        n = 40000
        data = S2.sample_train_arrays(n, rng_stream(1, 0, "train"))
        # x1 is observed in both patterns, so it is available for binning.
        x1 = data.X[:, 0]
        first = data.masks == 0b0111
        for lo in np.arange(0, 1, 0.2):
            sel = (x1 >= lo) & (x1 < lo + 0.2)
            target = x1[sel].mean()
            band = 3 * math.sqrt(target * (1 - target) / sel.sum())
            assert abs(first[sel].mean() - target) <= band

    def test_setting1_pattern_frequency(self):
        n = 100_000
        data = S1.sample_train_arrays(n, rng_stream(2, 0, "train"))
        assert abs(np.mean(data.masks == 3) - 0.49) <= 0.005

    def test_setting1_labels_and_regression(self):
        X, y = S1.sample_test_arrays(100_000, rng_stream(3, 0, "test"))
        assert abs(y.mean() - 0.5) <= 3 * math.sqrt(0.25 / len(y))
        edges = np.quantile(X[:, 0], np.linspace(0, 1, 11))
        for lo, hi in zip(edges[:-1], edges[1:]):
            sel = (X[:, 0] >= lo) & (X[:, 0] < hi)
            eta_bar = S1.eta(X[sel]).mean()
            band = 3 * math.sqrt(max(eta_bar * (1 - eta_bar), 1e-4) / sel.sum())
            assert abs(y[sel].mean() - eta_bar) <= band + 1e-3

    @pytest.mark.parametrize("scn", [S2, S3])
    def test_uniform_regression_tracks_eta(self, scn):
        X, y = scn.sample_test_arrays(60_000, rng_stream(4, 0, "test"))
        bins = np.minimum((X[:, scn.d - 1] * 5).astype(int), 4)
        for b in range(5):
            sel = bins == b
            eta_bar = scn.eta(X[sel]).mean()
            assert abs(y[sel].mean() - eta_bar) <= 3 * math.sqrt(0.25 / sel.sum())

    def test_masking_consistency(self):
        for scn in (S1, S2, S3):
            for s in sample_train(scn, 300, rng_stream(0, 1, "train")):
                assert all(v == 0 for v, b in zip(s.x_masked, s.o.bits) if not b)
                assert s.o.d == scn.d

    def test_setting3_mechanism_frequencies(self):
        data = S3.sample_train_arrays(60_000, rng_stream(5, 0, "train"))
        # x2 is unobserved for some rows, so recover it from a fresh paired draw instead.
        rng = rng_stream(5, 0, "train")
        x, _ = S3._draw_xy(60_000, rng)
        low = x[:, 1] <= 0.5
        for mask, (p_low, p_high) in {0b11: (0.5, 0.25), 0b01: (1 / 6, 0.25),
                                      0b10: (1 / 6, 0.25), 0b00: (1 / 6, 0.25)}.items():
            for sel, p in ((low, p_low), (~low, p_high)):
                freq = np.mean(data.masks[sel] == mask)
                assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / sel.sum())

    def test_seeding(self):
        a = S2.sample_train_arrays(100, rng_stream(9, 2, "train"))
        b = S2.sample_train_arrays(100, rng_stream(9, 2, "train"))
        c = S2.sample_train_arrays(100, rng_stream(9, 3, "train"))
        assert a.X.tobytes() == b.X.tobytes() and a.masks.tobytes() == b.masks.tobytes()
        assert a.X.tobytes() != c.X.tobytes()
        t1 = sample_test(S1, 5, rng_stream(9, 2, "test"))
        assert t1 == sample_test(S1, 5, rng_stream(9, 2, "test"))

    def test_streams_differ_by_purpose(self):
        a = rng_stream(0, 0, "train").random(4)
        b = rng_stream(0, 0, "test").random(4)
        assert not np.array_equal(a, b)


class TestQuadrature:
    def test_midpoints(self):
        assert midpoints(4).tolist() == [0.125, 0.375, 0.625, 0.875]

    @pytest.mark.parametrize("scn, m", [(S1, 30), (S2, 8), (S3, 20)])
    def test_weights_normalised(self, scn, m):
        dist = to_finite_distribution(scn, m)
        assert abs(math.fsum(dist.p) - 1) <= 1e-12
        for w in dist.conditional.values():
            assert abs(math.fsum(w) - 1) <= 1e-12
        dist.validate()

    def test_setting1_has_no_conditionals(self):
        assert to_finite_distribution(S1, 10).conditional == {}

    def test_grid_too_small(self):
        with pytest.raises(ValueError):
            to_finite_distribution(S3, 1)

    def test_setting3_sigma(self):
        from hamclf.anova import decompose, sigma_sq
        from hamclf.lattice import Pattern
        dist = to_finite_distribution(S3, 200)
        dec = decompose(dist)
        assert abs(sigma_sq(dist, dec, Pattern.parse("10")) - 1 / 48) <= 1e-3
        assert abs(sigma_sq(dist, dec, Pattern.parse("01")) - 1 / 32) <= 1e-3
