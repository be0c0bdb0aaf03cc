import math

import numpy as np
import pytest

from hamclf.estimator import HamHyperParams
from hamclf.harness import (
    RESULT_HEADER, ExperimentSpec, minimax_rate, normalise_methods, quantile7, records_csv,
    run_experiment, run_trial, summarise, summary_csv,
)
from hamclf.lattice import Pattern, pattern_set
from hamclf.scenarios import Scenario


def small_spec(setting=1, **kw):
    base = dict(n_train=200, m_test=200, repeats=3, base_seed=4)
    base.update(kw)
    return ExperimentSpec(Scenario.from_number(setting), **base)


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            small_spec(repeats=0)
        with pytest.raises(ValueError):
            small_spec(n_train=0)
        with pytest.raises(ValueError):
            small_spec(methods=("ham", "svm"))

    def test_method_aliases(self):
        assert normalise_methods(["ham", "oracle", "ham"]) == ("ham", "oracle_ham")


class TestTrials:
    def test_setting2_cc_inapplicable(self):
        recs = run_experiment(small_spec(2, repeats=4))
        cc = [r for r in recs if r.method == "cc"]
        assert len(cc) == 4 and not any(r.applicable for r in cc)
        assert all(r.applicable for r in recs if r.method != "cc")

    def test_oracle_omega_hat(self):
        spec = small_spec(2)
        for r in run_trial(spec, 0):
            if r.method == "oracle_ham":
                assert r.omega_hat == spec.scenario.omega_star
            elif r.method in ("cc", "zi", "mi"):
                assert r.omega_hat is None

    def test_error_accounting(self):
        spec = small_spec(3)
        for r in run_trial(spec, 1):
            if r.applicable:
                assert 0 <= r.test_error <= 1
                assert r.n_errors == round(r.test_error * spec.m_test)
                assert r.excess_error == r.test_error - r.bayes_error_on_test
                assert r.excess_error >= -3 * math.sqrt(0.25 / spec.m_test)

    def test_bayes_error_band_setting1(self):
        spec = small_spec(1, m_test=1000, repeats=5, methods=("zi",))
        for r in run_experiment(spec):
            assert abs(r.bayes_error_on_test - 0.07865) <= 0.0255

    def test_paired_draws(self):
        # every method in a repeat sees the same test set, so the Bayes error is shared
        recs = run_trial(small_spec(1), 2)
        assert len({r.bayes_error_on_test for r in recs}) == 1

    def test_order_and_determinism(self):
        spec = small_spec(3, repeats=4)
        a = records_csv(run_experiment(spec))
        b = records_csv(run_experiment(spec, workers=3))
        assert a == b
        rows = a.splitlines()
        assert rows[0] == ",".join(RESULT_HEADER)
        keys = [(int(r.split(",")[3]), r.split(",")[2]) for r in rows[1:]]
        assert [k[0] for k in keys] == sorted(k[0] for k in keys)
        assert [k[1] for k in keys[:5]] == ["ham", "oracle_ham", "cc", "zi", "mi"]

    def test_timing_column(self):
        recs = run_experiment(small_spec(1, repeats=1, methods=("zi",)))
        assert records_csv(recs).splitlines()[1].endswith(",NA")
        assert not records_csv(recs, include_timing=True).splitlines()[1].endswith(",NA")

    def test_threshold_scale_passed_through(self):
        spec = small_spec(1, repeats=1, methods=("ham",), hyper=HamHyperParams(threshold_scale=1e6))
        assert run_experiment(spec)[0].omega_hat == frozenset()


class TestSummary:
    def test_quantile7(self):
        xs = [1, 2, 3, 4]
        assert quantile7(xs, 0.25) == 1.75
        assert quantile7(xs, 0.5) == 2.5
        assert quantile7([5], 0.75) == 5
        assert np.isclose(quantile7(xs, 0.9), np.quantile(xs, 0.9))

    def test_single_repeat(self):
        recs = run_experiment(small_spec(1, repeats=1, methods=("mi",)))
        s = summarise(recs)[0]
        assert s.mean == s.min == s.q1 == s.median == s.q3 == s.max == recs[0].test_error
        assert s.sd == 0.0

    def test_inapplicable_summary(self):
        spec = small_spec(2, repeats=2, methods=("cc", "zi"))
        lines = summary_csv(spec, run_experiment(spec)).splitlines()
        assert lines[1].split(",")[3:6] == ["0", "NA", "NA"]


class TestMinimaxRate:
    def test_single_term(self):
        rep = minimax_rate(pattern_set(["10"]), {Pattern.parse("10"): 10000})
        assert rep.rate == pytest.approx(0.01, rel=1e-15)
        assert not rep.unobserved_flag

    def test_unobserved(self):
        rep = minimax_rate(pattern_set(["10", "01"]), {"10": 100})
        assert rep.rate == 1.0 and rep.unobserved_flag
        assert rep.unobserved == (Pattern.parse("01"),)

    def test_setting2_terms(self):
        rep = minimax_rate(pattern_set(["0110", "0001"]), {"0110": 500, "0001": 1000})
        t1 = 500 ** (-2 / 5)
        t2 = 1000 ** (-2 / 4)
        assert rep.terms[Pattern.parse("0110")] == pytest.approx(t1)
        assert rep.terms[Pattern.parse("0001")] == pytest.approx(t2)
        assert rep.rate == pytest.approx(max(t1, t2))

    def test_empty(self):
        rep = minimax_rate(frozenset(), {})
        assert rep.rate == 0.0 and rep.empty

    def test_errors(self):
        with pytest.raises(ValueError):
            minimax_rate(pattern_set(["10", "11"]), {})
        with pytest.raises(ValueError):
            minimax_rate(pattern_set(["10"]), {"10": -1})

    def test_expected_counts_setting2(self):
        # n_0110 counts rows with pattern 1110, observed with probability E[x1] = 1/2
        from hamclf.estimator import available_counts
        from hamclf.scenarios import rng_stream
        data = Scenario("setting2").sample_train_arrays(1000, rng_stream(0, 0, "train"))
        n = available_counts(data.masks, 4)
        assert abs(n[0b0110] - 500) <= 3 * math.sqrt(250)
        assert n[0b0001] == 1000
