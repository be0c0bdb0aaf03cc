"""Repeated train/test experiments comparing HAM with the kNN baselines.

Within one repeat every method sees the same training and test draw, so
method comparisons are paired.  Repeats use independent generators derived
from the base seed and may run in a process pool; results never depend on the
number of workers.
"""
from __future__ import annotations

import csv
import io
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from . import baselines
from .estimator import HamHyperParams, fit as fit_ham, gamma_omega, _as_fraction
from .lattice import Pattern, canonical, format_set, is_antichain, pattern_set
from .scenarios import Scenario, rng_stream

METHODS = ("ham", "oracle_ham", "cc", "zi", "mi")
METHOD_ALIASES = {"oracle": "oracle_ham"}
RESULT_HEADER = ["setting", "n", "method", "repeat", "test_error", "bayes_error",
                 "excess_error", "omega_hat", "wall_time_ms"]
SUMMARY_HEADER = ["setting", "n", "method", "applicable", "mean", "sd", "min", "q1",
                  "median", "q3", "max", "mean_excess", "bayes_risk"]


def normalise_methods(methods) -> tuple:
    out = []
    for m in methods:
        m = METHOD_ALIASES.get(m.strip(), m.strip())
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)} (or 'oracle')")
        if m not in out:
            out.append(m)
    if not out:
        raise ValueError("at least one method is required")
    return tuple(out)


@dataclass
class ExperimentSpec:
    scenario: Scenario
    n_train: int
    m_test: int = 1000
    repeats: int = 100
    methods: tuple = METHODS
    base_seed: int = 0
    hyper: HamHyperParams = field(default_factory=HamHyperParams)

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if self.n_train < 1:
            raise ValueError("n_train must be at least 1")
        if self.m_test < 1:
            raise ValueError("m_test must be at least 1")
        self.methods = normalise_methods(self.methods)


@dataclass
class TrialRecord:
    setting: str
    n: int
    method: str
    repeat_index: int
    test_error: float | None
    bayes_error_on_test: float
    omega_hat: frozenset | None = None
    wall_time_ms: float = 0.0
    n_errors: int | None = None
    note: str = ""

    @property
    def applicable(self) -> bool:
        return self.test_error is not None

    @property
    def excess_error(self) -> float | None:
        return None if self.test_error is None else self.test_error - self.bayes_error_on_test


def _fit_predict(method: str, spec: ExperimentSpec, train, X_test):
    if method == "ham":
        model = fit_ham(train, spec.hyper)
        return model.predict(X_test), model.omega_hat
    if method == "oracle_ham":
        hyper = HamHyperParams(spec.hyper.gamma, spec.hyper.beta, spec.hyper.alpha,
                               spec.hyper.threshold_scale, spec.scenario.omega_star)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            model = fit_ham(train, hyper)
        return model.predict(X_test), model.omega_hat
    fitter = {"cc": baselines.fit_complete_case, "zi": baselines.fit_zero_impute,
              "mi": baselines.fit_mean_impute}[method]
    return fitter(train).predict(X_test), None


def run_trial(spec: ExperimentSpec, repeat_index: int) -> list[TrialRecord]:
    scn = spec.scenario
    train = scn.sample_train_arrays(spec.n_train, rng_stream(spec.base_seed, repeat_index, "train"))
    X_test, y_test = scn.sample_test_arrays(spec.m_test, rng_stream(spec.base_seed, repeat_index, "test"))
    bayes_err = int((scn.bayes_classify(X_test) != y_test).sum()) / spec.m_test
    records = []
    for method in spec.methods:
        t0 = time.perf_counter()
        try:
            pred, omega = _fit_predict(method, spec, train, X_test)
        except ValueError as exc:
            records.append(TrialRecord(scn.tag, spec.n_train, method, repeat_index, None, bayes_err,
                                       wall_time_ms=(time.perf_counter() - t0) * 1e3, note=str(exc)))
            continue
        wrong = int((pred != y_test).sum())
        records.append(TrialRecord(scn.tag, spec.n_train, method, repeat_index, wrong / spec.m_test,
                                   bayes_err, omega, (time.perf_counter() - t0) * 1e3, wrong))
    return records


def _trial_job(args):
    spec, r = args
    return run_trial(spec, r)


def run_experiment(spec: ExperimentSpec, workers: int = 1, progress=None) -> list[TrialRecord]:
    """All repeats, ordered by (repeat, method position in ``spec.methods``)."""
    jobs = [(spec, r) for r in range(spec.repeats)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_trial_job, jobs))
    else:
        chunks = []
        for job in jobs:
            chunks.append(_trial_job(job))
            if progress:
                progress(job[1])
    order = {m: i for i, m in enumerate(spec.methods)}
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda rec: (rec.repeat_index, order[rec.method]))
    return records


def quantile7(values, q: float) -> float:
    """Linear-interpolation (type 7) sample quantile."""
    xs = sorted(values)
    h = (len(xs) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


@dataclass
class MethodSummary:
    method: str
    applicable: int
    mean: float
    sd: float
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean_excess: float


def summarise(records: list[TrialRecord], methods=None) -> list[MethodSummary]:
    methods = methods or list(dict.fromkeys(r.method for r in records))
    out = []
    nan = float("nan")
    for m in methods:
        errs = [r.test_error for r in records if r.method == m and r.applicable]
        excess = [r.excess_error for r in records if r.method == m and r.applicable]
        if not errs:
            out.append(MethodSummary(m, 0, nan, nan, nan, nan, nan, nan, nan, nan))
            continue
        mean = math.fsum(errs) / len(errs)
        sd = math.sqrt(math.fsum((e - mean) ** 2 for e in errs) / (len(errs) - 1)) if len(errs) > 1 else 0.0
        out.append(MethodSummary(m, len(errs), mean, sd, min(errs), quantile7(errs, 0.25),
                                 quantile7(errs, 0.5), quantile7(errs, 0.75), max(errs),
                                 math.fsum(excess) / len(excess)))
    return out


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    if isinstance(v, float):
        return repr(round(v, 12))
    return str(v)


def records_csv(records: list[TrialRecord], include_timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_HEADER)
    for r in records:
        w.writerow([
            r.setting[-1], r.n, r.method, r.repeat_index, _fmt(r.test_error),
            _fmt(r.bayes_error_on_test), _fmt(r.excess_error),
            format_set(r.omega_hat) if r.omega_hat is not None else "",
            _fmt(round(r.wall_time_ms, 3)) if include_timing else "NA",
        ])
    return buf.getvalue()


def summary_csv(spec: ExperimentSpec, records: list[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    risk = spec.scenario.bayes_risk()
    for s in summarise(records, spec.methods):
        w.writerow([spec.scenario.number, spec.n_train, s.method, s.applicable, _fmt(s.mean), _fmt(s.sd),
                    _fmt(s.min), _fmt(s.q1), _fmt(s.median), _fmt(s.q3), _fmt(s.max),
                    _fmt(s.mean_excess), _fmt(risk)])
    return buf.getvalue()


@dataclass
class RateReport:
    rate: float
    terms: dict
    unobserved: tuple
    empty: bool = False

    @property
    def unobserved_flag(self) -> bool:
        return bool(self.unobserved)


def minimax_rate(omega_star, n_by_pattern: dict, gamma=None, beta: float = 1.0,
                 alpha: float = 1.0) -> RateReport:
    """max over observed w in the antichain of n_w ** (-b g (1 + a) / (g (2b + d_w) + a b)).

    Returns rate 1 with the unobserved flag when some pattern has no available
    cases, and rate 0 flagged ``empty`` for an empty antichain.
    """
    omega_star = pattern_set(omega_star)
    if not is_antichain(omega_star):
        raise ValueError("omega_star must be an antichain")
    if not omega_star:
        return RateReport(0.0, {}, (), empty=True)
    d = next(iter(omega_star)).d
    gamma = (1.0,) * d if gamma is None else tuple(float(g) for g in gamma)
    if len(gamma) != d:
        raise ValueError(f"gamma has length {len(gamma)}, patterns have d={d}")
    counts = {(Pattern.parse(k) if isinstance(k, str) else k): int(v) for k, v in n_by_pattern.items()}
    if any(v < 0 for v in counts.values()):
        raise ValueError("counts must be nonnegative")
    terms, unobserved = {}, []
    for w in canonical(omega_star):
        n_w = counts.get(w, 0)
        if n_w == 0:
            unobserved.append(w)
            continue
        terms[w] = _rate_term(n_w, gamma_omega(gamma, w) if w.mask else math.inf, beta, alpha, w.dim)
    if unobserved:
        return RateReport(1.0, terms, tuple(unobserved))
    return RateReport(max(terms.values()), terms, ())


def _rate_term(n_w: int, g: float, beta: float, alpha: float, d_w: int) -> float:
    if math.isinf(g):
        # The empty pattern: the exponent tends to (1 + alpha) / 2 as gamma grows.
        return float(n_w) ** (-(1 + alpha) / 2)
    fr = [_as_fraction(v) for v in (g, beta, alpha)]
    if None not in fr:
        g, beta, alpha = fr
        den = g * (2 * beta + d_w) + alpha * beta
        expo = beta * g * (1 + alpha) / den if den else Fraction(0)
        return float(n_w) ** (-float(expo))
    den = g * (2 * beta + d_w) + alpha * beta
    return float(n_w) ** (-(beta * g * (1 + alpha) / den)) if den else 1.0
