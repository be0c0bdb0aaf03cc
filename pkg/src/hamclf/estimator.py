"""The hard-thresholding anova missing-data (HAM) classifier.

Fitting estimates every anova component ``f_w`` for which the training data
has available cases, using a k-nearest-neighbour average restricted to the
coordinates of ``w``:

    f_w(x) = mean of the k_w nearest labels - 1/2 - sum_{w' < w} f_{w'}(x).

The empirical signal strength of each component is then hard-thresholded,
scanning from the largest patterns downwards, to choose an antichain; the final
regression estimate sums the components on that antichain and below it.

The downward scan skips a pattern only when an already selected pattern lies
strictly above it.  This is what lets incomparable patterns such as
``0110`` and ``0001`` both be selected.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .data import TrainingArrays, training_arrays
from .lattice import (
    Pattern,
    all_patterns,
    canonical,
    down_closure,
    is_antichain,
    pattern_set,
    strict_dominators,
    strict_subpatterns,
)
from .neighbors import IndexedPoints

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD_SCALE = 1 / 16


class PatternUnobservable(ValueError):
    """The requested pattern has no available cases in the training data."""


def _as_fraction(x: float) -> Fraction | None:
    """Exact small-denominator rational equal to ``x`` up to float rounding, if any."""
    x = float(x)
    if not math.isfinite(x):
        return None
    frac = Fraction(x).limit_denominator(10_000)
    if abs(float(frac) - x) <= 1e-12 * max(1.0, abs(x)):
        return frac
    return None


def floor_power(n: int, exponent) -> int:
    """floor(n ** exponent) for a nonnegative exponent, exact for rational exponents.

    Plain float evaluation gets cases like 1000 ** (2/3) wrong (99.999...).
    """
    n = int(n)
    if n < 0:
        raise ValueError("floor_power needs n >= 0")
    if n in (0, 1):
        return n if exponent > 0 or n == 1 else 1
    frac = exponent if isinstance(exponent, Fraction) else _as_fraction(exponent)
    approx = n ** float(exponent)
    if frac is None or frac.numerator > 256 or frac.denominator > 256:
        return int(math.floor(approx * (1 + 4e-16)))
    p, q = frac.numerator, frac.denominator
    target = n ** p
    m = int(approx)
    while m ** q > target:
        m -= 1
    while (m + 1) ** q <= target:
        m += 1
    return m


def gamma_omega(gamma, omega: Pattern) -> float:
    """Tail exponent of a pattern: the smallest gamma_j over its observed coordinates."""
    coords = omega.coords
    if not coords:
        raise ValueError("the empty pattern has no tail exponent")
    return min(float(gamma[j]) for j in coords)


def _exponent_parts(g, beta, alpha, d_omega):
    fr = [_as_fraction(v) for v in (g, beta, alpha)]
    if None not in fr:
        g, beta, alpha = fr
        return 2 * beta * g, g * (2 * beta + d_omega) + alpha * beta, True
    g, beta, alpha = float(g), float(beta), float(alpha)
    return 2 * beta * g, g * (2 * beta + d_omega) + alpha * beta, False


def compute_k(n_omega: int, gamma_w: float, beta: float, alpha: float, d_omega: int) -> int:
    """Neighbour count 1 + floor(n ** (2 b g / (g (2b + d) + a b))), capped at n."""
    if n_omega < 1:
        raise ValueError("n_omega must be positive")
    num, den, _ = _exponent_parts(gamma_w, beta, alpha, d_omega)
    if den == 0:
        log.warning("degenerate neighbour exponent (gamma=%s, alpha*beta=0); using k = n", gamma_w)
        return int(n_omega)
    k = 1 + floor_power(n_omega, num / den)
    if k > n_omega:
        log.debug("k=%d exceeds n=%d; capped", k, n_omega)
        k = int(n_omega)
    return k


def compute_tau(n_omega: int, gamma_w: float, beta: float, alpha: float, d_omega: int,
                threshold_scale: float = DEFAULT_THRESHOLD_SCALE) -> float:
    """Threshold scale * n ** (-b g / (2 (g (2b + d) + a b)))."""
    num, den, _ = _exponent_parts(gamma_w, beta, alpha, d_omega)
    if den == 0:
        log.warning("degenerate threshold exponent; using tau = threshold_scale")
        return float(threshold_scale)
    expo = float(num / (4 * den))
    return float(threshold_scale) * float(n_omega) ** (-expo)


@dataclass
class HamHyperParams:
    """Hyperparameters.  ``gamma=None`` means the all-ones vector."""

    gamma: tuple | None = None
    beta: float = 1.0
    alpha: float = 1.0
    threshold_scale: float = DEFAULT_THRESHOLD_SCALE
    omega_oracle: frozenset | None = None

    def __post_init__(self):
        if self.gamma is not None:
            self.gamma = tuple(float(g) for g in self.gamma)
            if any(not math.isfinite(g) or g < 0 for g in self.gamma):
                raise ValueError("gamma entries must be finite and nonnegative")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError("alpha must be finite and nonnegative")
        if not (math.isfinite(self.threshold_scale) and self.threshold_scale > 0):
            raise ValueError("threshold_scale must be positive")
        if self.omega_oracle is not None:
            self.omega_oracle = pattern_set(self.omega_oracle)
            if not is_antichain(self.omega_oracle):
                raise ValueError("omega_oracle must be an antichain")

    def gamma_vector(self, d: int) -> tuple:
        if self.gamma is None:
            return (1.0,) * d
        if len(self.gamma) != d:
            raise ValueError(f"gamma has length {len(self.gamma)}, data has d={d}")
        return self.gamma


@dataclass
class PatternEstimate:
    """Per-pattern fit: available rows, k, threshold, signal estimate, fitted values."""

    omega: Pattern
    n: int
    k: int
    tau: float
    sigma_hat_sq: float
    rows: np.ndarray
    values: np.ndarray

    @property
    def fitted_f(self) -> dict:
        return {int(r): float(v) for r, v in zip(self.rows, self.values)}

    @property
    def selected_candidate(self) -> bool:
        return self.sigma_hat_sq >= self.tau


def select_omega(estimates: dict) -> frozenset:
    """Hard-threshold scan from the largest patterns down; returns an antichain.

    The empty pattern is never a candidate.
    """
    chosen: set = set()
    for omega in canonical((w for w in estimates if w.mask != 0), reverse_dim=True):
        if strict_dominators(omega, chosen):
            continue
        est = estimates[omega]
        if est.sigma_hat_sq >= est.tau:
            chosen.add(omega)
    return frozenset(chosen)


@dataclass
class FittedHam:
    d: int
    hyper: HamHyperParams
    f0_hat: float
    estimates: dict
    omega_hat: frozenset
    index: IndexedPoints
    y: np.ndarray
    notes: list = field(default_factory=list)

    @property
    def active_patterns(self) -> frozenset:
        return down_closure(self.omega_hat) | {Pattern.zeros(self.d)}

    @property
    def observable(self) -> frozenset:
        return frozenset(self.estimates) | {Pattern.zeros(self.d)}

    def components(self, X0, patterns) -> dict:
        """Estimated f_w at each query row, for ``patterns`` and everything below them."""
        X0 = np.atleast_2d(np.asarray(X0, dtype=np.float64))
        if X0.shape[1] != self.d:
            raise ValueError(f"query points need {self.d} coordinates")
        need = down_closure(frozenset(patterns))
        for w in need:
            if w.mask and w not in self.estimates:
                raise PatternUnobservable(f"pattern {w} has no available cases")
        out = {}
        for w in canonical(need):
            if w.mask == 0:
                out[w] = np.full(len(X0), self.f0_hat)
                continue
            est = self.estimates[w]
            nbrs = self.index.k_nearest_positions(w, X0, est.k, est.rows)
            val = self.y[nbrs].sum(axis=1) / est.k - 0.5
            for sub in strict_subpatterns(w):
                val = val - out[sub]
            out[w] = val
        return out

    def estimate_f(self, omega: Pattern, x0) -> float:
        if omega.mask == 0:
            return self.f0_hat
        return float(self.components(np.asarray(x0)[None, :], [omega])[omega][0])

    def decision_function(self, X0) -> np.ndarray:
        """Estimated regression function at each query row."""
        comps = self.components(X0, self.active_patterns)
        eta = np.full(np.atleast_2d(X0).shape[0], 0.5)
        for w in canonical(self.active_patterns):
            eta = eta + comps[w]
        return eta

    def predict(self, X0) -> np.ndarray:
        return (self.decision_function(X0) >= 0.5).astype(np.int64)

    def diagnostics(self) -> list[dict]:
        rows = [{"pattern": str(Pattern.zeros(self.d)), "n": len(self.y), "k": len(self.y),
                 "tau": float("nan"), "sigma_hat_sq": float("nan"),
                 "selected": False, "active": True}]
        for w in canonical(self.estimates):
            e = self.estimates[w]
            rows.append({"pattern": str(w), "n": e.n, "k": e.k, "tau": e.tau,
                         "sigma_hat_sq": e.sigma_hat_sq, "selected": w in self.omega_hat,
                         "active": w in self.active_patterns})
        return rows


def available_counts(masks: np.ndarray, d: int) -> np.ndarray:
    """n_w for every mask w in 0..2^d-1."""
    distinct, counts = np.unique(np.asarray(masks, dtype=np.int64), return_counts=True)
    all_masks = np.arange(1 << d, dtype=np.int64)
    n = np.zeros(1 << d, dtype=np.int64)
    for o, c in zip(distinct, counts):
        n += c * ((all_masks & ~o) == 0)
    return n


def fit(train, hyper: HamHyperParams | None = None, backend: str | None = None) -> FittedHam:
    hyper = hyper or HamHyperParams()
    data: TrainingArrays = training_arrays(train)
    n, d = len(data), data.d
    y = np.asarray(data.y, dtype=np.int64)
    if np.any((y != 0) & (y != 1)):
        raise ValueError("labels must be 0 or 1")
    gamma = hyper.gamma_vector(d)
    masks = np.asarray(data.masks, dtype=np.int64)
    counts = available_counts(masks, d)
    index = IndexedPoints(data.X, backend=backend)
    f0_hat = int(y.sum()) / n - 0.5
    notes: list[str] = []

    estimates: dict[Pattern, PatternEstimate] = {}
    fitted = {0: np.full(n, f0_hat)}
    for w in all_patterns(d)[1:]:
        n_w = int(counts[w.mask])
        if n_w == 0:
            continue
        rows = np.nonzero((masks & w.mask) == w.mask)[0].astype(np.intp)
        g = gamma_omega(gamma, w)
        k = compute_k(n_w, g, hyper.beta, hyper.alpha, w.dim)
        tau = compute_tau(n_w, g, hyper.beta, hyper.alpha, w.dim, hyper.threshold_scale)
        nbrs = index.k_nearest_positions(w, data.X[rows], k, rows)
        val = y[nbrs].sum(axis=1) / k - 0.5
        for sub in strict_subpatterns(w):
            val = val - fitted[sub.mask][rows]
        full = np.full(n, np.nan)
        full[rows] = val
        fitted[w.mask] = full
        sigma = math.fsum(val * val) / n_w
        estimates[w] = PatternEstimate(w, n_w, k, tau, sigma, rows, val)

    if hyper.omega_oracle is not None:
        if any(p.d != d for p in hyper.omega_oracle):
            raise ValueError("omega_oracle patterns have the wrong dimension")
        kept = frozenset(p for p in hyper.omega_oracle if p.mask == 0 or p in estimates)
        dropped = hyper.omega_oracle - kept
        if dropped:
            msg = "oracle patterns without available cases dropped: " + ", ".join(map(str, canonical(dropped)))
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            notes.append(msg)
        omega_hat = frozenset(p for p in kept if p.mask != 0)
    else:
        omega_hat = select_omega(estimates)
    return FittedHam(d, hyper, f0_hat, estimates, omega_hat, index, y, notes)


__all__ = [
    "FittedHam", "HamHyperParams", "PatternEstimate", "PatternUnobservable",
    "available_counts", "compute_k", "compute_tau", "fit", "floor_power",
    "gamma_omega", "select_omega",
]
