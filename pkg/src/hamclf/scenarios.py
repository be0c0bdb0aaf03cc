"""The three simulation settings: samplers, true regression functions, Bayes rules.

Setting 1
    Two-class Gaussian mixture in d=2 with means -/+ (sqrt 2, 0), identity
    covariance, each coordinate observed independently with probability p.
Setting 2
    X uniform on [0,1]^4, two observation patterns 1110 and 1001 chosen with
    probability x1 and 1 - x1 (never a complete case).
Setting 3
    X uniform on [0,1]^2 with a missingness mechanism that depends on whether
    x2 <= 1/2.

Randomness always comes from an explicit ``numpy.random.Generator``;
:func:`rng_stream` derives independent, reproducible generators for each
repeat and purpose.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .anova import FiniteDistribution
from .data import LabeledSample, TrainingArrays
from .lattice import Pattern, pattern_set

SQRT2 = math.sqrt(2.0)

_OMEGA_STAR = {
    "setting1": ("10",),
    "setting2": ("0110", "0001"),
    "setting3": ("10", "01"),
}
_DIMS = {"setting1": 2, "setting2": 4, "setting3": 2}

# Setting 3 observation patterns in sampling order, as integer masks.
_S3_PATTERNS = (0b11, 0b01, 0b10, 0b00)


def rng_stream(base_seed: int, repeat_index: int, purpose: str) -> np.random.Generator:
    """Generator seeded with base_seed XOR a stable 64-bit hash of (repeat, purpose)."""
    digest = hashlib.blake2b(f"{int(repeat_index)}:{purpose}".encode(), digest_size=8).digest()
    seed = (int(base_seed) & 0xFFFFFFFFFFFFFFFF) ^ int.from_bytes(digest, "little")
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class Scenario:
    tag: str
    p: float = 0.7
    a: float = SQRT2

    def __post_init__(self):
        if self.tag not in _DIMS:
            raise ValueError(f"unknown scenario {self.tag!r}")
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        if self.a <= 0:
            raise ValueError("a must be positive")

    @classmethod
    def from_number(cls, k: int, **kw) -> "Scenario":
        return cls(f"setting{int(k)}", **kw)

    @property
    def number(self) -> int:
        return int(self.tag[-1])

    @property
    def d(self) -> int:
        return _DIMS[self.tag]

    @property
    def omega_star(self) -> frozenset:
        return pattern_set(_OMEGA_STAR[self.tag])

    # -- regression function and Bayes rule -------------------------------

    def eta(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.tag == "setting1":
            return 0.5 + 0.5 * np.tanh(-self.a * X[:, 0])
        if self.tag == "setting2":
            return 0.5 + (X[:, 1] - 0.5) * X[:, 2] ** 2 / 2 + (X[:, 3] - 0.5) / 2
        return 0.25 + X[:, 0] / 2 + np.cos(4 * np.pi * X[:, 1]) / 4

    def bayes_classify(self, X) -> np.ndarray:
        return (self.eta(X) >= 0.5).astype(np.int64)

    def bayes_risk(self, nodes: int = 400) -> float:
        return _bayes_risk(self, nodes)

    # -- samplers ----------------------------------------------------------

    def _draw_xy(self, n: int, rng: np.random.Generator):
        if self.tag == "setting1":
            y = rng.integers(0, 2, size=n)
            z = rng.standard_normal((n, 2))
            shift = np.where(y == 1, -self.a, self.a)
            x = z.copy()
            x[:, 0] += shift
            return x, y.astype(np.int64)
        x = rng.random((n, self.d))
        y = (rng.random(n) < self.eta(x)).astype(np.int64)
        return x, y

    def observation_probabilities(self, X) -> dict:
        """P(O = o | X = x) per pattern mask, as arrays over the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        n = len(X)
        if self.tag == "setting1":
            out = {}
            for m in range(4):
                k = bin(m).count("1")
                out[m] = np.full(n, self.p ** k * (1 - self.p) ** (2 - k))
            return out
        if self.tag == "setting2":
            return {0b0111: X[:, 0].copy(), 0b1001: 1 - X[:, 0]}
        low = X[:, 1] <= 0.5
        full = np.where(low, 0.5, 0.25)
        other = np.where(low, 1 / 6, 0.25)
        return {0b11: full, 0b01: other, 0b10: other.copy(), 0b00: other.copy()}

    def _draw_masks(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n = len(x)
        if self.tag == "setting1":
            seen = rng.random((n, 2)) < self.p
            return seen[:, 0].astype(np.int64) | (seen[:, 1].astype(np.int64) << 1)
        u = rng.random(n)
        if self.tag == "setting2":
            return np.where(u < x[:, 0], 0b0111, 0b1001).astype(np.int64)
        probs = self.observation_probabilities(x)
        cum = np.zeros(n)
        masks = np.full(n, _S3_PATTERNS[-1], dtype=np.int64)
        assigned = np.zeros(n, dtype=bool)
        for m in _S3_PATTERNS[:-1]:
            cum = cum + probs[m]
            hit = ~assigned & (u < cum)
            masks[hit] = m
            assigned |= hit
        return masks

    def sample_train_arrays(self, n: int, rng: np.random.Generator) -> TrainingArrays:
        if n < 1:
            raise ValueError("n must be at least 1")
        x, y = self._draw_xy(n, rng)
        masks = self._draw_masks(x, rng)
        seen = ((masks[:, None] >> np.arange(self.d)) & 1).astype(bool)
        return TrainingArrays(np.where(seen, x, 0.0), y, masks, self.d)

    def sample_test_arrays(self, m: int, rng: np.random.Generator):
        x, y = self._draw_xy(m, rng)
        return x, y

    # -- quadrature bridge -------------------------------------------------

    def to_finite_distribution(self, grid_m: int = 50) -> FiniteDistribution:
        return to_finite_distribution(self, grid_m)


def sample_train(scn: Scenario, n: int, rng: np.random.Generator):
    """Training triples as a list of MaskedSample."""
    return scn.sample_train_arrays(n, rng).samples()


def sample_test(scn: Scenario, m: int, rng: np.random.Generator) -> list[LabeledSample]:
    x, y = scn.sample_test_arrays(m, rng)
    return [LabeledSample(tuple(map(float, xi)), int(yi)) for xi, yi in zip(x, y)]


def true_eta(scn: Scenario, x) -> float:
    return float(scn.eta(np.asarray(x, dtype=np.float64)[None, :])[0])


def bayes_classify(scn: Scenario, x) -> int:
    return int(true_eta(scn, x) >= 0.5)


def bayes_risk(scn: Scenario, nodes: int = 400) -> float:
    return scn.bayes_risk(nodes)


def midpoints(m: int) -> np.ndarray:
    """(2i - 1) / (2m) for i = 1..m."""
    return (2 * np.arange(1, m + 1) - 1) / (2 * m)


@lru_cache(maxsize=None)
def _bayes_risk(scn: Scenario, nodes: int) -> float:
    if scn.tag == "setting1":
        # Equal-weight mixture at distance a from the boundary x1 = 0.
        return 0.5 * math.erfc(scn.a / SQRT2)
    t = midpoints(nodes)
    if scn.tag == "setting3":
        x1, x2 = np.meshgrid(t, t, indexing="ij")
        eta = 0.25 + x1 / 2 + np.cos(4 * np.pi * x2) / 4
        return float(np.minimum(eta, 1 - eta).mean())
    # Setting 2: eta does not involve x1, integrate over (x2, x3, x4).
    x2, x3 = np.meshgrid(t, t, indexing="ij")
    inter = (x2 - 0.5) * x3 ** 2 / 2
    total = 0.0
    for x4 in t:
        eta = 0.5 + inter + (x4 - 0.5) / 2
        total += float(np.minimum(eta, 1 - eta).sum())
    return total / nodes ** 3


def _grid(axes: list[np.ndarray]) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def to_finite_distribution(scn: Scenario, grid_m: int = 50) -> FiniteDistribution:
    """Midpoint-grid discretisation of a scenario.

    Settings 2 and 3 use the uniform law on the unit cube.  Setting 1 uses the
    square [-6, 6]^2 with mixture-density weights renormalised on the grid.
    Conditional laws of X given O are attached for Settings 2 and 3.
    """
    if grid_m < 2:
        raise ValueError("grid_m must be at least 2")
    if scn.tag == "setting1":
        t = -6 + 12 * midpoints(grid_m)
        X = _grid([t, t])
        dens = 0.5 * (np.exp(-((X[:, 0] - scn.a) ** 2) / 2) + np.exp(-((X[:, 0] + scn.a) ** 2) / 2))
        dens = dens * np.exp(-X[:, 1] ** 2 / 2)
        p = dens / dens.sum()
        p = p / math.fsum(p)
        return FiniteDistribution(X, p, np.clip(scn.eta(X), 0.0, 1.0), {})
    t = midpoints(grid_m)
    X = _grid([t] * scn.d)
    n = len(X)
    p = np.full(n, 1.0 / n)
    cond = {}
    for mask, prob in scn.observation_probabilities(X).items():
        w = prob / prob.sum()
        cond[Pattern(mask, scn.d)] = w / math.fsum(w)
    return FiniteDistribution(X, p, np.clip(scn.eta(X), 0.0, 1.0), cond)
