"""Exact anova decomposition of a regression function on a finite support.

The decomposition is built pattern by pattern in increasing dimension.  For a
pattern ``w`` the atoms are grouped by their masked coordinates ``x^w``
(exact float equality) and

    f_w(g) = E[eta | X^w = g] - 1/2 - sum_{w' < w} f_{w'}(g),

which is the defining conditional expectation with the terms that are already
functions of ``x^w`` taken out of it.  Component values are stored per group,
so a fine quadrature grid with millions of atoms stays affordable.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .lattice import MAX_DIM, Pattern, all_patterns, canonical, preceq, submasks

_DENSE_LIMIT = 1 << 24


class PatternUnobservable(ValueError):
    """No observed pattern dominates the requested one."""


def ordered_bell(k: int) -> int:
    """Ordered Bell (Fubini) number via B_k = 1 + sum_{j=1}^{k-1} C(k, j) B_j."""
    if not 0 <= k <= MAX_DIM:
        raise ValueError(f"ordered_bell is defined here for 0 <= k <= {MAX_DIM}, got {k}")
    bell = [1, 1]
    for m in range(2, k + 1):
        bell.append(1 + sum(math.comb(m, j) * bell[j] for j in range(1, m)))
    return bell[k]


@dataclass
class FiniteDistribution:
    """Finite-support law of X with the regression value attached to each atom.

    ``conditional`` maps an observation pattern ``o`` to the per-atom weights of
    the law of X given O = o.  Leave it empty when O is independent of X.
    """

    x: np.ndarray
    p: np.ndarray
    eta: np.ndarray
    conditional: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        if self.x.ndim != 2:
            raise ValueError("atoms must form an (n_atoms, d) array")
        self.p = np.asarray(self.p, dtype=np.float64)
        self.eta = np.asarray(self.eta, dtype=np.float64)
        self.conditional = {
            (Pattern.parse(o) if isinstance(o, str) else o): np.asarray(w, dtype=np.float64)
            for o, w in self.conditional.items()
        }
        self._codes = None

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.x.shape[0]

    def column_codes(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-column integer codes of the atom coordinates and the code counts."""
        if self._codes is None:
            codes = np.empty(self.x.shape, dtype=np.int64)
            sizes = np.empty(self.d, dtype=np.int64)
            for j in range(self.d):
                uniq, inv = np.unique(self.x[:, j], return_inverse=True)
                codes[:, j] = inv.ravel()
                sizes[j] = len(uniq)
            self._codes = (codes, sizes)
        return self._codes

    def validate(self) -> None:
        """Raise ValueError naming the first violated invariant."""
        n, d = self.x.shape
        if not 1 <= d <= MAX_DIM:
            raise ValueError(f"invariant violated: 1 <= d <= {MAX_DIM} (d={d})")
        if n == 0:
            raise ValueError("invariant violated: at least one atom is required")
        if self.p.shape != (n,) or self.eta.shape != (n,):
            raise ValueError("invariant violated: p and eta need one entry per atom")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("invariant violated: atom coordinates must be finite")
        if np.any(self.p < 0) or not np.all(np.isfinite(self.p)):
            raise ValueError("invariant violated: p >= 0")
        if abs(math.fsum(self.p) - 1.0) > 1e-12:
            raise ValueError(f"invariant violated: sum(p) == 1 (got {math.fsum(self.p)!r})")
        if np.any(self.eta < 0) or np.any(self.eta > 1) or not np.all(np.isfinite(self.eta)):
            raise ValueError("invariant violated: 0 <= eta <= 1")
        for o, w in self.conditional.items():
            if o.d != d:
                raise ValueError(f"invariant violated: conditional pattern {o} has wrong length")
            if w.shape != (n,) or np.any(w < 0):
                raise ValueError(f"invariant violated: conditional weights for {o} malformed")
            if abs(math.fsum(w) - 1.0) > 1e-12:
                raise ValueError(f"invariant violated: conditional weights for {o} sum to 1")
        codes, sizes = self.column_codes()
        key, _ = _group_keys(codes, sizes, list(range(d)))
        if len(np.unique(key)) != n:
            raise ValueError("invariant violated: atom x vectors are pairwise distinct")

    @classmethod
    def from_json(cls, obj: Mapping) -> "FiniteDistribution":
        try:
            d = int(obj["d"])
            atoms = obj["atoms"]
            x = np.array([a["x"] for a in atoms], dtype=np.float64).reshape(len(atoms), -1)
            p = [a["p"] for a in atoms]
            eta = [a["eta"] for a in atoms]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed distribution JSON: {exc}") from exc
        if x.shape[1] != d:
            raise ValueError(f"invariant violated: every atom x has length d={d}")
        cond = {}
        for key, w in (obj.get("conditional") or {}).items():
            pat = Pattern.parse(key)
            if pat.d != d:
                raise ValueError(f"invariant violated: conditional pattern {key!r} has length d")
            cond[pat] = w
        dist = cls(x, p, eta, cond)
        dist.validate()
        return dist

    @classmethod
    def load(cls, path) -> "FiniteDistribution":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        out = {
            "d": self.d,
            "atoms": [
                {"x": list(map(float, xi)), "p": float(pi), "eta": float(ei)}
                for xi, pi, ei in zip(self.x, self.p, self.eta)
            ],
        }
        if self.conditional:
            out["conditional"] = {str(o): list(map(float, w)) for o, w in self.conditional.items()}
        return out


def _dense_key(codes: np.ndarray, sizes: np.ndarray, cols) -> np.ndarray:
    key = np.zeros(codes.shape[0], dtype=np.int64)
    for j in cols:
        key = key * int(sizes[j]) + codes[:, j]
    return key


def _group_keys(codes: np.ndarray, sizes: np.ndarray, cols: list[int]):
    """Mixed-radix group key over ``cols``; returns (key per atom, table size or None)."""
    total = 1
    for j in cols:
        total *= int(sizes[j])
    if total <= max(_DENSE_LIMIT, 4 * codes.shape[0]):
        return _dense_key(codes, sizes, cols), total
    # Too many cells for a dense table: compress column by column.
    key = np.zeros(codes.shape[0], dtype=np.int64)
    for j in cols:
        key = key * int(sizes[j]) + codes[:, j]
        _, key = np.unique(key, return_inverse=True)
        key = key.ravel().astype(np.int64)
    return key, None


def _weighted_group_mean(key, weights, values, size):
    """Group means with one refinement pass (compensates summation error)."""
    wsum = np.bincount(key, weights=weights, minlength=size)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.bincount(key, weights=weights * values, minlength=size) / wsum
        resid = values - mean[key]
        mean = mean + np.bincount(key, weights=weights * resid, minlength=size) / wsum
    return mean, wsum


@dataclass
class _Component:
    cols: tuple
    table: np.ndarray
    key: np.ndarray | None  # stored only for compressed (sparse) grouping


class Decomposition:
    """Anova components of ``eta`` on the atoms of a finite distribution.

    ``dec[w]`` returns the per-atom values of ``f_w``.
    """

    def __init__(self, dist: FiniteDistribution):
        self.dist = dist
        self.d = dist.d
        self._comp: dict[Pattern, _Component] = {}

    def patterns(self) -> list[Pattern]:
        return canonical(self._comp)

    def _keys(self, w: Pattern) -> np.ndarray:
        comp = self._comp[w]
        if comp.key is not None:
            return comp.key
        codes, sizes = self.dist.column_codes()
        return _dense_key(codes, sizes, comp.cols)

    def _keys_at(self, w: Pattern, rows: np.ndarray) -> np.ndarray:
        comp = self._comp[w]
        if comp.key is not None:
            return comp.key[rows]
        codes, sizes = self.dist.column_codes()
        return _dense_key(codes[rows], sizes, comp.cols)

    def __getitem__(self, w: Pattern) -> np.ndarray:
        comp = self._comp[w]
        if not comp.cols:
            return np.full(self.dist.n_atoms, comp.table[0])
        return comp.table[self._keys(w)]

    def __contains__(self, w) -> bool:
        return w in self._comp

    def group_values(self, w: Pattern) -> np.ndarray:
        """Values of ``f_w`` on the nonempty groups of ``x^w``."""
        t = self._comp[w].table
        return t[np.isfinite(t)]

    @property
    def components(self) -> dict:
        return {w: self[w] for w in self.patterns()}


def decompose(dist: FiniteDistribution) -> Decomposition:
    d = dist.d
    codes, sizes = dist.column_codes()
    dec = Decomposition(dist)
    f0 = _weighted_group_mean(np.zeros(dist.n_atoms, dtype=np.int64), dist.p, dist.eta, 1)[0]
    dec._comp[Pattern.zeros(d)] = _Component((), np.array([f0[0] - 0.5]), None)

    for w in all_patterns(d)[1:]:
        cols = w.coords
        key, size = _group_keys(codes, sizes, list(cols))
        nkeys = size if size is not None else int(key.max()) + 1
        cond_mean, wsum = _weighted_group_mean(key, dist.p, dist.eta, nkeys)
        present = wsum > 0
        if not np.all(present):
            # Zero-mass atoms still get a value; fall back to unit weights there.
            alt, _ = _weighted_group_mean(key, np.ones_like(dist.p), dist.eta, nkeys)
            cond_mean = np.where(present, cond_mean, alt)
        occupied = np.bincount(key, minlength=nkeys) > 0
        # Representative atom per group to evaluate lower-order terms.
        rep = np.full(nkeys, -1, dtype=np.int64)
        rep[key[::-1]] = np.arange(dist.n_atoms - 1, -1, -1)
        rows = rep[occupied]
        acc = cond_mean[occupied] - 0.5
        for m in submasks(w.mask):
            if m == w.mask:
                continue
            sub = Pattern(m, d)
            comp = dec._comp[sub]
            if not comp.cols:
                acc = acc - comp.table[0]
            else:
                acc = acc - comp.table[dec._keys_at(sub, rows)]
        table = np.full(nkeys, np.nan)
        table[occupied] = acc
        dec._comp[w] = _Component(cols, table, None if size is not None else key)
    return dec


def reconstruct(dec: Decomposition) -> np.ndarray:
    """1/2 + sum of all components, per atom."""
    total = np.full(dec.dist.n_atoms, 0.5)
    for w in dec.patterns():
        total = total + dec[w]
    return total


def partial_sum(dec: Decomposition, w: Pattern) -> np.ndarray:
    """1/2 + sum over w' <= w of f_{w'}, per atom (the conditional mean of eta given x^w)."""
    total = np.full(dec.dist.n_atoms, 0.5)
    for sub in dec.patterns():
        if preceq(sub, w):
            total = total + dec[sub]
    return total


def sigma_sq(dist: FiniteDistribution, dec: Decomposition, w: Pattern,
             observed_patterns=None) -> float:
    """Minimum over observed o >= w of E[f_w(X)^2 | O = o].

    With no conditional weights on ``dist`` the marginal weights stand in for
    every conditional law (O independent of X).
    """
    if observed_patterns is None:
        observed_patterns = dist.conditional.keys() if dist.conditional else all_patterns(dist.d)
    candidates = [o for o in observed_patterns if preceq(w, o)]
    if not candidates:
        raise PatternUnobservable(f"pattern {w} is not dominated by any observed pattern")
    comp = dec._comp[w]
    if not comp.cols:
        vals_sq = np.array([comp.table[0] ** 2])
        key = np.zeros(dist.n_atoms, dtype=np.int64)
    else:
        key = dec._keys(w)
        vals_sq = np.nan_to_num(comp.table) ** 2
    best = math.inf
    for o in candidates:
        if dist.conditional:
            if o not in dist.conditional:
                raise PatternUnobservable(f"no conditional weights given for observed pattern {o}")
            weights = dist.conditional[o]
        else:
            weights = dist.p
        gw = np.bincount(key, weights=weights, minlength=len(vals_sq))
        best = min(best, math.fsum(gw * vals_sq))
    return best
