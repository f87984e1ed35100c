"""Shapley-value variance decomposition with a nested conditional-variance
cost estimator.

The contribution of input l is the permutation average of the marginal
increase in the cost function c(J) = E[Var[Y | Z_-J]] when l joins the set J
of redrawn inputs.  c is estimated by a two-loop scheme: K outer draws fix
Z_-J, I inner draws redraw Z_J, and the inner sample variances are averaged
with 1/(K(I-1)) normalization.  Subset costs are memoized per macro-
replication, so both the exact (all L! orderings) and the permutation-sampled
estimators touch at most 2^L cost evaluations, and the telescoping identity
sum(s) = c(full) - c(empty) holds exactly for the cached estimates.

Models are deterministic callables mapping an (n, L) matrix of uniform seeds
in [0,1) to n outputs; fixing an input means reusing its seed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .randomness import RngStream

__all__ = [
    "InputIndexSet",
    "ShapleyResult",
    "TooFewSamplesError",
    "TooManyInputsError",
    "sample_variance",
    "estimate_cost",
    "shapley_exact",
    "shapley_sampled",
    "relative_contributions",
]

MAX_EXACT_INPUTS = 8


class TooFewSamplesError(ValueError):
    pass


class TooManyInputsError(ValueError):
    pass


def sample_variance(outputs) -> float:
    """Unbiased sample variance with 1/(n-1) normalization."""
    arr = np.asarray(outputs, dtype=float)
    if arr.size < 2:
        raise TooFewSamplesError(f"need at least 2 outputs, got {arr.size}")
    return float(np.var(arr, ddof=1))


@dataclass(frozen=True)
class InputIndexSet:
    """A validated subset of input indices with its complement derivable."""

    n_inputs: int
    indices: frozenset

    @classmethod
    def of(cls, n_inputs: int, indices) -> "InputIndexSet":
        idx = frozenset(int(i) for i in indices)
        if n_inputs < 1 or n_inputs > 16:
            raise ValueError(f"n_inputs must be in 1..16, got {n_inputs}")
        if any(i < 0 or i >= n_inputs for i in idx):
            raise ValueError(f"indices {sorted(idx)} outside 0..{n_inputs - 1}")
        return cls(n_inputs, idx)

    @property
    def mask(self) -> int:
        out = 0
        for i in self.indices:
            out |= 1 << i
        return out

    def complement(self) -> "InputIndexSet":
        rest = frozenset(range(self.n_inputs)) - self.indices
        return InputIndexSet(self.n_inputs, rest)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass
class ShapleyResult:
    """Per-input variance contributions for one macro-replication."""

    labels: tuple
    s: np.ndarray
    total_variance: float
    estimator_kind: str

    @property
    def rc(self) -> np.ndarray:
        if self.total_variance == 0.0:
            return np.zeros_like(self.s)
        return self.s / self.total_variance


class _CostEstimator:
    """Memoized two-loop cost estimates sharing one set of outer/inner seeds.

    Outer seeds (one per input per outer sample) are reused by every subset
    that holds the input fixed; inner seeds likewise, so cached subset costs
    are coherent across the permutation sweep.
    """

    def __init__(self, model, n_inputs: int, k_outer: int, i_inner: int,
                 stream: RngStream) -> None:
        if k_outer < 1:
            raise TooFewSamplesError("need at least one outer sample")
        if i_inner < 2:
            raise TooFewSamplesError("need at least two inner samples")
        self.model = model
        self.n_inputs = n_inputs
        self.k = k_outer
        self.i = i_inner
        self.outer = np.column_stack(
            [stream.child("outer", l).random(k_outer) for l in range(n_inputs)]
        )
        self.inner = [
            stream.child("inner", l).random(k_outer * i_inner).reshape(k_outer, i_inner)
            for l in range(n_inputs)
        ]
        self._cache: dict[int, float] = {0: 0.0}

    def cost(self, mask: int) -> float:
        cached = self._cache.get(mask)
        if cached is not None:
            return cached
        k, i, L = self.k, self.i, self.n_inputs
        u = np.empty((k, i, L))
        for l in range(L):
            if mask >> l & 1:
                u[:, :, l] = self.inner[l]
            else:
                u[:, :, l] = self.outer[:, l][:, None]
        y = np.asarray(self.model(u.reshape(k * i, L)), dtype=float).reshape(k, i)
        value = float(np.var(y, axis=1, ddof=1).mean())
        self._cache[mask] = value
        return value


def estimate_cost(
    model,
    n_inputs: int,
    subset,
    k_outer: int,
    i_inner: int,
    seed: int,
    rep_index: int = 0,
) -> float:
    """Estimate c(J) = E[Var[Y | Z_-J]] for the redrawn index set `subset`
    (an InputIndexSet or any iterable of indices)."""
    if not isinstance(subset, InputIndexSet):
        subset = InputIndexSet.of(n_inputs, subset)
    elif subset.n_inputs != n_inputs:
        raise ValueError("subset sized for a different input count")
    stream = RngStream(seed, ("shapley-cost", rep_index))
    est = _CostEstimator(model, n_inputs, k_outer, i_inner, stream)
    return est.cost(subset.mask)


def _shapley_from_permutations(est: _CostEstimator, perms) -> np.ndarray:
    L = est.n_inputs
    s = np.zeros(L)
    count = 0
    for perm in perms:
        mask = 0
        prev = 0.0
        for l in perm:
            mask |= 1 << int(l)
            c = est.cost(mask)
            s[int(l)] += c - prev
            prev = c
        count += 1
    if count == 0:
        raise TooFewSamplesError("need at least one permutation")
    return s / count


def shapley_exact(
    model,
    n_inputs: int,
    k_outer: int,
    i_inner: int,
    seed: int,
    rep_index: int = 0,
    labels: tuple | None = None,
) -> ShapleyResult:
    """Average the marginal cost increments over all L! input orderings."""
    if n_inputs > MAX_EXACT_INPUTS:
        raise TooManyInputsError(
            f"{n_inputs}! permutations is infeasible; use shapley_sampled"
        )
    stream = RngStream(seed, ("shapley", rep_index))
    est = _CostEstimator(model, n_inputs, k_outer, i_inner, stream)
    s = _shapley_from_permutations(est, itertools.permutations(range(n_inputs)))
    return ShapleyResult(
        labels=labels or tuple(f"z{l}" for l in range(n_inputs)),
        s=s,
        total_variance=est.cost((1 << n_inputs) - 1),
        estimator_kind=f"exact({math.factorial(n_inputs)})",
    )


def shapley_sampled(
    model,
    n_inputs: int,
    m_permutations: int,
    k_outer: int,
    i_inner: int,
    seed: int,
    rep_index: int = 0,
    labels: tuple | None = None,
) -> ShapleyResult:
    """Average the marginal cost increments over m uniformly random orderings
    (drawn with replacement); unbiased for the exact estimator."""
    if m_permutations < 1:
        raise TooFewSamplesError("need at least one permutation")
    stream = RngStream(seed, ("shapley", rep_index))
    est = _CostEstimator(model, n_inputs, k_outer, i_inner, stream)
    perm_stream = stream.child("perms")
    perms = (perm_stream.permutation(n_inputs) for _ in range(m_permutations))
    s = _shapley_from_permutations(est, perms)
    return ShapleyResult(
        labels=labels or tuple(f"z{l}" for l in range(n_inputs)),
        s=s,
        total_variance=est.cost((1 << n_inputs) - 1),
        estimator_kind=f"sampled({m_permutations})",
    )


def relative_contributions(results: list[ShapleyResult]):
    """Average the per-replication relative contributions s_l / Var_j and
    report the standard error across macro-replications."""
    if len(results) < 2:
        raise TooFewSamplesError("need at least two macro-replications")
    rcs = np.vstack([r.rc for r in results])
    mean = rcs.mean(axis=0)
    stderr = rcs.std(axis=0, ddof=1) / math.sqrt(len(results))
    return mean, stderr
