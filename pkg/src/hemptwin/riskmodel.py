"""Lightweight final-product trajectory model for variance decomposition.

The full simulation makes the sampling-to-harvest window t' endogenous
(queueing plus ledger delays), which the conditional-variance estimator
cannot resample independently.  This evaluator therefore replays the
cannabinoid trajectory without queueing: cultivation at the mean configured
duration, t' resampled from an empirical distribution recorded by the full
simulation, growth noises mapped through exact truncated-normal inverse CDFs,
and the multiplicative extraction/winterization/purification pipeline with
the data-driven purification pass count.  Given the seed matrix the output is
fully deterministic, so redrawing a subset of inputs while holding the rest
fixed is exact.

Both cannabinoid targets share the input list eps, t_prime, eps_prime,
q_extract, w_winter, q_u, q_v; the THC model drops q_u, which cannot touch
THC.  The same per-lot removal fractions apply to a repeated purification
pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .config import ScenarioConfig
from .domain import FACTOR_NAMES
from .shapley import (
    ShapleyResult,
    relative_contributions,
    shapley_exact,
    shapley_sampled,
)
from .simulation import run_replication

__all__ = [
    "FinalProductModel",
    "RiskDecomposition",
    "collect_t_prime_samples",
    "decompose_final_product",
    "CBD_FACTORS",
    "THC_FACTORS",
]

CBD_FACTORS = FACTOR_NAMES  # eps, t_prime, eps_prime, q_extract, w_winter, q_u, q_v
THC_FACTORS = tuple(n for n in FACTOR_NAMES if n != "q_u")

_EPS = 1e-12


def _truncated_normal_from_seed(u, sigma, lower):
    """Inverse-CDF map of a U(0,1) seed to N(0, sigma^2) truncated below at
    `lower`; exact, vectorized, and monotone in the seed."""
    lo_cdf = ndtr(lower / np.maximum(sigma, _EPS))
    p = lo_cdf + np.clip(u, _EPS, 1.0 - _EPS) * (1.0 - lo_cdf)
    return sigma * ndtri(p)


@dataclass
class FinalProductModel:
    """Deterministic map from uniform input seeds to final CBD or THC."""

    target: str  # "cbd" or "thc"
    growth_rate: float
    cbd_thc_ratio: float
    lambda_var: float
    thc_final_limit: float
    max_plc_passes: int
    cultivation_days: float
    t_prime_sample: np.ndarray
    extraction_bounds: tuple
    winterization_bounds: tuple
    plc_cbd_bounds: tuple
    plc_thc_bounds: tuple
    factor_names: tuple = field(init=False)

    def __post_init__(self) -> None:
        if self.target not in ("cbd", "thc"):
            raise ValueError(f"target must be 'cbd' or 'thc', got {self.target!r}")
        self.factor_names = CBD_FACTORS if self.target == "cbd" else THC_FACTORS
        self.t_prime_sample = np.sort(np.asarray(self.t_prime_sample, dtype=float))
        if self.t_prime_sample.size == 0:
            raise ValueError("empty t' sample")

    @classmethod
    def from_config(
        cls, cfg: ScenarioConfig, target: str, t_prime_sample
    ) -> "FinalProductModel":
        dur = cfg.duration("cultivation")
        return cls(
            target=target,
            growth_rate=cfg.growth_rate,
            cbd_thc_ratio=cfg.cbd_thc_ratio,
            lambda_var=cfg.lambda_var,
            thc_final_limit=cfg.thc_final_limit,
            max_plc_passes=cfg.max_plc_passes,
            cultivation_days=0.5 * (dur.lo + dur.hi),
            t_prime_sample=t_prime_sample,
            extraction_bounds=(cfg.extraction_lo, cfg.extraction_hi),
            winterization_bounds=(cfg.winterization_lo, cfg.winterization_hi),
            plc_cbd_bounds=(cfg.plc_cbd_lo, cfg.plc_cbd_hi),
            plc_thc_bounds=(cfg.plc_thc_lo, cfg.plc_thc_hi),
        )

    @property
    def n_inputs(self) -> int:
        return len(self.factor_names)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        cols = {name: u[:, j] for j, name in enumerate(self.factor_names)}
        g, r = self.growth_rate, self.cbd_thc_ratio

        t_c = self.cultivation_days
        sigma_c = self.lambda_var * math.sqrt(g * t_c)
        eps = _truncated_normal_from_seed(cols["eps"], sigma_c, -g * t_c)
        total = g * t_c + eps

        n = self.t_prime_sample.size
        idx = np.minimum((cols["t_prime"] * n).astype(int), n - 1)
        t_p = self.t_prime_sample[idx]
        sigma_p = self.lambda_var * np.sqrt(g * t_p)
        eps_p = _truncated_normal_from_seed(cols["eps_prime"], sigma_p, -g * t_p)
        total = total + g * t_p + eps_p

        def unif(name, bounds):
            lo, hi = bounds
            return lo + cols[name] * (hi - lo)

        q = unif("q_extract", self.extraction_bounds)
        w = unif("w_winter", self.winterization_bounds)
        q_v = unif("q_v", self.plc_thc_bounds)
        if self.target == "cbd":
            q_u = unif("q_u", self.plc_cbd_bounds)
        else:
            # THC is independent of the CBD retention; hold it at its mean
            lo, hi = self.plc_cbd_bounds
            q_u = 0.5 * (lo + hi)

        cbd = total * r / (r + 1.0) * q * w
        thc = total / (r + 1.0) * q * w

        thc_1 = thc * q_v
        second = (thc_1 >= self.thc_final_limit) & (self.max_plc_passes >= 2)
        if self.target == "thc":
            return np.where(second, thc_1 * q_v, thc_1)
        cbd_1 = cbd * q_u
        return np.where(second, cbd_1 * q_u, cbd_1)


def collect_t_prime_samples(
    cfg: ScenarioConfig, n_replications: int = 2
) -> np.ndarray:
    """Record every completed sampling-to-harvest window from full-simulation
    replications; this is the empirical t' distribution the evaluator
    resamples from."""
    samples: list[float] = []
    for j in range(n_replications):
        stats = run_replication(cfg, j)
        samples.extend(stats.t_prime_samples)
    if not samples:
        raise RuntimeError("no lots reached harvest; cannot estimate t'")
    return np.asarray(samples, dtype=float)


@dataclass
class RiskDecomposition:
    """Aggregated relative contributions over macro-replications."""

    target: str
    labels: tuple
    rc_mean: np.ndarray
    rc_stderr: np.ndarray
    s_mean: np.ndarray
    variance_mean: float
    estimator_kind: str
    macro_replications: int
    results: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        """|sum RC - 1| averaged over macro-replications."""
        return float(
            np.mean([abs(float(np.sum(r.rc)) - 1.0) for r in self.results])
        )

    def ranking(self) -> list:
        order = np.argsort(-self.rc_mean)
        return [(self.labels[i], float(self.rc_mean[i])) for i in order]


def decompose_final_product(
    cfg: ScenarioConfig,
    target: str,
    estimator: str = "sampled",
    m_permutations: int = 3000,
    k_outer: int = 10,
    i_inner: int = 100,
    macro_replications: int = 10,
    t_prime_sample=None,
    seed: int | None = None,
) -> RiskDecomposition:
    """Full risk-decomposition pipeline for one cannabinoid target."""
    if t_prime_sample is None:
        t_prime_sample = collect_t_prime_samples(cfg)
    model = FinalProductModel.from_config(cfg, target, t_prime_sample)
    seed = cfg.run.master_seed if seed is None else seed
    results: list[ShapleyResult] = []
    for j in range(macro_replications):
        if estimator == "exact":
            res = shapley_exact(
                model, model.n_inputs, k_outer, i_inner, seed,
                rep_index=j, labels=model.factor_names,
            )
        elif estimator == "sampled":
            res = shapley_sampled(
                model, model.n_inputs, m_permutations, k_outer, i_inner, seed,
                rep_index=j, labels=model.factor_names,
            )
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
        results.append(res)
    rc_mean, rc_stderr = relative_contributions(results)
    return RiskDecomposition(
        target=target,
        labels=model.factor_names,
        rc_mean=rc_mean,
        rc_stderr=rc_stderr,
        s_mean=np.vstack([r.s for r in results]).mean(axis=0),
        variance_mean=float(np.mean([r.total_variance for r in results])),
        estimator_kind=results[0].estimator_kind,
        macro_replications=macro_replications,
        results=results,
    )
