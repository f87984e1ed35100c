import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from hemptwin.config import default_config
from hemptwin.domain import FACTOR_NAMES
from hemptwin.randomness import RngStream, sample_growth_noise
from hemptwin.riskmodel import (
    CBD_FACTORS,
    THC_FACTORS,
    FinalProductModel,
    _truncated_normal_from_seed,
    collect_t_prime_samples,
    decompose_final_product,
)


@pytest.fixture(scope="module")
def t_prime():
    return np.linspace(4.0, 16.0, 200)


def make_model(target, t_prime):
    return FinalProductModel.from_config(default_config(), target, t_prime)


def test_factor_lists():
    assert CBD_FACTORS == FACTOR_NAMES
    assert "q_u" not in THC_FACTORS
    assert len(CBD_FACTORS) == 7 and len(THC_FACTORS) == 6


def test_model_is_deterministic(t_prime):
    model = make_model("thc", t_prime)
    u = RngStream(5, ("det",)).random(6 * 64).reshape(64, 6)
    assert np.array_equal(model(u), model(u))


def test_inverse_cdf_matches_rejection_sampler():
    # the seed-mapped truncated normal must agree in distribution with the
    # rejection sampler used inside the event-driven simulation
    g, t, lam = 0.0018, 56.0, 0.5
    sigma = lam * math.sqrt(g * t)
    stream = RngStream(17, ("ks-rej",))
    rejection = np.array(
        [sample_growth_noise(g, t, lam, stream) for _ in range(20_000)]
    )
    seeds = RngStream(18, ("ks-inv",)).random(20_000)
    mapped = _truncated_normal_from_seed(seeds, sigma, -g * t)
    assert mapped.min() >= -g * t
    stat, pvalue = ks_2samp(rejection, mapped)
    assert pvalue > 0.01


def test_outputs_positive_and_cbd_exceeds_thc(t_prime):
    u = RngStream(7, ("pos",)).random(7 * 256).reshape(256, 7)
    cbd = make_model("cbd", t_prime)(u)
    thc = make_model("thc", t_prime)(u[:, [0, 1, 2, 3, 4, 6]])
    assert np.all(cbd > 0) and np.all(thc > 0)
    assert np.all(cbd > thc)


def test_high_growth_draws_get_second_purification_pass(t_prime):
    model = make_model("thc", t_prime)
    base = np.full((1, 6), 0.5)
    hot = base.copy()
    hot[0, 0] = 0.999  # far upper tail of the growth noise
    cold = base.copy()
    cold[0, 0] = 1e-9  # at the lower truncation bound
    y_hot = model(hot)[0]
    y_cold = model(cold)[0]
    assert y_hot > y_cold
    # the cold path passes in one purification round
    assert y_cold < model.thc_final_limit


def test_t_prime_resampled_within_observed_range(t_prime):
    model = make_model("thc", t_prime)
    u = np.zeros((2, 6))
    u[1, :] = 1.0 - 1e-12
    lo = model(u[:1])
    hi = model(u[1:])
    assert np.isfinite(lo).all() and np.isfinite(hi).all()


def test_collect_t_prime_uses_the_full_simulation():
    import dataclasses

    from hemptwin.config import RunConfig

    cfg = dataclasses.replace(
        default_config(),
        run=RunConfig(warmup_lots=0, run_length_lots=60, replications=1,
                      master_seed=21),
    )
    sample = collect_t_prime_samples(cfg, n_replications=1)
    assert len(sample) > 5
    assert sample.min() > 0


def test_decomposition_identity_on_synthetic_model(t_prime):
    import dataclasses

    from hemptwin.config import RunConfig

    cfg = dataclasses.replace(
        default_config(),
        run=RunConfig(warmup_lots=0, run_length_lots=60, replications=1,
                      master_seed=31),
    )
    decomp = decompose_final_product(
        cfg, "thc", estimator="exact", k_outer=5, i_inner=20,
        macro_replications=3, t_prime_sample=t_prime,
    )
    assert decomp.residual < 1e-9
    assert len(decomp.labels) == 6
    for res in decomp.results:
        assert res.s.sum() == pytest.approx(res.total_variance, rel=1e-10)


def test_unknown_target_rejected(t_prime):
    with pytest.raises(ValueError):
        make_model("terpenes", t_prime)
