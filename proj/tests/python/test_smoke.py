import numpy as np
import pytest

import qbm


def test_bxs_enumeration():
    images = qbm.generate_bxs(4, 4)
    assert images.shape == (256, 4, 4)
    assert all(qbm.is_bxs(images))
    assert qbm.distinct_count(images) == 226


def test_positive_phase_matches_oracle():
    rng = np.random.default_rng(0)
    params = qbm.QbmParams(0.5, rng.normal(size=3), rng.normal(size=2), rng.normal(size=(3, 2)))
    v = [1, -1, 1]
    np.testing.assert_allclose(
        qbm.positive_phase_hidden(params, v), qbm.clamped_hidden_oracle(params, v), atol=1e-10
    )
    assert qbm.clamped_expectation(0.0, 2.0) == pytest.approx(np.tanh(2.0))


def test_sampler_close_to_exact():
    params = qbm.QbmParams(2.0, [0.3], [-0.2], [[0.4]])
    exact = qbm.exact_model_stats(params)
    samples = qbm.sample_gibbs(params, replicas=2048, slices=32, seed=4)
    assert samples.shape == (2048, 2)
    est = qbm.negative_phase(samples, 1)
    np.testing.assert_allclose(est["units"], exact["units"], atol=0.06)
    np.testing.assert_allclose(est["edges"], exact["edges"], atol=0.06)
    again = qbm.sample_gibbs(params, replicas=2048, slices=32, seed=4, threads=2)
    np.testing.assert_array_equal(samples, again)


def test_gradient_fixed_point():
    params = qbm.init_params(qbm.generate_bxs(2, 2), 2, seed=1)
    stats = qbm.clamped_phase_stats(params, qbm.encode_spins(qbm.generate_bxs(2, 2)))
    assert np.all(qbm.likelihood_gradient(stats, stats) == 0.0)


def test_coresets_and_kl():
    images = qbm.generate_bxs(3, 3)
    assert qbm.uniform_coreset(images, 10, 3).shape == (10, 3, 3)
    assert qbm.minimax_coreset(images, 5).shape == (5, 3, 3)
    centers, radius = qbm.greedy_k_center(np.abs(np.subtract.outer([0, 1, 2, 10], [0, 1, 2, 10])).astype(float), 2)
    assert centers == [0, 3] and radius == 2.0
    assert qbm.kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(np.log(2))
    with pytest.raises(qbm.QbmError):
        qbm.kl_divergence([0.5, 0.6], [0.5, 0.5])


def test_scorer_and_tiny_experiment():
    net, acc = qbm.train_scorer(2, 2, size=400, seed=0, epochs=40)
    assert acc >= 0.99
    assert net.dims == [4, 32, 8, 1]
    assert net.embed(qbm.generate_bxs(2, 2)).shape == (16, 8)
    restored = qbm.ScorerNet.from_json(net.to_json())
    np.testing.assert_array_equal(restored.parameters(), net.parameters())
    config = {
        "dataset": {"p": 2, "q": 2},
        "model": {"n_hidden": 2},
        "train": {"batch_size": 4, "budget": 2},
        "sampler": {"replicas": 16, "slices": 4, "sweeps": 2},
        "coreset": {"m": 4},
        "seeds": [0, 1],
    }
    curves = qbm.run_experiment(config, net)
    assert set(curves) == {"full", "uniform", "minimax"}
    assert len(curves["full"]["mean"]) == 2


def test_oracle_battery():
    assert all(passed for _, passed, _ in qbm.verify_oracles(1))
