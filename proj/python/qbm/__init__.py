"""Quantum Boltzmann machine training on bars-and-stripes images with coresets."""

from ._qbm import (
    QbmError,
    QbmParams,
    ScorerNet,
    clamped_expectation,
    clamped_hidden_oracle,
    clamped_phase_stats,
    distinct_count,
    encode_spins,
    exact_model_stats,
    generate_bxs,
    greedy_k_center,
    init_params,
    is_bxs,
    kl_divergence,
    likelihood_gradient,
    minimax_coreset,
    model_score,
    negative_phase,
    positive_phase_hidden,
    run_experiment,
    sample_gibbs,
    train_scorer,
    uniform_coreset,
    verify_oracles,
    visible_distribution,
)

__all__ = [name for name in dir() if not name.startswith("_")]
