"""Factor graph detection: enumeration oracles, then learned factors."""

import numpy as np
import pytest

from mbdl.autodiff import TrainConfig
from mbdl.factorgraph import (AnalyticFunctionNode, LearnedFgModel,
                              LearnedFunctionNode, brute_force_map,
                              learn_transition_histogram, learn_window_prior,
                              learned_fg_detect, learned_fg_train,
                              model_map_detect, sp_map_detect, window_values)
from mbdl.simulate import (CounterRng, GaussianIsiEmission,
                           MarkovSequenceModel, PoissonIsiEmission,
                           sample_markov_sequence, uniform_transition)

BPSK = (-1.0, 1.0)


def gaussian_model(memory, transition=None, taps=None, noise_std=0.5,
                   alphabet=BPSK):
    if taps is None:
        taps = [1.0] + [0.5 ** j for j in range(1, memory + 1)]
    emission = GaussianIsiEmission(taps=np.array(taps), noise_std=noise_std)
    if transition is None:
        transition = uniform_transition(memory, alphabet)
    return MarkovSequenceModel(memory=memory, alphabet=alphabet,
                               transition=transition, emission=emission)


def random_transition(n_states, n_sym, seed):
    rows = CounterRng(seed).uniform((n_states, n_sym)) + 0.2
    return rows / rows.sum(axis=1, keepdims=True)


def sample_batch(model, n_seqs, T, seed0):
    samples = [sample_markov_sequence(model, T, seed0 + i)
               for i in range(n_seqs)]
    symbols = np.stack([s.symbols for s in samples])
    xs = np.stack([s.observations for s in samples])
    initials = np.stack([s.initial for s in samples])
    return symbols, xs, initials


def test_window_values_index_order():
    w = window_values(BPSK, 1)
    np.testing.assert_array_equal(
        w, [[-1, -1], [-1, 1], [1, -1], [1, 1]])


def test_two_step_marginals_match_hand_enumeration():
    model = gaussian_model(memory=1, noise_std=0.6)
    sample = sample_markov_sequence(model, 2, seed=1)
    x = sample.observations
    _, table = model_map_detect(x, model)
    dens = model.emission.density
    want = np.zeros((2, 2))
    con = model.alphabet
    for i0 in range(2):
        for i1 in range(2):
            for i2 in range(2):
                w = model.transition[i0, i1] * model.transition[i1, i2]
                w *= dens(x[0:1], np.array([[con[i0], con[i1]]]))[0, 0]
                w *= dens(x[1:2], np.array([[con[i1], con[i2]]]))[0, 0]
                want[0, i1] += w
                want[1, i2] += w
    want /= want.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(table.marginals, want, atol=1e-12)


@pytest.mark.parametrize("memory,alphabet,seed", [
    (1, BPSK, 2), (2, BPSK, 3), (1, (-1.0, 0.0, 1.0), 4), (3, BPSK, 5),
])
def test_message_passing_matches_enumeration(memory, alphabet, seed):
    n_states = len(alphabet) ** memory
    model = gaussian_model(
        memory, transition=random_transition(n_states, len(alphabet), seed),
        noise_std=0.7, alphabet=alphabet)
    sample = sample_markov_sequence(model, 6, seed=seed + 50)
    for initial in (None, sample.initial):
        got_sym, table = model_map_detect(sample.observations, model,
                                          initial_state=initial)
        want_sym, want_marg = brute_force_map(sample.observations, model,
                                              initial_state=initial)
        np.testing.assert_allclose(table.marginals, want_marg, atol=1e-10)
        np.testing.assert_array_equal(got_sym, want_sym)


def test_poisson_emission_matches_enumeration():
    emission = PoissonIsiEmission(taps=np.array([1.0, 0.6]), rate_gain=9.0,
                                  alphabet=BPSK, intensity=(0.0, 1.0))
    model = MarkovSequenceModel(memory=1, alphabet=BPSK,
                                transition=random_transition(2, 2, 6),
                                emission=emission)
    sample = sample_markov_sequence(model, 6, seed=7)
    got_sym, table = model_map_detect(sample.observations, model)
    want_sym, want_marg = brute_force_map(sample.observations, model)
    np.testing.assert_allclose(table.marginals, want_marg, atol=1e-10)
    np.testing.assert_array_equal(got_sym, want_sym)


def test_messages_are_normalized():
    model = gaussian_model(memory=2)
    sample = sample_markov_sequence(model, 10, seed=8)
    _, table = model_map_detect(sample.observations, model)
    np.testing.assert_allclose(table.forward.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(table.backward.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(table.marginals.sum(axis=1), 1.0, atol=1e-12)


def test_vanishing_scores_raise_with_step():
    node = LearnedFunctionNode(posterior=lambda xs: np.zeros((len(xs), 4)),
                               prior=np.full(4, 0.25), alphabet=BPSK,
                               memory=1)
    with pytest.raises(FloatingPointError, match="step 1"):
        sp_map_detect(np.zeros(3), node, uniform_transition(1, BPSK))


def test_input_validation():
    model = gaussian_model(memory=1)
    node = AnalyticFunctionNode(model.emission, BPSK, 1)
    with pytest.raises(ValueError):
        sp_map_detect(np.zeros((2, 2)), node, model.transition)
    with pytest.raises(ValueError):
        sp_map_detect(np.zeros(4), node, np.ones((3, 2)) / 2.0)
    with pytest.raises(ValueError):
        sp_map_detect(np.zeros(4), node, model.transition,
                      initial_state=(1.0, 1.0))
    with pytest.raises(ValueError):
        LearnedFunctionNode(posterior=lambda xs: None, prior=np.ones(3),
                            alphabet=BPSK, memory=1)


def test_posterior_ratio_node_reproduces_exact_detection():
    model = gaussian_model(memory=2, noise_std=0.8,
                           transition=random_transition(4, 2, 9))
    sample = sample_markov_sequence(model, 12, seed=10)
    exact_sym, exact_table = model_map_detect(sample.observations, model)
    analytic = AnalyticFunctionNode(model.emission, BPSK, 2)
    prior = np.linspace(0.05, 0.2, analytic.n_windows)
    prior /= prior.sum()

    def posterior(xs):
        joint = analytic.densities(xs) * prior
        return joint / joint.sum(axis=1, keepdims=True)

    node = LearnedFunctionNode(posterior=posterior, prior=prior,
                               alphabet=BPSK, memory=2)
    got_sym, got_table = sp_map_detect(sample.observations, node,
                                       model.transition)
    np.testing.assert_allclose(got_table.marginals, exact_table.marginals,
                               atol=1e-10)
    np.testing.assert_array_equal(got_sym, exact_sym)


def test_transition_histogram_recovers_truth():
    truth = np.array([[0.8, 0.2], [0.3, 0.7]])
    model = gaussian_model(memory=1, transition=truth)
    symbols, _, initials = sample_batch(model, 150, 60, seed0=100)
    est = learn_transition_histogram(symbols, initials, BPSK, 1)
    np.testing.assert_allclose(est, truth, atol=0.03)


def test_window_prior_properties_and_counts():
    prior = learn_window_prior(np.array([[1.0, -1.0]]),
                               np.array([[-1.0]]), BPSK, 1)
    # windows (-1,1) and (1,-1); add-one over 4 cells: [1,2,2,1]/6
    np.testing.assert_allclose(prior, np.array([1, 2, 2, 1]) / 6.0)
    assert prior.sum() == pytest.approx(1.0)


def test_learned_factors_detect_like_exact_ones():
    model = gaussian_model(memory=1, noise_std=0.4,
                           transition=np.array([[0.7, 0.3], [0.2, 0.8]]))
    symbols, xs, initials = sample_batch(model, 120, 25, seed0=300)
    fg, losses = learned_fg_train(
        xs, symbols, initials, BPSK, 1, hidden=16,
        config=TrainConfig(epochs=25, batch_size=125, lr=5e-3, seed=0))
    assert losses[-1] < losses[0]
    err_learned = 0
    err_exact = 0
    n_eval = 30
    for i in range(n_eval):
        s = sample_markov_sequence(model, 25, seed=5000 + i)
        got, _ = learned_fg_detect(s.observations, fg)
        ref, _ = model_map_detect(s.observations, model)
        err_learned += np.sum(got != s.symbols)
        err_exact += np.sum(ref != s.symbols)
    total = n_eval * 25
    assert err_exact / total < 0.2
    assert err_learned / total < err_exact / total + 0.05


def test_model_roundtrips_through_checkpoint(tmp_path):
    model = gaussian_model(memory=1, noise_std=0.5)
    symbols, xs, initials = sample_batch(model, 40, 20, seed0=700)
    fg, _ = learned_fg_train(
        xs, symbols, initials, BPSK, 1, hidden=8,
        config=TrainConfig(epochs=5, batch_size=100, lr=3e-3, seed=1))
    path = tmp_path / "fg.bin"
    fg.save(path)
    loaded = LearnedFgModel.load(path)
    probe = sample_markov_sequence(model, 15, seed=900)
    got_a, table_a = learned_fg_detect(probe.observations, fg)
    got_b, table_b = learned_fg_detect(probe.observations, loaded)
    np.testing.assert_array_equal(got_a, got_b)
    np.testing.assert_array_equal(table_a.marginals, table_b.marginals)
    assert loaded.memory == fg.memory
    assert loaded.alphabet == fg.alphabet


def test_enumeration_guard():
    model = gaussian_model(memory=1)
    with pytest.raises(ValueError):
        brute_force_map(np.zeros(25), model)
