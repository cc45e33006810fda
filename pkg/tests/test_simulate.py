import numpy as np
import pytest

from mbdl.simulate import (BPSK, CounterRng, GaussianIsiEmission,
                           GaussianMimoChannel, MarkovSequenceModel,
                           PoissonChannel, PoissonIsiEmission,
                           StateSpaceModel, derive_seed, lorenz_rhs,
                           perturb_channel, read_dataset, rk4_step,
                           sample_gaussian_channel, sample_lorenz_trajectories,
                           sample_markov_sequence, sample_poisson_channel,
                           sample_state_space, snr_db_to_noise_std,
                           state_index, taylor_transition, uniform_transition,
                           write_dataset)
from mbdl.simulate.rng import _mix


# ---------------------------------------------------------------------------
# counter RNG


def test_mix_matches_bigint_reference():
    # independent big-integer implementation of the documented finalizer,
    # guarding the numpy uint64 wrapping arithmetic
    def mix_ref(z):
        mask = (1 << 64) - 1
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E9B5) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        return (z ^ (z >> 31)) & mask

    for z in (0, 1, 0x9E3779B97F4A7C15, (1 << 64) - 1, 0xDEADBEEFCAFEF00D):
        assert int(_mix(np.uint64(z))) == mix_ref(z)


def test_u64_chunking_invariance():
    a = CounterRng(42)
    b = CounterRng(42)
    left = np.concatenate([a.u64(3), a.u64(5)])
    assert np.array_equal(left, b.u64(8))


def test_streams_reproduce_and_differ():
    assert np.array_equal(CounterRng(7).uniform(16), CounterRng(7).uniform(16))
    assert not np.array_equal(CounterRng(7).uniform(16),
                              CounterRng(8).uniform(16))


def test_uniform_range_and_moments():
    u = CounterRng(1).uniform(200_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 2e-3
    assert abs(u.var() - 1.0 / 12.0) < 1e-3


def test_normal_moments():
    z = CounterRng(2).normal(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.005


def test_poisson_moments_and_zero_rate():
    rng = CounterRng(3)
    lam = np.full(100_000, 4.5)
    x = rng.poisson(lam)
    assert abs(x.mean() - 4.5) < 0.05
    assert abs(x.var() - 4.5) < 0.15
    assert np.all(rng.poisson(np.zeros(100)) == 0)
    with pytest.raises(ValueError):
        rng.poisson(np.array([-1.0]))


def test_integers_cover_range_uniformly():
    idx = CounterRng(4).integers(5, (100_000,))
    counts = np.bincount(idx, minlength=5)
    assert idx.min() == 0 and idx.max() == 4
    assert np.all(np.abs(counts / 100_000 - 0.2) < 0.01)


def test_permutation_is_permutation():
    p = CounterRng(5).permutation(257)
    assert np.array_equal(np.sort(p), np.arange(257))


def test_derive_seed_separates_tokens():
    s = {derive_seed(0, "a"), derive_seed(0, "b"), derive_seed(0, "a", 1),
         derive_seed(1, "a")}
    assert len(s) == 4
    assert derive_seed(0, "a") == derive_seed(0, "a")


def test_spawn_matches_derive():
    assert np.array_equal(CounterRng(0).spawn("x", 3).uniform(4),
                          CounterRng(derive_seed(0, "x", 3)).uniform(4))


def test_rng_golden_values():
    # frozen outputs guarding against platform or refactoring drift
    rng = CounterRng(2024)
    assert np.array_equal(rng.uniform(3), np.array([
        0.6740568903047391, 0.47857372953361466, 0.8595323447611997]))
    assert np.array_equal(rng.normal(2), np.array([
        0.6819333803645128, -0.7658540967807919]))
    assert np.array_equal(rng.poisson(np.array([2.0, 6.0])), np.array([0, 8]))


# ---------------------------------------------------------------------------
# Gaussian MIMO channel


def _channel_2x2():
    return GaussianMimoChannel(np.array([[1.0, 0.4], [-0.3, 0.9]]),
                               noise_std=0.1)


def test_snr_to_noise_std():
    assert snr_db_to_noise_std(20.0) == pytest.approx(0.1)
    assert snr_db_to_noise_std(0.0) == pytest.approx(1.0)


def test_gaussian_channel_statistics():
    model = _channel_2x2()
    S, X = sample_gaussian_channel(model, 100_000, seed=11)
    assert set(np.unique(S)) == {-1.0, 1.0}
    # symbols uniform: mean near 0
    assert np.all(np.abs(S.mean(axis=0)) < 0.02)
    # noise std within 1%
    noise = X - S @ model.matrix.T
    assert abs(noise.std() - 0.1) < 0.001
    assert S.shape == (100_000, 2) and X.shape == (100_000, 2)


def test_gaussian_channel_determinism():
    model = _channel_2x2()
    S1, X1 = sample_gaussian_channel(model, 50, seed=3)
    S2, X2 = sample_gaussian_channel(model, 50, seed=3)
    assert np.array_equal(S1, S2) and np.array_equal(X1, X2)
    S3, _ = sample_gaussian_channel(model, 50, seed=4)
    assert not np.array_equal(S1, S3)


def test_gaussian_channel_validation():
    with pytest.raises(ValueError):
        GaussianMimoChannel(np.ones((2, 2)), noise_std=0.0)
    with pytest.raises(ValueError):
        GaussianMimoChannel(np.ones(3), noise_std=0.1)
    with pytest.raises(ValueError):
        GaussianMimoChannel(np.ones((2, 2)), 0.1, constellation=(1.0, -1.0))


def test_perturb_channel():
    model = _channel_2x2()
    same = perturb_channel(model, 0.0, seed=0)
    assert np.array_equal(same.matrix, model.matrix)
    bumped = perturb_channel(model, 0.1, seed=0)
    rel = np.abs(bumped.matrix / model.matrix - 1.0)
    assert np.all(rel <= 0.1) and np.any(rel > 0)


# ---------------------------------------------------------------------------
# Poisson channel


def test_poisson_channel_rates_and_mean():
    H = np.array([[0.8, 0.2], [0.1, 0.9]])
    model = PoissonChannel(H, rate_gain=0.0)
    S, X = sample_poisson_channel(model, 100_000, seed=5)
    # rate_gain 0 makes every rate exactly 1
    assert np.all(model.rates(S) == 1.0)
    assert abs(X.mean() - 1.0) < 0.02
    model2 = PoissonChannel(H, rate_gain=4.0)
    assert np.all(model2.rates(S) >= 1.0)
    S2, X2 = sample_poisson_channel(model2, 20_000, seed=6)
    emp = X2.mean(axis=0)
    expected = model2.rates(S2).mean(axis=0)
    assert np.all(np.abs(emp - expected) < 0.1)


def test_poisson_channel_validation():
    with pytest.raises(ValueError, match="nonnegative"):
        PoissonChannel(np.array([[-0.1]]), rate_gain=1.0)
    with pytest.raises(ValueError):
        PoissonChannel(np.ones((1, 1)), rate_gain=-1.0)
    with pytest.raises(ValueError):
        PoissonChannel(np.ones((1, 2)), 1.0, symbol_map=(0.0,))


# ---------------------------------------------------------------------------
# Markov sequences


def _markov_model():
    transition = np.array([[0.7, 0.3], [0.2, 0.8]])
    emission = GaussianIsiEmission(np.array([1.0, 0.5]), noise_std=0.3)
    return MarkovSequenceModel(1, BPSK, transition, emission)


def test_markov_transition_frequencies():
    model = _markov_model()
    s, x, initial = sample_markov_sequence(model, 100_000, seed=9)
    assert s.shape == (100_000,) and x.shape == (100_000,)
    idx = (s > 0).astype(int)
    for prev in (0, 1):
        nxt = idx[1:][idx[:-1] == prev]
        freq = nxt.mean()
        assert abs(freq - model.transition[prev, 1]) < 0.01


def test_markov_emission_follows_taps():
    # noiseless-ish emission: x_i ~ s_i + 0.5 s_{i-1}
    model = MarkovSequenceModel(
        1, BPSK, uniform_transition(1, BPSK),
        GaussianIsiEmission(np.array([1.0, 0.5]), noise_std=1e-8))
    s, x, initial = sample_markov_sequence(model, 500, seed=1)
    prev = np.concatenate([[initial[0]], s[:-1]])
    assert np.allclose(x, s + 0.5 * prev, atol=1e-6)


def test_markov_determinism_and_initial_uniform():
    model = _markov_model()
    a = sample_markov_sequence(model, 64, seed=2)
    b = sample_markov_sequence(model, 64, seed=2)
    assert np.array_equal(a.symbols, b.symbols)
    assert np.array_equal(a.observations, b.observations)
    assert a.initial == b.initial
    firsts = [sample_markov_sequence(model, 1, seed=s).initial[0]
              for s in range(400)]
    assert abs(np.mean(np.array(firsts) > 0) - 0.5) < 0.1


def test_markov_model_validation():
    bad = np.array([[0.7, 0.2], [0.2, 0.8]])  # row does not sum to 1
    with pytest.raises(ValueError, match="probability"):
        MarkovSequenceModel(1, BPSK, bad,
                            GaussianIsiEmission(np.ones(2), 1.0))
    with pytest.raises(ValueError, match="memory"):
        MarkovSequenceModel(2, BPSK, uniform_transition(2, BPSK),
                            GaussianIsiEmission(np.ones(2), 1.0))


def test_poisson_isi_emission_rates():
    em = PoissonIsiEmission(np.array([1.0, 0.5]), rate_gain=4.0,
                            alphabet=BPSK, intensity=(0.0, 1.0))
    # window (-1, -1): both intensities 0 -> rate 1
    assert em.rate(np.array([-1.0, -1.0])) == pytest.approx(1.0)
    # window (+1, +1): rate 1 + 2 * 1.5
    assert em.rate(np.array([1.0, 1.0])) == pytest.approx(4.0)
    pmf_total = em.density(np.arange(0, 60), np.array([[1.0, 1.0]])).sum()
    assert pmf_total == pytest.approx(1.0, abs=1e-9)


def test_state_index_convention():
    # oldest symbol is the most significant digit
    assert state_index((-1.0, 1.0), BPSK) == 1
    assert state_index((1.0, -1.0), BPSK) == 2


# ---------------------------------------------------------------------------
# state-space models


def _ss_model():
    F = np.array([[0.9, 0.1], [0.0, 0.8]])
    H = np.array([[1.0, 0.0]])
    return StateSpaceModel(F, H, 0.01 * np.eye(2), 0.04 * np.eye(1),
                           np.array([1.0, -1.0]))


def test_state_space_sampling_shapes_and_determinism():
    model = _ss_model()
    S, X = sample_state_space(model, 40, seed=8)
    assert S.shape == (40, 2) and X.shape == (40, 1)
    S2, X2 = sample_state_space(model, 40, seed=8)
    assert np.array_equal(S, S2) and np.array_equal(X, X2)


def test_state_space_follows_dynamics_at_low_noise():
    F = np.array([[0.9, 0.1], [0.0, 0.8]])
    model = StateSpaceModel(F, np.eye(2), 1e-16 * np.eye(2),
                            1e-16 * np.eye(2), np.array([1.0, -1.0]))
    S, _ = sample_state_space(model, 5, seed=0)
    expect = np.array([1.0, -1.0])
    for i in range(5):
        expect = F @ expect
        assert np.allclose(S[i], expect, atol=1e-6)


def test_state_space_requires_spd_covariances():
    with pytest.raises(ValueError, match="positive definite"):
        StateSpaceModel(np.eye(2), np.eye(2), np.zeros((2, 2)),
                        np.eye(2), np.zeros(2))
    with pytest.raises(ValueError, match="symmetric"):
        StateSpaceModel(np.eye(2), np.eye(2),
                        np.array([[1.0, 0.5], [-0.5, 1.0]]),
                        np.eye(2), np.zeros(2))


# ---------------------------------------------------------------------------
# Lorenz


def test_rk4_is_fourth_order():
    # error vs a much finer reference should shrink ~16x when dt halves
    s0 = np.array([1.0, 1.0, 1.0])
    ref = s0.copy()
    for _ in range(64):
        ref = rk4_step(ref, 0.01 / 64)
    coarse = rk4_step(s0, 0.01)
    two_half = rk4_step(rk4_step(s0, 0.005), 0.005)
    e1 = np.linalg.norm(coarse - ref)
    e2 = np.linalg.norm(two_half - ref)
    assert e1 / max(e2, 1e-300) > 8.0


def test_lorenz_fixed_points():
    assert np.allclose(lorenz_rhs(np.zeros(3)), np.zeros(3))
    c = np.sqrt(8.0 / 3.0 * 27.0)
    assert np.allclose(lorenz_rhs(np.array([c, c, 27.0])), 0.0, atol=1e-9)


def test_taylor_transition_orders():
    around = np.array([1.0, 2.0, 20.0])
    from mbdl.simulate import lorenz_jacobian
    F1 = taylor_transition(1, 0.02, around)
    assert np.allclose(F1, np.eye(3) + 0.02 * lorenz_jacobian(around))
    with pytest.raises(ValueError):
        taylor_transition(0, 0.02, around)


def test_taylor_j5_beats_j1_one_step():
    # walk the attractor; at each step linearize at the current truth and
    # compare one-step predictions of both truncations against RK4
    s = np.array([1.0, 1.0, 1.0])
    for _ in range(500):  # settle onto the attractor
        s = rk4_step(s, 0.02)
    err1 = err5 = 0.0
    for _ in range(1000):
        nxt = rk4_step(s, 0.02)
        err1 += np.linalg.norm(taylor_transition(1, 0.02, s) @ s - nxt)
        err5 += np.linalg.norm(taylor_transition(5, 0.02, s) @ s - nxt)
        s = nxt
    assert err5 <= err1


def test_lorenz_trajectories_bounded_and_deterministic():
    S, X = sample_lorenz_trajectories(3, 25, seed=12)
    assert S.shape == (3, 25, 3) and X.shape == (3, 25, 3)
    assert np.max(np.abs(S)) < 100.0
    S2, X2 = sample_lorenz_trajectories(3, 25, seed=12)
    assert np.array_equal(S, S2) and np.array_equal(X, X2)
    # observation noise has variance 0.1 by default
    resid = (X - S).ravel()
    assert abs(resid.std() - np.sqrt(0.1)) < 0.02


# ---------------------------------------------------------------------------
# dataset files


def test_dataset_roundtrip_and_stability(tmp_path):
    S = np.array([[1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]])
    X = np.array([[0.123456789, -2.5], [3.25, 0.0], [-1.0, 7.5]])
    path = tmp_path / "set.csv"
    write_dataset(path, S, X, {"seed": 3, "noise_std": 0.1})
    first = path.read_bytes()
    S2, X2, meta = read_dataset(path)
    assert np.array_equal(S, S2) and np.array_equal(X, X2)
    assert meta == {"seed": 3, "noise_std": 0.1}
    write_dataset(path, S, X, {"seed": 3, "noise_std": 0.1})
    assert path.read_bytes() == first


def test_dataset_header_validation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="header"):
        read_dataset(path)
