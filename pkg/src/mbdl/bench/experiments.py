"""Experiment runners behind ``run_experiment``.

Each runner maps one grid cell to metric rows: it builds the data from the
simulators, trains whatever is learnable, evaluates every method, and
returns (metric rows, timing rows).  Runners draw all randomness from
substreams derived from the cell's seed and coordinates, so cells are
independent of each other and of execution order; that is what lets grid
cells run concurrently and reruns reproduce files byte for byte.

Wall-clock is measured around inference calls only (training and data
generation excluded) and reported as nondeterministic ``wall-ms`` rows in
a separate timings file.

Per-kind model/eval keys and their desk-scale defaults are defined in the
``_run_*`` functions below; unknown keys raise UsageError so typos do not
silently fall back to defaults.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..autodiff import TrainConfig
from ..detection import (deepsic_detect, deepsic_train, detnet_detect,
                         detnet_train, map_exhaustive, pgd_detect,
                         sic_detect)
from ..errors import UsageError
from ..factorgraph import learned_fg_detect, learned_fg_train, model_map_detect
from ..simulate import (CounterRng, GaussianIsiEmission, GaussianMimoChannel,
                        MarkovSequenceModel, PoissonChannel,
                        PoissonIsiEmission, derive_seed, lorenz_taylor_model,
                        perturb_channel, sample_gaussian_channel,
                        sample_lorenz_trajectories, sample_markov_sequence,
                        sample_poisson_channel, snr_db_to_noise_std,
                        snr_db_to_rate_gain, uniform_transition)
from ..sparse import (LassoProblem, admm_solve, conv_dictionary,
                      coordinate_descent, csgm_recover, dcea_alternating,
                      dcea_train, decode_batch,
                      dense_autoencoder_param_count, encode_batch, pnp_admm,
                      pretrain_generator, train_denoiser)
from ..stateest import (gradient_smoother, neural_augmented_smoother,
                        train_augmentation, train_blackbox_regressor)
from .metrics import MetricRecord, MetricWriter, ser_record


def _section(config, name):
    return getattr(config, name)


def _take(config, section, key, default, caster=None):
    raw = _section(config, section).get(key, default)
    if caster is not None and raw is not None:
        if isinstance(raw, list):
            return [caster(v) for v in raw]
        return caster(raw)
    return raw


def _check_keys(config, section, allowed):
    unknown = set(_section(config, section)) - set(allowed)
    if unknown:
        raise UsageError(
            f"unknown [{section}] keys for kind {config.kind!r}: "
            f"{sorted(unknown)}")


def _require(point, axis, kind):
    value = getattr(point, axis)
    if value is None:
        raise UsageError(f"kind {kind!r} needs a {axis!r} grid axis")
    return value


def _train_config(config, seed, epochs=50, batch_size=128, lr=1e-3):
    t = config.train
    unknown = set(t) - {"epochs", "batch_size", "lr", "optimizer"}
    if unknown:
        raise UsageError(f"unknown [train] keys: {sorted(unknown)}")
    return TrainConfig(epochs=int(t.get("epochs", epochs)),
                       batch_size=int(t.get("batch_size", batch_size)),
                       lr=float(t.get("lr", lr)),
                       optimizer=str(t.get("optimizer", "adam")),
                       seed=int(seed))


def _timed(fn):
    start = time.perf_counter()
    result = fn()
    return result, (time.perf_counter() - start) * 1e3


def _wall_record(config, method, point, ms):
    return MetricRecord(config.exp_id, method, point.snr_db, point.n_train,
                        point.q, point.seed, "wall-ms", float(ms))


def _value_record(config, method, point, metric, value, trials=1):
    return MetricRecord(config.exp_id, method, point.snr_db, point.n_train,
                        point.q, point.seed, metric, float(value),
                        trials=trials)


def _array_params(*arrays):
    return int(sum(a.size for a in arrays))


# -- MIMO detection --------------------------------------------------------


def _gaussian_channel(config, snr_db):
    n_users = _take(config, "model", "n_users", 4, int)
    n_out = _take(config, "model", "n_out", n_users, int)
    con = tuple(_take(config, "model", "constellation", [-1.0, 1.0], float))
    spread = _take(config, "model", "spread", 0.5, float)
    channel_seed = _take(config, "model", "channel_seed", 7, int)
    csi_error = _take(config, "model", "csi_error", 0.0, float)
    rng = CounterRng(channel_seed)
    H = np.eye(n_out)[:, :n_users] + spread * rng.normal((n_out, n_users))
    model = GaussianMimoChannel(H, snr_db_to_noise_std(snr_db), con)
    if csi_error > 0:
        assumed = perturb_channel(model, csi_error, derive_seed(
            channel_seed, "csi"))
    else:
        assumed = model
    return model, assumed


def _run_detnet(config, point):
    _check_keys(config, "model", (
        "n_users", "n_out", "constellation", "spread", "channel_seed",
        "csi_error", "hidden"))
    _check_keys(config, "eval", ("n_symbols", "pgd_iters", "with_map"))
    snr_db = _require(point, "snr_db", "detnet")
    n_train = _require(point, "n_train", "detnet")
    n_layers = point.q if point.q is not None else 10
    true_model, model = _gaussian_channel(config, snr_db)
    tc = _train_config(config, point.seed)
    S, X = sample_gaussian_channel(
        true_model, n_train, derive_seed(point.seed, "train", point.token()))
    hidden = _take(config, "model", "hidden", None, int)
    params, _ = detnet_train(S, X, model, n_layers=n_layers, hidden=hidden,
                             config=tc)
    n_eval = _take(config, "eval", "n_symbols", 10000, int)
    St, Xt = sample_gaussian_channel(
        true_model, n_eval, derive_seed(point.seed, "eval", point.token()))
    rows, walls = [], []

    decided, ms = _timed(lambda: detnet_detect(params, Xt, model))
    rows.append(ser_record(config.exp_id, "detnet", point,
                           int(np.sum(decided != St)), St.size))
    n_params = (_array_params(*params.w1, *params.b1, *params.w2, *params.b2)
                + len(params.delta1) + len(params.delta2))
    rows.append(_value_record(config, "detnet", point, "params", n_params))
    walls.append(_wall_record(config, "detnet", point, ms))

    pgd_iters = _take(config, "eval", "pgd_iters", 100, int)
    decided, ms = _timed(lambda: pgd_detect(Xt, model, iters=pgd_iters))
    rows.append(ser_record(config.exp_id, "pgd", point,
                           int(np.sum(decided != St)), St.size))
    walls.append(_wall_record(config, "pgd", point, ms))

    if bool(_take(config, "eval", "with_map", 1, int)):
        decided, ms = _timed(lambda: map_exhaustive(Xt, model))
        rows.append(ser_record(config.exp_id, "map", point,
                               int(np.sum(decided != St)), St.size))
        walls.append(_wall_record(config, "map", point, ms))
    return rows, walls


def _poisson_channel(config, snr_db):
    n_users = _take(config, "model", "n_users", 4, int)
    n_out = _take(config, "model", "n_out", n_users, int)
    con = tuple(_take(config, "model", "constellation", [-1.0, 1.0], float))
    spread = _take(config, "model", "spread", 0.3, float)
    channel_seed = _take(config, "model", "channel_seed", 7, int)
    rng = CounterRng(channel_seed)
    H = np.eye(n_out)[:, :n_users] + spread * rng.uniform((n_out, n_users))
    return PoissonChannel(H, snr_db_to_rate_gain(snr_db), con)


def _poisson_assumed_gaussian(model, snr_db):
    """Receiver model for a designer who wrongly assumes the linear
    Gaussian law x = Hs + w at the nominal SNR.  Same channel matrix,
    no offset, no rate scaling; counts are fed in unchanged."""
    return GaussianMimoChannel(model.matrix, snr_db_to_noise_std(snr_db),
                               model.constellation)


def _run_deepsic(config, point):
    _check_keys(config, "model", (
        "n_users", "n_out", "constellation", "spread", "channel_seed",
        "csi_error", "channel", "hidden", "mode"))
    _check_keys(config, "eval", ("n_symbols", "with_map"))
    snr_db = _require(point, "snr_db", "deepsic")
    n_train = _require(point, "n_train", "deepsic")
    n_iters = point.q if point.q is not None else 5
    channel = str(_take(config, "model", "channel", "gaussian"))
    tc = _train_config(config, point.seed)
    hidden = _take(config, "model", "hidden", None, int)
    mode = str(_take(config, "model", "mode", "sequential"))
    n_eval = _take(config, "eval", "n_symbols", 10000, int)
    seed_train = derive_seed(point.seed, "train", point.token())
    seed_eval = derive_seed(point.seed, "eval", point.token())
    rows, walls = [], []

    if channel == "gaussian":
        true_model, model = _gaussian_channel(config, snr_db)
        S, X = sample_gaussian_channel(true_model, n_train, seed_train)
        St, Xt = sample_gaussian_channel(true_model, n_eval, seed_eval)
        net, _ = deepsic_train(S, X, model.constellation, n_iters=n_iters,
                               hidden=hidden, config=tc, mode=mode)
        decided, ms = _timed(lambda: deepsic_detect(net, Xt))
        rows.append(ser_record(config.exp_id, "deepsic", point,
                               int(np.sum(decided != St)), St.size))
        walls.append(_wall_record(config, "deepsic", point, ms))
        rows.append(_value_record(config, "deepsic", point, "params",
                                  _deepsic_params(net)))
        decided, ms = _timed(lambda: sic_detect(Xt, model, iters=n_iters))
        rows.append(ser_record(config.exp_id, "sic", point,
                               int(np.sum(decided != St)), St.size))
        walls.append(_wall_record(config, "sic", point, ms))
        if bool(_take(config, "eval", "with_map", 1, int)):
            decided, ms = _timed(lambda: map_exhaustive(Xt, model))
            rows.append(ser_record(config.exp_id, "map", point,
                                   int(np.sum(decided != St)), St.size))
            walls.append(_wall_record(config, "map", point, ms))
    elif channel == "poisson":
        model = _poisson_channel(config, snr_db)
        S, X = sample_poisson_channel(model, n_train, seed_train)
        St, Xt = sample_poisson_channel(model, n_eval, seed_eval)
        net, _ = deepsic_train(S, X, model.constellation, n_iters=n_iters,
                               hidden=hidden, config=tc, mode=mode)
        decided, ms = _timed(lambda: deepsic_detect(net, Xt))
        rows.append(ser_record(config.exp_id, "deepsic", point,
                               int(np.sum(decided != St)), St.size))
        walls.append(_wall_record(config, "deepsic", point, ms))
        rows.append(_value_record(config, "deepsic", point, "params",
                                  _deepsic_params(net)))
        assumed = _poisson_assumed_gaussian(model, snr_db)
        decided, ms = _timed(
            lambda: sic_detect(Xt, assumed, iters=n_iters))
        rows.append(ser_record(config.exp_id, "sic-mismatched", point,
                               int(np.sum(decided != St)), St.size))
        walls.append(_wall_record(config, "sic-mismatched", point, ms))
    else:
        raise UsageError(f"unknown channel {channel!r} for deepsic")
    return rows, walls


def _deepsic_params(net):
    total = 0
    for layer in net.blocks:
        for block in layer:
            total += _array_params(block.w1, block.b1, block.w2, block.b2)
    return total


# -- factor-graph sequence detection ---------------------------------------


def _fg_emission(config, snr_db, channel):
    taps = np.array(_take(config, "model", "taps", [1.0, 0.6], float),
                    dtype=np.float64)
    con = tuple(_take(config, "model", "constellation", [-1.0, 1.0], float))
    if channel == "gaussian":
        return GaussianIsiEmission(taps, snr_db_to_noise_std(snr_db)), con
    if channel == "poisson":
        rho = snr_db_to_rate_gain(snr_db)
        intensity = tuple(np.linspace(0.0, 1.0, len(con)))
        return PoissonIsiEmission(taps, rho, con, intensity), con
    raise UsageError(f"unknown channel {channel!r} for learned-fg")


def _fg_mismatched_model(emission, memory, con, transition, snr_db):
    """Receiver model for a designer who wrongly assumes the Gaussian ISI
    law at the nominal SNR: same taps, no offset, counts fed unchanged."""
    gaussian = GaussianIsiEmission(emission.taps, snr_db_to_noise_std(snr_db))
    return MarkovSequenceModel(memory=memory, alphabet=con,
                               transition=transition,
                               emission=gaussian)


def _sample_sequences(model, n_seqs, T, seed):
    samples = [sample_markov_sequence(model, T, derive_seed(seed, "seq", i))
               for i in range(n_seqs)]
    symbols = np.stack([s.symbols for s in samples])
    xs = np.stack([s.observations for s in samples])
    initials = [s.initial for s in samples]
    return symbols, xs, initials


def _run_learned_fg(config, point):
    _check_keys(config, "model", ("taps", "constellation", "channel",
                                  "hidden"))
    _check_keys(config, "eval", ("n_symbols", "seq_len"))
    snr_db = _require(point, "snr_db", "learned-fg")
    n_train = _require(point, "n_train", "learned-fg")
    channel = str(_take(config, "model", "channel", "gaussian"))
    hidden = _take(config, "model", "hidden", 32, int)
    seq_len = _take(config, "eval", "seq_len", 100, int)
    n_eval = _take(config, "eval", "n_symbols", 10000, int)
    emission, con = _fg_emission(config, snr_db, channel)
    memory = emission.memory
    transition = uniform_transition(memory, con)
    true_model = MarkovSequenceModel(memory=memory, alphabet=con,
                                     transition=transition,
                                     emission=emission)
    n_train_seqs = max(1, n_train // seq_len)
    symbols, xs, initials = _sample_sequences(
        true_model, n_train_seqs, seq_len,
        derive_seed(point.seed, "train", point.token()))
    tc = _train_config(config, point.seed, batch_size=64)
    learned, _ = learned_fg_train(xs, symbols, initials, con, memory,
                                  hidden=hidden, config=tc)
    n_eval_seqs = max(1, n_eval // seq_len)
    sym_t, xs_t, init_t = _sample_sequences(
        true_model, n_eval_seqs, seq_len,
        derive_seed(point.seed, "eval", point.token()))

    def detect_all(detect_one):
        return np.stack([detect_one(i) for i in range(n_eval_seqs)])

    rows, walls = [], []
    decided, ms = _timed(lambda: detect_all(
        lambda i: learned_fg_detect(xs_t[i], learned,
                                    initial_state=init_t[i])[0]))
    rows.append(ser_record(config.exp_id, "learned-fg", point,
                           int(np.sum(decided != sym_t)), sym_t.size))
    walls.append(_wall_record(config, "learned-fg", point, ms))
    p = learned.posterior
    rows.append(_value_record(config, "learned-fg", point, "params",
                              _array_params(p.w1, p.b1, p.w2, p.b2)))

    if channel == "gaussian":
        method = "analytic-fg"
        decided, ms = _timed(lambda: detect_all(
            lambda i: model_map_detect(xs_t[i], true_model,
                                       initial_state=init_t[i])[0]))
    else:
        method = "analytic-mismatched"
        mis_model = _fg_mismatched_model(emission, memory, con, transition,
                                         snr_db)
        decided, ms = _timed(lambda: detect_all(
            lambda i: model_map_detect(xs_t[i], mis_model,
                                       initial_state=init_t[i])[0]))
    rows.append(ser_record(config.exp_id, method, point,
                           int(np.sum(decided != sym_t)), sym_t.size))
    walls.append(_wall_record(config, method, point, ms))
    return rows, walls


# -- convolutional dictionary coding ----------------------------------------


def _dcea_data(config, n_samples, seed):
    n_kernels = _take(config, "model", "n_kernels", 4, int)
    kernel_len = _take(config, "model", "kernel_len", 8, int)
    signal_len = _take(config, "model", "signal_len", 32, int)
    density = _take(config, "model", "density", 0.08, float)
    amplitude = _take(config, "model", "amplitude", 1.0, float)
    link = str(_take(config, "model", "link", "linear"))
    noise_std = _take(config, "model", "noise_std", 0.1, float)
    data_seed = _take(config, "model", "data_seed", 11, int)
    rng = CounterRng(data_seed)
    kernels = rng.normal((n_kernels, kernel_len))
    kernels /= np.linalg.norm(kernels, axis=1, keepdims=True)
    W = conv_dictionary(kernels, signal_len)
    draw = CounterRng(seed)
    mask = draw.uniform((n_samples, W.shape[1])) < density
    codes = mask * amplitude * draw.normal((n_samples, W.shape[1]))
    lin = codes @ W.T
    if link == "exp":
        clean = np.exp(np.clip(lin, -10.0, 3.0))
        X = draw.poisson(clean).astype(np.float64)
    elif link == "linear":
        clean = lin
        X = clean + noise_std * draw.normal(clean.shape)
    else:
        raise UsageError(f"unknown link {link!r} for dcea")
    return X, clean, (n_kernels, kernel_len, signal_len, link)


def _run_dcea(config, point):
    _check_keys(config, "model", (
        "n_kernels", "kernel_len", "signal_len", "density", "amplitude",
        "link", "noise_std", "data_seed", "lam", "step", "dense_depth",
        "dense_width_factor"))
    _check_keys(config, "eval", ("n_samples", "alt_outer_iters"))
    n_train = _require(point, "n_train", "dcea")
    n_iters = point.q if point.q is not None else 20
    lam = _take(config, "model", "lam", 0.1, float)
    step = _take(config, "model", "step", 0.1, float)
    X, _, (n_kernels, kernel_len, signal_len, link) = _dcea_data(
        config, n_train, derive_seed(point.seed, "train", point.token()))
    tc = _train_config(config, point.seed, batch_size=32)
    params, _ = dcea_train(X, n_kernels, kernel_len, n_iters=n_iters,
                           step=step, link=link, config=tc)
    n_eval = _take(config, "eval", "n_samples", 256, int)
    Xt, clean_t, _ = _dcea_data(
        config, n_eval, derive_seed(point.seed, "eval", point.token()))
    rows, walls = [], []

    recon, ms = _timed(lambda: decode_batch(encode_batch(Xt, params), params))
    rows.append(_value_record(config, "dcea", point, "MSE",
                              float(np.mean((recon - clean_t) ** 2)),
                              trials=n_eval))
    rows.append(_value_record(config, "dcea", point, "params",
                              params.n_params))
    walls.append(_wall_record(config, "dcea", point, ms))

    alt_outer = _take(config, "eval", "alt_outer_iters", 10, int)
    alt_params, _, history = dcea_alternating(
        X, n_kernels, kernel_len, lam, step=step, encode_iters=n_iters,
        outer_iters=alt_outer, seed=point.seed, link=link)
    recon, ms = _timed(
        lambda: decode_batch(encode_batch(Xt, alt_params), alt_params))
    rows.append(_value_record(config, "dcea-alt", point, "MSE",
                              float(np.mean((recon - clean_t) ** 2)),
                              trials=n_eval))
    rows.append(_value_record(config, "dcea-alt", point, "objective",
                              float(history[-1])))
    walls.append(_wall_record(config, "dcea-alt", point, ms))

    depth = _take(config, "model", "dense_depth", 5, int)
    width = _take(config, "model", "dense_width_factor", 4, int)
    rows.append(_value_record(
        config, "dense-baseline", point, "params",
        dense_autoencoder_param_count(signal_len, n_kernels, depth, width)))
    return rows, walls


# -- compressed sensing with priors -----------------------------------------


def _subspace_signals(n, rank, n_samples, basis_seed, draw_seed):
    basis, _ = np.linalg.qr(CounterRng(basis_seed).normal((n, rank)))
    Z = CounterRng(draw_seed).normal((n_samples, rank))
    return Z @ basis.T


def _run_csgm(config, point):
    _check_keys(config, "model", (
        "signal_len", "rank", "n_measure", "lam", "lam_z", "noise_std",
        "data_seed", "latent_dim", "hidden"))
    _check_keys(config, "eval", ("n_trials", "iters", "restarts",
                                 "lasso_iters"))
    n_train = _require(point, "n_train", "csgm")
    n = _take(config, "model", "signal_len", 32, int)
    rank = _take(config, "model", "rank", 4, int)
    m = _take(config, "model", "n_measure", max(1, n // 8), int)
    lam = _take(config, "model", "lam", 0.05, float)
    lam_z = _take(config, "model", "lam_z", 1e-3, float)
    noise_std = _take(config, "model", "noise_std", 0.01, float)
    data_seed = _take(config, "model", "data_seed", 11, int)
    latent = _take(config, "model", "latent_dim", rank, int)
    hidden = _take(config, "model", "hidden", None, int)
    S = _subspace_signals(n, rank, n_train, data_seed,
                          derive_seed(point.seed, "train", point.token()))
    tc = _train_config(config, point.seed, batch_size=32)
    prior, _ = pretrain_generator(S, latent, hidden=hidden, config=tc)
    n_trials = _take(config, "eval", "n_trials", 20, int)
    iters = _take(config, "eval", "iters", 200, int)
    restarts = _take(config, "eval", "restarts", 3, int)
    lasso_iters = _take(config, "eval", "lasso_iters", 3000, int)
    eval_seed = derive_seed(point.seed, "eval", point.token())
    truths = _subspace_signals(n, rank, n_trials, data_seed,
                               derive_seed(eval_seed, "signals"))
    rng = CounterRng(derive_seed(eval_seed, "sensing"))
    mse_g, mse_l = 0.0, 0.0
    ms_g, ms_l = 0.0, 0.0
    for trial in range(n_trials):
        A = rng.normal((m, n)) / np.sqrt(m)
        x = A @ truths[trial] + noise_std * rng.normal((m,))
        (shat, _, _), ms = _timed(lambda: csgm_recover(
            x, A, prior, lam_z=lam_z, iters=iters, restarts=restarts,
            seed=derive_seed(eval_seed, "restart", trial)))
        mse_g += float(np.mean((shat - truths[trial]) ** 2))
        ms_g += ms
        problem = LassoProblem(A, x, lam)
        slasso, ms = _timed(
            lambda: coordinate_descent(problem, iters=lasso_iters))
        mse_l += float(np.mean((slasso - truths[trial]) ** 2))
        ms_l += ms
    rows = [
        _value_record(config, "csgm", point, "MSE", mse_g / n_trials,
                      trials=n_trials),
        _value_record(config, "lasso", point, "MSE", mse_l / n_trials,
                      trials=n_trials),
        _value_record(config, "csgm", point, "params",
                      _array_params(*prior.weights, *prior.biases)),
    ]
    walls = [_wall_record(config, "csgm", point, ms_g),
             _wall_record(config, "lasso", point, ms_l)]
    return rows, walls


# -- plug-and-play splitting -------------------------------------------------


def _sparse_signals(n, sparsity, amplitude, n_samples, seed):
    rng = CounterRng(seed)
    signals = np.zeros((n_samples, n))
    for i in range(n_samples):
        support = rng.permutation(n)[:sparsity]
        signals[i, support] = amplitude * rng.normal((sparsity,))
    return signals


def _run_pnp(config, point):
    _check_keys(config, "model", (
        "signal_len", "n_measure", "sparsity", "amplitude", "noise_std",
        "lam", "alpha", "denoise_std", "hidden", "copies"))
    _check_keys(config, "eval", ("n_trials", "iters"))
    n_train = _require(point, "n_train", "pnp")
    n = _take(config, "model", "signal_len", 32, int)
    m = _take(config, "model", "n_measure", 16, int)
    sparsity = _take(config, "model", "sparsity", 3, int)
    amplitude = _take(config, "model", "amplitude", 1.0, float)
    noise_std = _take(config, "model", "noise_std", 0.02, float)
    lam = _take(config, "model", "lam", 0.05, float)
    alpha = _take(config, "model", "alpha", 1.0, float)
    denoise_std = _take(config, "model", "denoise_std", 0.1, float)
    hidden = _take(config, "model", "hidden", None, int)
    copies = _take(config, "model", "copies", 4, int)
    clean = _sparse_signals(n, sparsity, amplitude, n_train,
                            derive_seed(point.seed, "train", point.token()))
    tc = _train_config(config, point.seed, batch_size=32)
    denoiser, _ = train_denoiser(clean, denoise_std, hidden=hidden,
                                 copies=copies, config=tc)
    n_trials = _take(config, "eval", "n_trials", 20, int)
    iters = point.q if point.q is not None else _take(
        config, "eval", "iters", 100, int)
    eval_seed = derive_seed(point.seed, "eval", point.token())
    truths = _sparse_signals(n, sparsity, amplitude, n_trials,
                             derive_seed(eval_seed, "signals"))
    rng = CounterRng(derive_seed(eval_seed, "sensing"))
    mse_p, mse_a = 0.0, 0.0
    ms_p, ms_a = 0.0, 0.0
    for trial in range(n_trials):
        A = rng.normal((m, n)) / np.sqrt(m)
        x = A @ truths[trial] + noise_std * rng.normal((m,))
        (shat, _), ms = _timed(
            lambda: pnp_admm(A, x, denoiser, alpha=alpha, iters=iters))
        mse_p += float(np.mean((shat - truths[trial]) ** 2))
        ms_p += ms
        problem = LassoProblem(A, x, lam)
        sl1, ms = _timed(
            lambda: admm_solve(problem, alpha=alpha, iters=max(iters, 200)))
        mse_a += float(np.mean((sl1 - truths[trial]) ** 2))
        ms_a += ms
    rows = [
        _value_record(config, "pnp", point, "MSE", mse_p / n_trials,
                      trials=n_trials),
        _value_record(config, "admm-l1", point, "MSE", mse_a / n_trials,
                      trials=n_trials),
        _value_record(config, "pnp", point, "params",
                      _array_params(denoiser.w1, denoiser.b1, denoiser.w2,
                                    denoiser.b2)),
    ]
    walls = [_wall_record(config, "pnp", point, ms_p),
             _wall_record(config, "admm-l1", point, ms_a)]
    return rows, walls


# -- smoothing ---------------------------------------------------------------


def _run_kalman(config, point):
    _check_keys(config, "model", (
        "order", "dt", "horizon", "process_std", "obs_std", "step",
        "hidden", "blackbox_hidden", "spread"))
    _check_keys(config, "eval", ("n_traj",))
    n_train = _require(point, "n_train", "kalman")
    n_iters = point.q if point.q is not None else 12
    order = _take(config, "model", "order", 1, int)
    dt = _take(config, "model", "dt", 0.02, float)
    T = _take(config, "model", "horizon", 20, int)
    process_std = _take(config, "model", "process_std", 0.5, float)
    obs_std = _take(config, "model", "obs_std", None, float)
    step = _take(config, "model", "step", 0.05, float)
    hidden = _take(config, "model", "hidden", 13, int)
    bb_hidden = _take(config, "model", "blackbox_hidden", 19, int)
    spread = _take(config, "model", "spread", 1.0, float)
    model = lorenz_taylor_model(order, dt=dt, process_std=process_std,
                                obs_std=obs_std)
    S, X = sample_lorenz_trajectories(
        n_train, T, dt=dt, seed=derive_seed(point.seed, "train",
                                            point.token()),
        obs_std=obs_std, spread=spread)
    tc = _train_config(config, point.seed, batch_size=min(16, n_train))
    net, _ = train_augmentation(S, X, model, n_iters=n_iters, step=step,
                                hidden=hidden, config=tc)
    box, _ = train_blackbox_regressor(S, X, hidden=bb_hidden, config=tc)
    n_eval = _take(config, "eval", "n_traj", 20, int)
    St, Xt = sample_lorenz_trajectories(
        n_eval, T, dt=dt, seed=derive_seed(point.seed, "eval", point.token()),
        obs_std=obs_std, spread=spread)
    mse_h = mse_p = mse_b = 0.0
    ms_h = ms_p = ms_b = 0.0
    for i in range(n_eval):
        shat, ms = _timed(lambda: neural_augmented_smoother(
            Xt[i], model, net, iters=n_iters, step=step))
        mse_h += float(np.mean((shat - St[i]) ** 2))
        ms_h += ms
        (plain, _), ms = _timed(lambda: gradient_smoother(
            Xt[i], model, iters=n_iters, step=step, line_search=False))
        mse_p += float(np.mean((plain - St[i]) ** 2))
        ms_p += ms
        pred, ms = _timed(lambda: box.predict(Xt[i]))
        mse_b += float(np.mean((pred - St[i]) ** 2))
        ms_b += ms
    rows = [
        _value_record(config, "hybrid", point, "MSE", mse_h / n_eval,
                      trials=n_eval),
        _value_record(config, "plain", point, "MSE", mse_p / n_eval,
                      trials=n_eval),
        _value_record(config, "blackbox", point, "MSE", mse_b / n_eval,
                      trials=n_eval),
        _value_record(config, "hybrid", point, "params",
                      _array_params(net.w1, net.b1, net.w2, net.b2)),
        _value_record(config, "blackbox", point, "params",
                      _array_params(box.w1, box.b1, box.w2, box.b2)),
    ]
    walls = [_wall_record(config, "hybrid", point, ms_h),
             _wall_record(config, "plain", point, ms_p),
             _wall_record(config, "blackbox", point, ms_b)]
    return rows, walls


RUNNERS = {
    "detnet": _run_detnet,
    "deepsic": _run_deepsic,
    "dcea": _run_dcea,
    "csgm": _run_csgm,
    "pnp": _run_pnp,
    "learned-fg": _run_learned_fg,
    "kalman": _run_kalman,
}


def run_experiment(config, out_dir):
    """Sweep the config's grid and persist metric rows under ``out_dir``.

    Writes ``metrics.csv`` (deterministic) and ``timings.csv`` (wall-clock
    sidecar).  Cells run through a worker pool when ``workers > 1``; rows
    are written in sweep order regardless, and every completed cell is
    flushed before the next is consumed, so a mid-run failure leaves all
    finished cells on disk.  Returns the metrics path.
    """
    runner = RUNNERS.get(config.kind)
    if runner is None:
        raise UsageError(f"unknown experiment kind {config.kind!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    points = config.points()
    metrics_path = out_dir / "metrics.csv"
    timings_path = out_dir / "timings.csv"
    with MetricWriter(metrics_path) as metrics, \
            MetricWriter(timings_path) as timings:
        if config.workers == 1:
            outcomes = (runner(config, p) for p in points)
            for rows, walls in outcomes:
                for row in rows:
                    metrics.write(row)
                for row in walls:
                    timings.write(row)
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(runner, config, p) for p in points]
                for future in futures:
                    rows, walls = future.result()
                    for row in rows:
                        metrics.write(row)
                    for row in walls:
                        timings.write(row)
    return metrics_path
