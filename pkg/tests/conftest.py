import numpy as np
import pytest

from exgkit import eog, epidenet, synth, training

UV = 1e-6


def finite_difference_check(params, x, y, tensor_name, n_coords=50, eps=1e-4, seed=0):
    """Central-difference gradient check in float64 at step eps.

    Coordinates whose eps-ball crosses a rectifier or pooling kink make the
    finite difference an invalid derivative estimate; they are detected by
    comparing the eps and eps/10 estimates and replaced by fresh draws.
    Returns (n_checked, max_relative_error).
    """
    assert params.dtype == np.float64
    _, grads = epidenet.loss_and_grad(params, x, y)
    g = grads[tensor_name]
    w = params.tensors[tensor_name]
    rng = np.random.default_rng(seed)
    order = rng.permutation(w.size)
    checked = 0
    max_rel = 0.0
    for flat in order:
        if checked >= min(n_coords, w.size):
            break
        idx = np.unravel_index(flat, w.shape)
        orig = w[idx]

        def fd(step):
            w[idx] = orig + step
            lp, _ = epidenet.loss_and_grad(params, x, y)
            w[idx] = orig - step
            lm, _ = epidenet.loss_and_grad(params, x, y)
            w[idx] = orig
            return (lp - lm) / (2 * step)

        f1, f2 = fd(eps), fd(eps / 10)
        if abs(f1 - f2) > 1e-6 * max(abs(f1), abs(f2)) + 1e-9:
            continue  # non-smooth neighborhood: the fd oracle does not apply
        denom = max(abs(f1), abs(g[idx]), 1e-6)
        max_rel = max(max_rel, abs(f1 - g[idx]) / denom)
        checked += 1
    return checked, max_rel


def make_eog_epoch_set(
    trials_per_class: int = 20,
    noise_sd_uv: float = 5.0,
    walk_amp_uv: float = 0.0,
    jitter_ms: float = 40.0,
    seed: int = 3,
):
    """Standard synthetic 11-class set: session -> derive -> classification
    chain -> 2 s epochs, scaled to microvolts for training."""
    spec = synth.SynthSpec(
        noise_sd_uv=noise_sd_uv,
        walk_amp_uv=walk_amp_uv,
        latency_jitter_ms=jitter_ms,
        seed=seed,
    )
    record, labels = synth.gen_eog_session(spec, trials_per_class=trials_per_class)
    pair = eog.preprocess_eog(eog.derive_eog(record), "classification")
    epochs = eog.segment_trials(pair, labels, spec.trial_duration)
    x = np.stack([ep.data for ep in epochs]).astype(np.float32) / UV
    y = np.asarray([ep.label.class_id for ep in epochs])
    return x, y


def make_eog_trial_epoch_set(trials_per_class: int = 10, noise_sd_uv: float = 0.0, seed: int = 0):
    """Independent-trial variant: every trial is generated and preprocessed
    in isolation, so a noiseless set is separable by construction (identical
    class instances, no inter-trial context)."""
    xs, ys = [], []
    for class_id in range(synth.NUM_CLASSES):
        for rep in range(trials_per_class):
            spec = synth.SynthSpec(
                noise_sd_uv=noise_sd_uv, seed=seed * 100_003 + class_id * 97 + rep
            )
            record, label = synth.gen_eog_trial(synth.TrialLabel(class_id), spec)
            pair = eog.preprocess_eog(eog.derive_eog(record), "classification")
            xs.append(np.stack([pair.v_h, pair.v_v]).astype(np.float32) / UV)
            ys.append(label.class_id)
    return np.stack(xs), np.asarray(ys)


@pytest.fixture(scope="session")
def eog_epoch_set():
    return make_eog_epoch_set()


@pytest.fixture(scope="session")
def trained_eog_model(eog_epoch_set):
    """One modest trained model shared by inference-oriented tests."""
    x, y = eog_epoch_set
    config = training.TrainConfig(epochs=40, lr=3e-3, seed=0)
    result = training.train(x, y, config)
    return result.params
