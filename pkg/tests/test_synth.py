import numpy as np
import pytest

from vsmooth import synth
from vsmooth.core import softmax
from vsmooth.errors import EmptyDataset, InsufficientMembers, InvalidSpec, ShapeError
from vsmooth.smoothing import class_sigma
from vsmooth.synth import (
    PatchClassifier,
    SynthDatasetSpec,
    class_prototypes,
    generate_dataset,
    init_classifier,
    loss_and_grad,
    predict_logits,
    stack,
    train,
)


def test_spec_validation():
    for bad in (dict(K=1), dict(T=1), dict(informative_fraction=0.0), dict(signal_strength=0.0)):
        with pytest.raises(InvalidSpec):
            SynthDatasetSpec(**bad)


def test_prototypes_are_unit_and_separated():
    P = class_prototypes(10, 16, seed=3)
    np.testing.assert_allclose(np.linalg.norm(P, axis=1), 1.0, rtol=1e-12)
    cos = P @ P.T
    assert (cos[~np.eye(10, dtype=bool)] < 0.9).all()


def test_noiseless_patches_equal_scaled_prototype():
    spec = SynthDatasetSpec(n_samples=50, patch_noise=0.0, informative_fraction=1.0, signal_strength=2.0, seed=1)
    P = class_prototypes(spec.K, spec.d, spec.seed)
    for s in generate_dataset(spec):
        np.testing.assert_array_equal(s.patches, np.tile(2.0 * P[s.label], (spec.T, 1)))


def test_uninformative_share():
    spec = SynthDatasetSpec(n_samples=20, patch_noise=0.0, informative_fraction=0.75, seed=2)
    for s in generate_dataset(spec):
        assert (np.abs(s.patches).sum(axis=1) == 0).sum() == 2


def test_dataset_determinism():
    spec = SynthDatasetSpec(n_samples=30, seed=4)
    a, b = generate_dataset(spec), generate_dataset(spec)
    assert all(np.array_equal(x.patches, y.patches) and x.label == y.label for x, y in zip(a, b))


def test_class_frequencies_near_uniform():
    _, y = stack(generate_dataset(SynthDatasetSpec(n_samples=10_000, d=4, T=2, seed=5)))
    counts = np.bincount(y, minlength=10)
    sd = np.sqrt(10_000 * 0.1 * 0.9)
    assert np.all(np.abs(counts - 1000) < 3 * sd)


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(0)
    X, y = stack(generate_dataset(SynthDatasetSpec(n_samples=40, K=5, T=4, d=6, seed=6)))
    W = rng.normal(size=(5, 6))
    b = rng.normal(size=5)
    _, gW, gb = loss_and_grad(W, b, X, y)
    h = 1e-6
    for _ in range(100):
        if rng.random() < 0.8:
            i, j = rng.integers(5), rng.integers(6)
            Wp, Wm = W.copy(), W.copy()
            Wp[i, j] += h
            Wm[i, j] -= h
            fd = (loss_and_grad(Wp, b, X, y)[0] - loss_and_grad(Wm, b, X, y)[0]) / (2 * h)
            an = gW[i, j]
        else:
            k = rng.integers(5)
            bp, bm = b.copy(), b.copy()
            bp[k] += h
            bm[k] -= h
            fd = (loss_and_grad(W, bp, X, y)[0] - loss_and_grad(W, bm, X, y)[0]) / (2 * h)
            an = gb[k]
        assert abs(an - fd) <= 1e-5 * max(abs(an), abs(fd), 1e-3)


@pytest.mark.slow
def test_separable_training_reaches_099():
    spec = SynthDatasetSpec(n_samples=2000, K=10, T=8, d=16, patch_noise=0.0, informative_fraction=1.0, seed=7)
    data = stack(generate_dataset(spec))
    clf = train(init_classifier(10, 16, 7), data, 50, 0.1, 7)
    assert synth.accuracy(clf, data) >= 0.99
    X, y = data
    means = np.array([predict_logits(clf, x).values.mean(axis=0) for x in X[:200]])
    assert (means.argmax(axis=1) == y[:200]).all()


def test_zero_epochs_and_determinism():
    data = stack(generate_dataset(SynthDatasetSpec(n_samples=100, seed=8)))
    init = init_classifier(10, 16, 8)
    same = train(init, data, 0, 0.1, 8)
    np.testing.assert_array_equal(same.weights, init.weights)
    np.testing.assert_array_equal(same.bias, init.bias)
    a, b = train(init, data, 3, 0.1, 8), train(init, data, 3, 0.1, 8)
    np.testing.assert_array_equal(a.weights, b.weights)
    log = []
    train(init, data, 2, 0.1, 8, log=log)
    assert [e for e, _, _ in log] == [0, 1]


def test_train_errors():
    with pytest.raises(EmptyDataset):
        train(init_classifier(3, 2, 0), [], 1, 0.1, 0)


def test_predict_logits_examples():
    clf = PatchClassifier(np.zeros((4, 3)), np.zeros(4))
    z = predict_logits(clf, np.ones((5, 3)))
    assert z.values.shape == (5, 4)
    np.testing.assert_array_equal(softmax(z.values.mean(axis=0)), np.full(4, 0.25))
    clf2 = PatchClassifier(np.arange(12.0).reshape(4, 3), np.ones(4))
    np.testing.assert_array_equal(class_sigma(predict_logits(clf2, np.tile([1.0, -1.0, 2.0], (6, 1)))), 0.0)
    with pytest.raises(ShapeError):
        predict_logits(clf, np.ones((5, 2)))


def test_make_ensemble_seeds():
    data = stack(generate_dataset(SynthDatasetSpec(n_samples=200, seed=9)))
    a = synth.make_ensemble(data, 2, 5, epochs=2)
    b = synth.make_ensemble(data, 2, 5, epochs=2)
    np.testing.assert_array_equal(a[0].weights, b[0].weights)
    assert not np.array_equal(a[0].weights, a[1].weights)
    with pytest.raises(InsufficientMembers):
        synth.make_ensemble(data, 1, 0)
    e = synth.ensemble_logits(a, data[0][0])
    assert (e.M, e.K) == (2, 10)


def test_ensemble_of_identical_seeds_is_degenerate():
    data = stack(generate_dataset(SynthDatasetSpec(n_samples=100, seed=10)))
    m1 = train(init_classifier(10, 16, 3), data, 2, 0.1, 3)
    m2 = train(init_classifier(10, 16, 3), data, 2, 0.1, 3)
    np.testing.assert_array_equal(m1.weights, m2.weights)


@pytest.mark.slow
def test_standard_run_properties(standard_run):
    spec, splits, clf = standard_run
    test = splits["test"]
    full = synth.accuracy(clf, test)
    assert synth.patch_accuracy(clf, test) < full


@pytest.mark.slow
def test_ensemble_member_accuracies_close(standard_run):
    _, splits, _ = standard_run
    members = synth.make_ensemble(splits["train"], 10, 100)
    accs = [synth.accuracy(m, splits["test"]) for m in members]
    assert max(accs) - min(accs) <= 0.05
    assert any(not np.array_equal(members[0].weights, m.weights) for m in members[1:])
