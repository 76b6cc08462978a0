import pytest

from qtt import meta_features, predictors, synth


@pytest.fixture(scope="session")
def small_meta():
    """3 surrogate datasets x 8 configs x 10 epochs, plus features and stats."""
    store, features = synth.generate_meta_dataset(3, 8, seed=5)
    stats = meta_features.fit_stats([features[d] for d in store.dataset_ids()])
    return store, features, stats


@pytest.fixture(scope="session")
def small_ckpt(small_meta, tmp_path_factory):
    """A quickly trained checkpoint for plumbing tests (not predictive quality)."""
    store, features, stats = small_meta
    path = tmp_path_factory.mktemp("ckpt") / "small.ckpt.json"
    perf = predictors.fit_perf(store, features, stats, steps=40, lr=3e-3, seed=3)
    cost = predictors.fit_cost(store, features, stats, steps=40, lr=3e-3, seed=4)
    predictors.save_checkpoint(path, perf, cost, stats, store.dataset_ids(), {})
    return str(path)


@pytest.fixture(scope="session")
def paper_scale_store():
    """About 2000 (config, dataset) pairs as full 10-epoch curves (13 tasks x 154)."""
    store, features = synth.generate_meta_dataset(13, 154, seed=42)
    return store, features
