import numpy as np
import pytest

from percept_loop import dataio


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_image(rng):
    return rng.random((48, 64, 3)).astype(np.float32)


@pytest.fixture
def reference_image():
    return dataio.make_synthetic_reference(64, 64, np.random.default_rng(7))


def make_corpus(tmp_path, n_contents=4, size=48, seed=11, config=None):
    """Small on-disk degradation corpus for integration-ish tests."""
    rng = np.random.default_rng(seed)
    bases = [dataio.make_synthetic_reference(size, size, rng)
             for _ in range(n_contents)]
    cfg = config or dataio.default_degradation_config()
    out = tmp_path / "corpus"
    manifest = dataio.generate_degraded_corpus(bases, cfg, seed, out)
    return manifest, out
