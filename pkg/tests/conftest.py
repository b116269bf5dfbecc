import dataclasses

import pytest

from mixiqa.config import TrainConfig
from mixiqa.synth import default_synth_config, generate


def tiny_synth_config(seed=7, n=48, **kw):
    """Three heterogeneous datasets shrunk to a few dozen samples each."""
    base = default_synth_config(seed)
    datasets = tuple(dataclasses.replace(s, n_samples=n) for s in base.datasets)
    return dataclasses.replace(base, datasets=datasets, **kw)


def tiny_train_config(**kw):
    defaults = dict(seed=0, epochs=4, patience=4, batch_size=8)
    defaults.update(kw)
    return TrainConfig(**defaults)


@pytest.fixture(scope="session")
def tiny_tree(tmp_path_factory):
    """Generated tiny dataset tree shared by trainer/CLI tests."""
    root = tmp_path_factory.mktemp("tiny_data")
    result = generate(tiny_synth_config(), root)
    return root, result
