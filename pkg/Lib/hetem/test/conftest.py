import numpy as np
import pytest
import torch

from hetem.runConfig import RunConfig, updateConfig
from hetem.simulator.phantoms import gaussianBlobVolume


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def blobVolume():
    # compact, so its transform is smooth enough for trilinear slicing
    centers = [(0.0, 0.0, 0.0), (2.0, -1.0, 1.0), (-1.0, 2.0, -1.0)]
    return gaussianBlobVolume(centers, 1.5, 32, apix=6.0, weights=[1.0, 0.7, 0.5])


@pytest.fixture
def tinyConfig(tmp_path):
    """
    A run config small enough to simulate and train in seconds.
    """
    return updateConfig(
        RunConfig(),
        phantom=dict(L=16, apix=6.0),
        dataset=dict(nImages=16, snrDb=0.0, tMax=1.0, seed=3),
        model=dict(d=2, hidden=16, decoderLayers=1, rffM=8),
        train=dict(epochs=2, fchEpochs=1, batchSize=8, cornerImages=16, device="cpu", seed=5),
        analysis=dict(kmeansRestarts=2, kdeGridSize=64),
        outputDir=str(tmp_path),
    )


@pytest.fixture
def float64():
    previous = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(previous)
