import math

import numpy as np
import pytest
import torch

from hetem.errors import ScheduleError
from hetem.model import HetEMModel
from hetem.model.renderer import imagesToHartley
from hetem.numerics.fourierTools import flipHorizontal
from hetem.numerics.rotations import isRotation
from hetem.training.losses import (
    lossCpp,
    lossCppParts,
    lossImage,
    lossKl,
    lossKlPerImage,
    lossReconTotal,
    lossSym,
    lossSymPerImage,
    lossTranslation,
)
from hetem.training.posePrediction import CleanVarianceTracker, PosteriorBuffer, cppBatch


# ----------------
# Image Comparison
# ----------------

def test_symmetrizedNeverExceedsPlain(rng):
    pred = torch.from_numpy(rng.standard_normal((10000, 4, 4)))
    target = torch.from_numpy(rng.standard_normal((10000, 4, 4)))
    assert bool((lossSymPerImage(pred, target) <= ((pred - target) ** 2).mean(dim=(-2, -1))).all())
    assert float(lossSym(pred, target)) <= float(lossImage(pred, target))


def test_symmetrizedAcceptsMirror(rng):
    target = torch.from_numpy(rng.standard_normal((3, 8, 8)))
    assert float(lossSym(flipHorizontal(target), target)) == 0.0
    assert float(lossImage(flipHorizontal(target), target)) > 0.0


def test_hartleyErrorEqualsImageError(rng):
    pred = torch.from_numpy(rng.standard_normal((4, 16, 16)))
    target = torch.from_numpy(rng.standard_normal((4, 16, 16)))
    inHartley = lossImage(imagesToHartley(pred), imagesToHartley(target))
    assert float(inHartley) == pytest.approx(float(lossImage(pred, target)), rel=1e-10)
    inHartley = lossSym(imagesToHartley(pred), imagesToHartley(target))
    assert float(inHartley) == pytest.approx(float(lossSym(pred, target)), rel=1e-10)


# -------------
# KL Divergence
# -------------

def test_klZeroAtPrior():
    assert float(lossKl(torch.zeros(5, 3), torch.zeros(5, 3))) == 0.0


def test_klMatchesMonteCarlo():
    mu = torch.tensor([0.7, -0.3], dtype=torch.float64)
    logvar = torch.tensor([-0.5, 0.4], dtype=torch.float64)
    closed = float(lossKlPerImage(mu[None], logvar[None])[0])
    rng = np.random.default_rng(11)
    std = np.exp(0.5 * logvar.numpy())
    z = mu.numpy() + std * rng.standard_normal((400000, 2))
    logQ = -0.5 * (((z - mu.numpy()) / std) ** 2 + logvar.numpy() + math.log(2 * math.pi)).sum(axis=-1)
    logP = -0.5 * (z ** 2 + math.log(2 * math.pi)).sum(axis=-1)
    assert float(np.mean(logQ - logP)) == pytest.approx(closed, rel=0.02)


# -------------
# Combined Loss
# -------------

def test_reconTotalArithmetic():
    t = torch.tensor([[1.0, -3.0], [0.0, 2.0]])
    trans = lossTranslation(t)
    assert float(trans) == pytest.approx(1.5)
    total = lossReconTotal(torch.tensor(0.25), torch.tensor(2.0), trans)
    assert float(total) == pytest.approx(0.25 + 1e-4 * 2.0 + 1e-3 * 1.5)
    total = lossReconTotal(torch.tensor(0.25), torch.tensor(2.0), trans, lambdaZ=1.0, lambdaT=0.0)
    assert float(total) == pytest.approx(2.25)


def test_cppArithmetic():
    R = torch.eye(3)[None]
    flipped = torch.diag(torch.tensor([1.0, -1.0, -1.0]))[None]
    rotation, translation = lossCppParts(R, flipped, torch.zeros(1, 2), torch.tensor([[0.5, -1.5]]))
    assert float(rotation) == pytest.approx(8.0 / 9.0)
    assert float(translation) == pytest.approx(1.0)
    assert float(lossCpp(R, flipped, torch.zeros(1, 2), torch.tensor([[0.5, -1.5]]))) == pytest.approx(0.1 * (8.0 / 9.0 + 1.0))
    assert float(lossCpp(R, R, torch.zeros(1, 2), torch.zeros(1, 2), lambdaP=5.0)) == 0.0


# ---------------
# Pose Prediction
# ---------------

def test_emptyBufferRaises():
    with pytest.raises(ScheduleError):
        PosteriorBuffer().sample(2, np.random.default_rng(0))


def test_bufferSampling():
    buffer = PosteriorBuffer()
    mu = torch.tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
    buffer.update(mu, torch.full((2, 2), -30.0))
    assert len(buffer) == 2
    assert not buffer.mu.requires_grad
    same = buffer.sample(2, np.random.default_rng(0))
    assert torch.allclose(same, mu.detach(), atol=1e-5)
    drawn = buffer.sample(7, np.random.default_rng(0))
    assert drawn.shape == (7, 2)
    for row in drawn:
        assert any(torch.allclose(row, m, atol=1e-5) for m in mu.detach())


def test_bufferState():
    buffer = PosteriorBuffer()
    assert buffer.state() is None
    buffer.update(torch.ones(3, 2), torch.zeros(3, 2))
    other = PosteriorBuffer()
    other.loadState(buffer.state())
    assert torch.equal(other.mu, buffer.mu)


def test_cleanVarianceTracker():
    tracker = CleanVarianceTracker()
    tracker.update(torch.tensor([[[0.0, 2.0]]]))
    tracker.update(torch.tensor([[[0.0, 4.0]]]))
    assert tracker.current == pytest.approx(4.0)
    assert tracker.mean == pytest.approx(2.5)
    other = CleanVarianceTracker()
    other.loadState(tracker.state())
    assert other.count == 2


def test_cppBatch():
    torch.manual_seed(0)
    model = HetEMModel(16, d=2, hidden=16, decoderLayers=1, rffM=8)
    buffer = PosteriorBuffer()
    tracker = CleanVarianceTracker()
    rng = np.random.default_rng(4)
    with pytest.raises(ScheduleError):
        cppBatch(model, buffer, tracker, rng, 4, 2.0)
    images, R, t, variance = cppBatch(model, buffer, tracker, rng, 4, 2.0, usePosterior=False, snrDb=0.0)
    assert images.shape == (4, 16, 16)
    assert isRotation(R.double().numpy(), tol=1e-5)
    assert float(t.abs().max()) <= 2.0
    assert variance == pytest.approx(tracker.current)
    _, _, _, fixed = cppBatch(model, buffer, tracker, rng, 4, 2.0, usePosterior=False, adaptiveNoise=False, fixedNoiseVariance=0.3)
    assert fixed == 0.3
    _, _, _, silent = cppBatch(model, buffer, tracker, rng, 4, 2.0, usePosterior=False, snrDb=math.inf)
    assert silent == 0.0


def test_cppBatchLeavesDecoderUntouched():
    torch.manual_seed(0)
    model = HetEMModel(16, d=2, hidden=16, decoderLayers=1, rffM=8)
    images, _, _, _ = cppBatch(model, PosteriorBuffer(), CleanVarianceTracker(), np.random.default_rng(1), 3, 1.0, usePosterior=False)
    assert not images.requires_grad


@pytest.mark.parametrize("snrDb, ratio", [(0.0, 1.0), (-10.0, 10.0)])
def test_adaptiveNoiseRatio(snrDb, ratio):
    torch.manual_seed(0)
    model = HetEMModel(16, d=2, hidden=16, decoderLayers=1, rffM=8)
    tracker = CleanVarianceTracker()
    images, _, _, variance = cppBatch(model, PosteriorBuffer(), tracker, np.random.default_rng(6), 256, 2.0, usePosterior=False, snrDb=snrDb)
    signal = tracker.current
    assert variance / signal == pytest.approx(ratio, rel=1e-6)
    measured = float(images.double().var(dim=(-2, -1), unbiased=False).mean()) - signal
    assert measured / signal == pytest.approx(ratio, rel=0.05)


def test_priorLatentsWithoutPosterior(monkeypatch):
    torch.manual_seed(0)
    model = HetEMModel(16, d=2, hidden=16, decoderLayers=1, rffM=8)
    drawn = []

    def render(R, t, z, ctf=None):
        drawn.append(z)
        return torch.ones(len(z), 16, 16)

    monkeypatch.setattr(model, "renderPrediction", render)
    cppBatch(model, PosteriorBuffer(), CleanVarianceTracker(), np.random.default_rng(2), 4000, 1.0, usePosterior=False)
    z = drawn[0].double()
    assert z.shape == (4000, 2)
    assert torch.allclose(z.mean(dim=0), torch.zeros(2, dtype=torch.float64), atol=0.1)
    assert torch.allclose(z.var(dim=0), torch.ones(2, dtype=torch.float64), atol=0.1)
