import math

import numpy as np
import pytest
import torch

from hetem.analysis.fsc import FscCurve, fscCurve, fscResolution, fscSummary
from hetem.analysis.latentMetrics import (
    classificationError,
    entanglement,
    entanglementZ,
    matchClusters,
    pc1ClassStatistics,
    spearmanPc1,
)
from hetem.analysis.poseMetrics import (
    alignPosesGlobal,
    applyAlignment,
    mirrorMatrix,
    poseArrays,
    rotationErrorMedian,
    rotationErrors,
    translationErrorMean,
)
from hetem.analysis.representatives import (
    clusterCentroidVolumes,
    densityPeakLatent,
    pc1TraversalVolumes,
    representativeLatents,
    representativeVolumes,
)
from hetem.errors import (
    DegenerateClusterError,
    DegenerateStatisticsError,
    DimensionError,
    InsufficientDataError,
    ParameterError,
    UndefinedCorrelationError,
)
from hetem.model import HetEMModel
from hetem.numerics import Pose, Volume
from hetem.numerics.rotations import quaternionToMatrix, sampleRotationUniform


@pytest.fixture
def truthRotations():
    return sampleRotationUniform(np.random.default_rng(8), 200)


def clusteredLatents(rng, centers, perClass=60, spread=0.3):
    latents = []
    labels = []
    for label, center in enumerate(centers):
        latents.append(np.asarray(center) + spread * rng.standard_normal((perClass, len(center))))
        labels += [label] * perClass
    return np.concatenate(latents), np.asarray(labels)


# --------------
# Pose Alignment
# --------------

def test_alignIdentical(truthRotations):
    alignment = alignPosesGlobal(truthRotations, truthRotations)
    assert np.allclose(alignment.rGlobal, np.eye(3), atol=1e-8)
    assert not alignment.mirror
    assert rotationErrorMedian(truthRotations, truthRotations, alignment) < 1e-12


def test_alignRecoversGlobalRotation(truthRotations):
    Q = quaternionToMatrix(np.array([0.3, -0.5, 0.7, 0.4]) / np.linalg.norm([0.3, -0.5, 0.7, 0.4]))
    pred = Q @ truthRotations
    alignment = alignPosesGlobal(pred, truthRotations)
    assert alignment.side == "left"
    assert np.allclose(alignment.rGlobal, Q.T, atol=1e-8)
    assert rotationErrors(pred, truthRotations, alignment).max() < 1e-12


def test_alignRightComposition(truthRotations):
    Q = quaternionToMatrix(np.array([0.0, 0.0, 1.0, 1.0]) / math.sqrt(2.0))
    pred = truthRotations @ Q
    alignment = alignPosesGlobal(pred, truthRotations)
    assert alignment.side == "right"
    assert rotationErrors(pred, truthRotations, alignment).max() < 1e-12


def test_alignMirror(truthRotations):
    pred = mirrorMatrix @ truthRotations @ mirrorMatrix
    alignment = alignPosesGlobal(pred, truthRotations)
    assert alignment.mirror
    assert rotationErrorMedian(pred, truthRotations, alignment) < 1e-12
    assert np.allclose(applyAlignment(pred, alignment), truthRotations, atol=1e-8)


def test_alignOrderInvariant(truthRotations):
    rng = np.random.default_rng(3)
    noisy = sampleRotationUniform(rng, 200)
    pred = np.where(rng.random(200)[:, None, None] < 0.7, truthRotations, noisy)
    order = rng.permutation(200)
    a = alignPosesGlobal(pred, truthRotations)
    b = alignPosesGlobal(pred[order], truthRotations[order])
    assert np.allclose(a.rGlobal, b.rGlobal, atol=1e-8)
    assert rotationErrorMedian(pred, truthRotations, a) == pytest.approx(rotationErrorMedian(pred[order], truthRotations[order], b))


def test_halfTurnError(truthRotations):
    halfTurn = np.diag([1.0, -1.0, -1.0])
    errors = rotationErrors(halfTurn @ truthRotations, truthRotations)
    assert np.allclose(errors, 8.0)


def test_alignmentNeedsPoses():
    with pytest.raises(InsufficientDataError):
        alignPosesGlobal(np.eye(3)[None].repeat(2, 0), np.eye(3)[None].repeat(2, 0))
    with pytest.raises(DimensionError):
        alignPosesGlobal(np.eye(3)[None].repeat(4, 0), np.eye(3)[None].repeat(3, 0))


def test_poseArrays():
    poses = [Pose(np.eye(3), [1.0, 2.0]), Pose(np.eye(3), [0.0, -1.0])]
    R, t = poseArrays(poses)
    assert R.shape == (2, 3, 3)
    assert t.tolist() == [[1.0, 2.0], [0.0, -1.0]]
    assert translationErrorMean(t, np.zeros((2, 2))) == pytest.approx(3.0)


# --------------
# Classification
# --------------

def test_separableClassesHaveNoError():
    latents, labels = clusteredLatents(np.random.default_rng(0), [(5.0, 0.0), (-5.0, 0.0)])
    assert classificationError(latents, labels, 2, restarts=3) == 0.0
    assert classificationError(latents, 1 - labels, 2, restarts=3) == 0.0


def test_classificationInvariantUnderOrthogonalMaps():
    rng = np.random.default_rng(1)
    latents, labels = clusteredLatents(rng, [(4.0, 0.0, 0.0, 0.0), (0.0, 4.0, 0.0, 0.0), (0.0, 0.0, 4.0, 0.0)], spread=0.5)
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    plain = classificationError(latents, labels, 3, restarts=5)
    rotated = classificationError(latents @ Q, labels, 3, restarts=5)
    assert plain == rotated == 0.0


def test_permutedLabelsGiveChanceError():
    rng = np.random.default_rng(5)
    latents, labels = clusteredLatents(rng, [(4.0, 0.0), (-4.0, 0.0), (0.0, 4.0)], perClass=3334)
    error = classificationError(latents, rng.permutation(labels), 3, restarts=2)
    assert error == pytest.approx(1 - 1 / 3, abs=0.05)


def test_mixedLabelsCounted():
    mapping, correct = matchClusters([0, 0, 1, 1, 1], [1, 1, 0, 0, 1])
    assert mapping == {0: 1, 1: 0}
    assert correct == 4


def test_identicalLatentsCannotCluster():
    with pytest.raises(DegenerateClusterError):
        classificationError(np.ones((10, 3)), [0] * 5 + [1] * 5, 2)
    with pytest.raises(InsufficientDataError):
        classificationError(np.arange(3.0)[:, None], [0, 1, 2], 4)
    with pytest.raises(ParameterError):
        classificationError(np.arange(3.0)[:, None], [0, 1, 2], 1)


# -----------
# Correlation
# -----------

def test_spearmanMonotone():
    labels = np.arange(50)
    latents = np.stack([np.exp(labels / 10.0), 0.5 * np.exp(labels / 10.0)], axis=-1)
    assert spearmanPc1(latents, labels) == pytest.approx(1.0)
    assert spearmanPc1(-latents, labels) == pytest.approx(1.0)


def test_spearmanInvariantToMonotoneRelabeling():
    rng = np.random.default_rng(5)
    labels = np.repeat(np.arange(10), 20)
    latents = labels[:, None] * np.array([1.0, 2.0]) + rng.standard_normal((200, 2)) * 3.0
    assert spearmanPc1(latents, labels) == pytest.approx(spearmanPc1(latents, labels ** 3 + 7))


def test_spearmanUndefined():
    with pytest.raises(UndefinedCorrelationError):
        spearmanPc1(np.ones((20, 2)), np.arange(20))
    with pytest.raises(InsufficientDataError):
        spearmanPc1(np.random.default_rng(0).standard_normal((20, 2)), np.zeros(20))


# ---
# FSC
# ---

def test_fscOfVolumeWithItself(blobVolume):
    curve = fscCurve(blobVolume, blobVolume)
    assert len(curve) == 17
    assert np.allclose(curve.correlations, 1.0)
    assert fscResolution(curve) == pytest.approx(2.0)
    summary = fscSummary(curve)
    assert summary["0.5"]["angstrom"] == pytest.approx(12.0)


def test_fscScaleInvariantAndSymmetric(blobVolume):
    rng = np.random.default_rng(2)
    noisy = Volume(blobVolume.data + 0.05 * torch.from_numpy(rng.standard_normal((32, 32, 32))), apix=6.0)
    curve = fscCurve(blobVolume, noisy)
    scaled = fscCurve(Volume(blobVolume.data * 3.0, apix=6.0), noisy)
    swapped = fscCurve(noisy, blobVolume)
    assert np.allclose(curve.correlations, scaled.correlations)
    assert np.allclose(curve.correlations, swapped.correlations)
    assert curve.correlations[1] > 0.9
    assert curve.correlations[-1] < 0.5


def test_fscAgainstZeroVolume(blobVolume):
    curve = fscCurve(blobVolume, Volume(torch.zeros(32, 32, 32, dtype=torch.float64), apix=6.0))
    assert np.all(curve.correlations == 0.0)


def test_fscResolutionInterpolates():
    curve = FscCurve(np.array([0.0, 0.1, 0.2, 0.3]), np.array([1.0, 0.8, 0.4, 0.1]))
    assert fscResolution(curve, 0.5) == pytest.approx(1 / 0.175)
    assert fscResolution(curve, 0.05) == pytest.approx(1 / 0.3)


def test_fscRejectsMismatch(blobVolume):
    with pytest.raises(DimensionError):
        fscCurve(blobVolume, Volume(torch.zeros(16, 16, 16, dtype=torch.float64), apix=6.0))
    with pytest.raises(ParameterError):
        fscCurve(blobVolume, Volume(blobVolume.data.clone(), apix=1.0))


# ------------
# Entanglement
# ------------

def test_entanglementZ():
    assert entanglementZ([0.0, 0.0], [1.0, 1.0]) == 1.0
    assert entanglementZ([0.0, 1.0], [1.0, 1.0]) == pytest.approx(math.exp(-1))
    expected = (2 * math.exp(-1) + math.exp(-4)) / 3
    assert entanglementZ([0.0, 1.0, 2.0], [1.0, 1.0, 1.0]) == pytest.approx(expected)
    with pytest.raises(DegenerateStatisticsError):
        entanglementZ([0.0, 1.0], [1.0, 0.0])
    with pytest.raises(InsufficientDataError):
        entanglementZ([0.0], [1.0])


def test_entanglementZPairs():
    # three classes give three pairs
    means = [0.0, 1.0, 3.0]
    pairs = [math.exp(-1), math.exp(-9), math.exp(-4)]
    assert entanglementZ(means, [1.0, 1.0, 1.0]) == pytest.approx(sum(pairs) / 3)


def test_entanglementZDecreasesWithSeparation():
    values = [entanglementZ([0.0, gap], [1.0, 1.0]) for gap in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_entanglementReport(truthRotations):
    latents, labels = clusteredLatents(np.random.default_rng(4), [(2.0, 0.0), (-2.0, 0.0)], perClass=100)
    t = np.zeros((200, 2))
    report = entanglement(latents, labels, (truthRotations, t), (truthRotations, t + 1.0))
    _, means, stds = pc1ClassStatistics(latents, labels)
    assert report.eRot == pytest.approx(0.0, abs=1e-12)
    assert report.eTrans == pytest.approx(2.0)
    assert report.eZ == pytest.approx(entanglementZ(means, stds))
    assert report.eTotal == pytest.approx(report.eRot + report.eTrans + report.eZ)
    assert sorted(report.asDict()) == ["e_rot", "e_total", "e_trans", "e_z"]


# ---------------
# Representatives
# ---------------

def test_pointMassRepresentative():
    latents = np.tile([0.5, -1.0], (20, 1))
    assert np.allclose(densityPeakLatent(latents, gridSize=64), [0.5, -1.0])


def test_densityPeakFindsMajorMode():
    rng = np.random.default_rng(6)
    direction = np.array([0.6, 0.8])
    values = np.concatenate([rng.normal(0.0, 0.1, 300), rng.normal(3.0, 0.1, 100)])
    latents = values[:, None] * direction
    peak = densityPeakLatent(latents, gridSize=256)
    assert np.linalg.norm(peak) < 0.2


def test_smallClassUsesMean():
    rng = np.random.default_rng(7)
    latents = np.concatenate([rng.standard_normal((30, 2)), rng.standard_normal((4, 2)) + 5.0])
    labels = np.array([0] * 30 + [1] * 4)
    with pytest.warns(UserWarning):
        classes, zs = representativeLatents(latents, labels, gridSize=64)
    assert classes.tolist() == [0, 1]
    assert zs.shape == (2, 2)
    assert np.allclose(zs[1], latents[30:].mean(axis=0))


def test_decodedRepresentatives():
    torch.manual_seed(0)
    model = HetEMModel(16, d=2, hidden=16, decoderLayers=1, rffM=8)
    latents, labels = clusteredLatents(np.random.default_rng(9), [(1.0, 0.0), (-1.0, 0.0)], perClass=20)
    volumes = representativeVolumes(model, latents, labels, gridSize=64)
    assert len(volumes) == 2
    assert all(v.L == 16 for v in volumes)
    volumes, zs = clusterCentroidVolumes(model, latents, 2, restarts=2)
    assert len(volumes) == 2 and zs.shape == (2, 2)
    volumes, zs = pc1TraversalVolumes(model, latents)
    assert len(volumes) == 3
    assert np.allclose(zs[1], latents.mean(axis=0))
