import numpy as np
import pytest
import torch

from hetem.errors import DimensionError
from hetem.numerics import FourierVolume, Pose
from hetem.numerics.fourierTools import (
    extractSlice,
    fft2Centered,
    fftnCentered,
    flipHorizontal,
    hartleyTranslate,
    ht2Centered,
    htnCentered,
    ifft2Centered,
    ifftnCentered,
    iht2Centered,
    ihtnCentered,
    mirrorIndex,
    projectRealSpace,
    sliceCoords,
    translationPhase,
    trilinearSample,
)
from hetem.numerics.ctf import CTFParams, ctfEval
from hetem.numerics.rotations import sampleRotationUniform


def test_fft2RoundTrip(rng):
    image = torch.from_numpy(rng.standard_normal((3, 16, 16)))
    back = ifft2Centered(fft2Centered(image))
    assert torch.allclose(back.real, image, atol=1e-12)
    assert float(back.imag.abs().max()) < 1e-12


def test_fftnRoundTrip(rng):
    volume = torch.from_numpy(rng.standard_normal((16, 16, 16)))
    assert torch.allclose(ifftnCentered(fftnCentered(volume)).real, volume, atol=1e-12)


def test_zeroFrequencyAtCenter():
    image = torch.ones(8, 8, dtype=torch.float64)
    f = fft2Centered(image)
    assert float(f[4, 4].real) == 64.0
    f[4, 4] = 0
    assert float(f.abs().max()) < 1e-12


def test_oddSizeRejected():
    with pytest.raises(DimensionError):
        fft2Centered(torch.zeros(5, 5))
    with pytest.raises(DimensionError):
        fft2Centered(torch.zeros(4, 6))


def test_hartleyInverse(rng):
    image = torch.from_numpy(rng.standard_normal((2, 16, 16)))
    assert torch.allclose(iht2Centered(ht2Centered(image)), image, atol=1e-12)
    volume = torch.from_numpy(rng.standard_normal((16, 16, 16)))
    assert torch.allclose(ihtnCentered(htnCentered(volume)), volume, atol=1e-12)


def test_hartleyFourierRelation(rng):
    image = torch.from_numpy(rng.standard_normal((16, 16)))
    f = fft2Centered(image)
    h = ht2Centered(image)
    hm = mirrorIndex(h)
    assert torch.allclose(f.real, (h + hm) / 2, atol=1e-10)
    assert torch.allclose(f.imag, (hm - h) / 2, atol=1e-10)


def test_mirrorIndexIsInvolution(rng):
    array = torch.from_numpy(rng.standard_normal((4, 8, 8)))
    assert torch.equal(mirrorIndex(mirrorIndex(array)), array)
    assert torch.equal(flipHorizontal(flipHorizontal(array)), array)


def test_flipHorizontalMirrorsAboutCenterColumn(rng):
    image = torch.from_numpy(rng.standard_normal((8, 8)))
    flipped = flipHorizontal(image)
    for x in range(8):
        assert torch.equal(flipped[:, x], image[:, (8 - x) % 8])


def test_sliceCoordsIdentity():
    coords = sliceCoords(torch.eye(3, dtype=torch.float64), 8)
    assert coords.shape == (64, 3)
    assert float(coords[:, 2].abs().max()) == 0.0
    # row-major (y, x): second entry steps in x
    assert float(coords[1, 0] - coords[0, 0]) == pytest.approx(1 / 8)


def test_identitySliceIsProjectionTransform(blobVolume):
    fvol = FourierVolume.fromVolume(blobVolume)
    slice2d = extractSlice(fvol, torch.eye(3, dtype=torch.float64))
    expected = fft2Centered(blobVolume.data.sum(dim=0))
    assert torch.allclose(slice2d, expected, atol=1e-8)


def test_trilinearSampleOutsideSupport(blobVolume):
    fvol = FourierVolume.fromVolume(blobVolume)
    coords = torch.tensor([[0.6, 0.0, 0.0], [0.0, -0.7, 0.0]], dtype=torch.float64)
    assert float(trilinearSample(fvol, coords).abs().max()) == 0.0


def test_trilinearSampleOnGrid(rng):
    data = torch.from_numpy(rng.standard_normal((8, 8, 8)))
    # (x, y, z) = (1, -2, 3) grid steps from the center
    coords = torch.tensor([[1 / 8, -2 / 8, 3 / 8]], dtype=torch.float64)
    value = trilinearSample(data, coords)
    assert float(value[0]) == pytest.approx(float(data[4 + 3, 4 - 2, 4 + 1]))


def test_fourierSliceMatchesRealSpaceProjection(blobVolume):
    fvol = FourierVolume.fromVolume(blobVolume)
    rng = np.random.default_rng(20)
    for R in sampleRotationUniform(rng, 20):
        fourier = ifft2Centered(extractSlice(fvol, torch.from_numpy(R))).real
        real = projectRealSpace(blobVolume, Pose(R, [0.0, 0.0]))
        error = float(torch.linalg.norm(fourier - real) / torch.linalg.norm(real))
        assert error < 5e-2


def test_translationPhaseIntegerShiftIsRoll(rng):
    image = torch.from_numpy(rng.standard_normal((16, 16)))
    shifted = ifft2Centered(fft2Centered(image) * translationPhase(torch.tensor([3.0, -2.0], dtype=torch.float64), 16)).real
    expected = torch.roll(image, shifts=(-2, 3), dims=(0, 1))
    assert torch.allclose(shifted, expected, atol=1e-10)


def test_translationPhaseMatchesRealSpaceShift(blobVolume):
    fvol = FourierVolume.fromVolume(blobVolume)
    R = np.eye(3)
    t = np.array([2.0, -3.0])
    fourier = ifft2Centered(extractSlice(fvol, torch.from_numpy(R)) * translationPhase(torch.from_numpy(t), 32)).real
    real = projectRealSpace(blobVolume, Pose(R, t))
    assert torch.allclose(fourier, real, atol=1e-6 * float(real.abs().max()))


def test_hartleyTranslateMatchesFourierShift(rng):
    image = torch.from_numpy(rng.standard_normal((2, 16, 16)))
    t = torch.tensor([[0.4, -1.3], [2.5, 0.25]], dtype=torch.float64)
    shifted = fft2Centered(image) * translationPhase(t, 16)
    expected = shifted.real - shifted.imag
    assert torch.allclose(hartleyTranslate(ht2Centered(image), t), expected, atol=1e-9)


def test_translationPhaseUnitModulus(rng):
    t = torch.from_numpy(rng.uniform(-8, 8, size=(5, 2)))
    phase = translationPhase(t, 16)
    assert phase.shape == (5, 16, 16)
    assert torch.allclose(phase.abs(), torch.ones(5, 16, 16, dtype=torch.float64), atol=1e-12)


def test_translationPhaseFullPeriodIsIdentity():
    phase = translationPhase(torch.tensor([16.0, 0.0], dtype=torch.float64), 16)
    assert torch.allclose(phase, torch.ones(16, 16, dtype=torch.complex128), atol=1e-12)


def test_fourierVolumeIsHermitian(blobVolume, rng):
    for data in (blobVolume.data, torch.from_numpy(rng.standard_normal((16, 16, 16)))):
        f = fftnCentered(data)
        mirrored = mirrorIndex(f, dims=(-3, -2, -1))
        assert torch.allclose(mirrored, f.conj(), atol=1e-6 * float(f.abs().max()))


def test_renderingIsLinearInVolume(rng):
    first = fftnCentered(torch.from_numpy(rng.standard_normal((16, 16, 16))))
    second = fftnCentered(torch.from_numpy(rng.standard_normal((16, 16, 16))))
    R = torch.from_numpy(sampleRotationUniform(rng))
    t = torch.tensor([1.5, -0.75], dtype=torch.float64)
    ctf = ctfEval(CTFParams(15000.0, 17000.0, 0.4), 16, 6.0)

    def render(fvol):
        return ifft2Centered(extractSlice(fvol, R) * ctf * translationPhase(t, 16)).real

    combined = render(2.0 * first - 0.5 * second)
    assert torch.allclose(combined, 2.0 * render(first) - 0.5 * render(second), atol=1e-9)


def test_realSpaceShiftIsLinear():
    # a half-pixel shift of a single voxel splits it evenly between two pixels
    data = torch.zeros(16, 16, 16, dtype=torch.float64)
    data[8, 8, 8] = 1.0
    image = projectRealSpace(data, Pose(np.eye(3), [0.5, 0.0]))
    assert float(image.min()) >= 0.0
    assert float(image[8, 8]) == pytest.approx(0.5)
    assert float(image[8, 9]) == pytest.approx(0.5)
    assert float(image.sum()) == pytest.approx(1.0)
