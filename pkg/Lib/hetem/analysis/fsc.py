"""
Fourier shell correlation between two volumes.

Shells are one grid frequency wide: a voxel at radius ``r`` (in grid
units from the center) belongs to shell ``round(r)``. Shell ``i`` sits
at frequency ``i / L`` cycles/pixel, up to Nyquist (``i = L/2``).
"""

from dataclasses import dataclass

import numpy as np
import torch

from hetem.errors import DimensionError, ParameterError
from hetem.numerics import Volume
from hetem.numerics.fourierTools import fftnCentered


@dataclass
class FscCurve(object):

    frequencies: np.ndarray
    correlations: np.ndarray
    apix: float = 1.0

    def __len__(self):
        return len(self.frequencies)


def _shellIndex(L):
    c = np.arange(L) - L // 2
    z, y, x = np.meshgrid(c, c, c, indexing="ij")
    return np.round(np.sqrt(x * x + y * y + z * z)).astype(np.int64)


def fscCurve(volA, volB):
    """
    The :class:`FscCurve` of two volumes of equal shape and pixel size.
    Shell 0 is 1 for nonzero volumes; a shell with no power in either
    volume is 0.
    """
    if not isinstance(volA, Volume):
        volA = Volume(volA)
    if not isinstance(volB, Volume):
        volB = Volume(volB)
    if volA.data.shape != volB.data.shape:
        raise DimensionError("volume shapes differ: %r and %r" % (tuple(volA.data.shape), tuple(volB.data.shape)))
    if not np.isclose(volA.apix, volB.apix):
        raise ParameterError("pixel sizes differ: %r and %r" % (volA.apix, volB.apix))
    L = volA.L
    A = fftnCentered(volA.data.to(torch.float64)).numpy().ravel()
    B = fftnCentered(volB.data.to(torch.float64)).numpy().ravel()
    shells = _shellIndex(L).ravel()
    nShells = L // 2 + 1
    keep = shells < nShells
    shells = shells[keep]
    A = A[keep]
    B = B[keep]
    cross = np.bincount(shells, weights=(A * np.conj(B)).real, minlength=nShells)
    powerA = np.bincount(shells, weights=np.abs(A) ** 2, minlength=nShells)
    powerB = np.bincount(shells, weights=np.abs(B) ** 2, minlength=nShells)
    denominator = np.sqrt(powerA * powerB)
    correlations = np.zeros(nShells)
    nonzero = denominator > 0
    correlations[nonzero] = cross[nonzero] / denominator[nonzero]
    nonzeroVolumes = bool(volA.data.abs().max() > 0) and bool(volB.data.abs().max() > 0)
    correlations[0] = 1.0 if nonzeroVolumes else 0.0
    correlations = np.clip(correlations, -1.0, 1.0)
    frequencies = np.arange(nShells) / float(L)
    return FscCurve(frequencies, correlations, volA.apix)


def fscResolution(curve, cutoff=0.5):
    """
    Resolution in pixels: ``1 / f`` where ``f`` is the first frequency at
    which the linearly interpolated curve drops below *cutoff*. A curve
    that never drops gives the Nyquist limit, 2 pixels.
    """
    f = curve.frequencies
    c = curve.correlations
    for i in range(1, len(f)):
        if c[i] < cutoff:
            if c[i - 1] == c[i]:
                crossing = f[i]
            else:
                crossing = f[i - 1] + (c[i - 1] - cutoff) / (c[i - 1] - c[i]) * (f[i] - f[i - 1])
            if crossing <= 0:
                return float("inf")
            return 1.0 / crossing
    return 1.0 / f[-1]


def fscSummary(curve, cutoffs=(0.5, 0.143)):
    """
    Resolutions at several cutoffs, in pixels and in Å.
    """
    summary = {}
    for cutoff in cutoffs:
        pixels = fscResolution(curve, cutoff)
        summary[str(cutoff)] = dict(pixels=pixels, angstrom=pixels * curve.apix)
    return summary
