"""
Differentiable rendering from the decoder.

Training compares images in the orthonormal Hartley domain
(:func:`renderHartley`, :func:`imagesToHartley`); the real-space
rendering (:func:`renderPrediction`) and volume extraction share the
same scaling:

==================  ======================================
decoder output      ``H / L`` on the rotated central slice
image               ``iht2(L * output)``
volume              ``ihtn(L * output)`` on the ``L^3`` grid
==================  ======================================

The CTF is real and even in ``k``, so it multiplies Hartley
coefficients directly.
"""

import torch

from hetem.numerics import Volume, volumeGrid
from hetem.numerics.ctf import ctfEvalBatch
from hetem.numerics.fourierTools import hartleyTranslate, ht2Centered, ihtnCentered, sliceCoords


def decodeSlice(decoder, z, R):
    """
    Orthonormal Hartley slices (``B x L x L``) for rotations *R*
    (``B x 3 x 3``) and conformations *z* (``B x d``).
    """
    L = decoder.L
    coords = sliceCoords(R, L)
    values = decoder(coords, z)
    return values.reshape(values.shape[:-1] + (L, L))


def renderHartley(decoder, R, t, z, ctf=None, apix=1.0):
    """
    Predicted images in the orthonormal Hartley domain: the decoded
    slice times the CTF, then shifted by *t*. *ctf* is an ``n x 7``
    parameter tensor, or None for no CTF.
    """
    slices = decodeSlice(decoder, z, R)
    if ctf is not None:
        C = ctfEvalBatch(ctf, decoder.L, apix, dtype=slices.dtype, device=slices.device)
        slices = slices * C
    return hartleyTranslate(slices, t)


def renderPrediction(decoder, R, t, z, ctf=None, apix=1.0):
    """
    Predicted real-space images (``B x L x L``).
    """
    h = renderHartley(decoder, R, t, z, ctf, apix)
    return hartleyToImages(h)


def imagesToHartley(images):
    """
    Real images to orthonormal Hartley coefficients.
    """
    return ht2Centered(images) / images.shape[-1]


def hartleyToImages(h):
    """
    Orthonormal Hartley coefficients to real images.
    """
    return ht2Centered(h) / h.shape[-1]


def extractVolume(decoder, z, apix=1.0):
    """
    Evaluate the decoder on the full frequency grid at one *z*
    (``d``) and return the real-space :class:`Volume`. The grid is
    decoded one z-plane at a time.
    """
    L = decoder.L
    parameter = next(decoder.parameters())
    z = torch.as_tensor(z, dtype=parameter.dtype, device=parameter.device).reshape(-1)
    grid = volumeGrid(L, dtype=parameter.dtype, device=parameter.device).reshape(L, L * L, 3)
    planes = []
    with torch.no_grad():
        for plane in grid:
            planes.append(decoder(plane, z))
    h = torch.stack(planes).reshape(L, L, L) * L
    volume = ihtnCentered(h.to(torch.float64))
    return Volume(volume, apix=apix)
