"""
Ground-truth phantom volumes built from Gaussian blobs.

Two kinds are available:

=================  ==========================================================
bimodal-blobs      two volumes that share a body and differ in the position
                   of one blob
arm-motion         a body with an arm of blobs hinged on it; one volume per
                   motion angle, the arm swinging about the hinge axis
=================  ==========================================================

Geometry is given in fractions of the box edge so the phantoms scale
with *L*. All centers stay within a radius of ``L/4`` of the box center.
"""

import logging

import numpy as np
import torch

from hetem.errors import ParameterError
from hetem.numerics import Volume

logger = logging.getLogger(__name__)

phantomKinds = ("bimodal-blobs", "arm-motion")

# body blob centers, (x, y, z) in units of L
bodyCenters = [
    (-0.15, 0.0, 0.0),
    (-0.05, 0.0, 0.0),
    (0.05, 0.0, 0.0),
    (0.15, 0.0, 0.0),
    (-0.05, -0.1, 0.05),
    (0.05, -0.1, -0.05),
    (0.0, 0.0, 0.12),
]

bimodalMovingCenters = [
    (0.12, 0.12, 0.0),
    (-0.12, 0.12, -0.05),
]

armHinge = (0.15, 0.0, 0.0)
armSpacing = 0.06
armLength = 3


def gaussianBlobVolume(centers, sigma, L, apix=1.0, weights=None):
    """
    A :class:`Volume` holding the sum of isotropic Gaussians.

    *centers* are ``(x, y, z)`` offsets in pixels from the box center,
    *sigma* is in pixels. *weights* scale the individual blobs and
    default to 1.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if centers.shape[-1] != 3:
        raise ParameterError("blob centers must be 3-vectors")
    if not sigma > 0:
        raise ParameterError("blob sigma must be positive, got %r" % sigma)
    if weights is None:
        weights = np.ones(len(centers))
    weights = np.asarray(weights, dtype=np.float64)
    c = np.arange(L, dtype=np.float64) - L // 2
    z, y, x = np.meshgrid(c, c, c, indexing="ij")
    data = np.zeros((L, L, L))
    for (cx, cy, cz), w in zip(centers, weights):
        r2 = (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2
        data += w * np.exp(-r2 / (2 * sigma * sigma))
    return Volume(torch.from_numpy(data), apix=apix)


def _axisRotation(axis, degrees):
    # rotation about a unit axis (Rodrigues)
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    theta = np.deg2rad(degrees)
    K = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + np.sin(theta) * K + (1 - np.cos(theta)) * (K @ K)


def armCenters(angle):
    """
    Arm blob centers (units of L) for a motion *angle* in degrees.
    The arm starts along +y at 0 degrees and swings about the x axis
    through the hinge.
    """
    hinge = np.asarray(armHinge)
    R = _axisRotation((1.0, 0.0, 0.0), angle)
    centers = []
    for j in range(1, armLength + 1):
        offset = np.array([0.0, j * armSpacing, 0.0])
        centers.append(hinge + R @ offset)
    return np.asarray(centers)


def checkMotionAngles(angles):
    """
    Raise a :class:`ParameterError` unless *angles* is a nonempty,
    strictly increasing list within [0, 180] degrees.
    """
    angles = list(angles or [])
    if not angles:
        raise ParameterError("arm-motion phantoms need at least one motion angle")
    for angle in angles:
        if not 0 <= angle <= 180:
            raise ParameterError("motion angle %r is outside [0, 180] degrees" % angle)
    for a, b in zip(angles, angles[1:]):
        if not b > a:
            raise ParameterError("motion angles must be strictly increasing, got %r" % angles)
    return angles


def makePhantoms(phantom, rng):
    """
    Build the class volumes described by *phantom* (an object with
    ``kind``, ``L``, ``apix``, ``motionAngles`` and optionally
    ``nClasses``). *rng* draws the blob weights, which are shared by
    all classes so that every volume carries the same mass.
    """
    L = phantom.L
    sigma = L / 16.0
    if phantom.kind not in phantomKinds:
        raise ParameterError("unknown phantom kind %r" % phantom.kind)
    if phantom.kind == "bimodal-blobs":
        nClasses = 2
    else:
        angles = checkMotionAngles(phantom.motionAngles)
        nClasses = len(angles)
    given = getattr(phantom, "nClasses", None)
    if given is not None and given != nClasses:
        raise ParameterError("%s phantoms have %d classes, config says %d" % (phantom.kind, nClasses, given))
    bodyWeights = rng.uniform(0.8, 1.2, size=len(bodyCenters))
    body = np.asarray(bodyCenters) * L
    volumes = []
    if phantom.kind == "bimodal-blobs":
        movingWeight = rng.uniform(0.8, 1.2)
        for moving in bimodalMovingCenters:
            centers = np.vstack([body, np.asarray(moving) * L])
            weights = np.append(bodyWeights, 1.5 * movingWeight)
            volumes.append(gaussianBlobVolume(centers, sigma, L, phantom.apix, weights))
    else:
        armWeights = rng.uniform(0.8, 1.2, size=armLength)
        for angle in angles:
            centers = np.vstack([body, armCenters(angle) * L])
            weights = np.concatenate([bodyWeights, armWeights])
            volumes.append(gaussianBlobVolume(centers, sigma, L, phantom.apix, weights))
    logger.debug("made %d %s phantoms at L=%d", len(volumes), phantom.kind, L)
    return volumes
