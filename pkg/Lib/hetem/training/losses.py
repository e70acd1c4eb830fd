"""
Loss terms. Per-image values are averaged over the batch before any
weight is applied.

==================  =====================================================
lossImage           mean squared error over the image
lossSym             min of lossImage against the target and its mirror
lossKl              KL divergence of N(mu, sigma^2) from N(0, I)
lossReconTotal      ``sym + lambdaZ * kl + lambdaT * mean(|t|_1) / 2``
lossCpp             ``lambdaP * (|dR|_F^2 / 9 + |dt|_1 / 2)``
==================  =====================================================
"""

import torch

from hetem.numerics.fourierTools import flipHorizontal

defaultLambdaZ = 1e-4
defaultLambdaT = 1e-3
defaultLambdaP = 0.1


def imageErrors(pred, target):
    """
    Per-image mean squared error over the trailing two axes.
    """
    return ((pred - target) ** 2).mean(dim=(-2, -1))


def lossImage(pred, target):
    """
    >>> import torch
    >>> float(lossImage(torch.zeros(4, 4), torch.ones(4, 4)))
    1.0
    """
    return imageErrors(pred, target).mean()


def lossSymPerImage(pred, target):
    return torch.minimum(imageErrors(pred, target), imageErrors(pred, flipHorizontal(target)))


def lossSym(pred, target):
    """
    Symmetrized loss: each image takes the better of the target and
    the horizontally mirrored target. The mirror is the same index map
    in real and Hartley space, so either domain may be passed.
    """
    return lossSymPerImage(pred, target).mean()


def lossKlPerImage(mu, logvar):
    return 0.5 * (mu * mu + torch.exp(logvar) - 1 - logvar).sum(dim=-1)


def lossKl(mu, logvar):
    """
    >>> import torch
    >>> float(lossKl(torch.ones(1, 1), torch.zeros(1, 1)))
    0.5
    """
    return lossKlPerImage(mu, logvar).mean()


def lossTranslation(t):
    """
    ``mean(|t|_1) / 2``; the unweighted translation prior.
    """
    return 0.5 * t.abs().sum(dim=-1).mean()


def lossReconTotal(sym, kl, trans, lambdaZ=defaultLambdaZ, lambdaT=defaultLambdaT):
    """
    Combine the reconstruction terms. *trans* is
    :func:`lossTranslation`, not yet weighted.

    >>> import torch
    >>> t = torch.tensor([[2.0, -2.0]])
    >>> round(float(lossReconTotal(0.0, 0.0, lossTranslation(t))), 6)
    0.002
    """
    return sym + lambdaZ * kl + lambdaT * trans


def lossCppParts(rSyn, rPred, tSyn, tPred):
    """
    The unweighted rotation and translation terms of :func:`lossCpp`:
    ``mean(|dR|_F^2) / 9`` and ``mean(|dt|_1) / 2``.
    """
    rotation = ((rSyn - rPred) ** 2).sum(dim=(-2, -1)).mean() / 9.0
    translation = 0.5 * (tSyn - tPred).abs().sum(dim=-1).mean()
    return rotation, translation


def lossCpp(rSyn, rPred, tSyn, tPred, lambdaP=defaultLambdaP):
    """
    >>> import torch
    >>> R = torch.eye(3)[None]
    >>> round(float(lossCpp(R, R, torch.tensor([[1.0, -1.0]]), torch.zeros(1, 2))), 6)
    0.1
    """
    rotation, translation = lossCppParts(rSyn, rPred, tSyn, tPred)
    return lambdaP * (rotation + translation)
