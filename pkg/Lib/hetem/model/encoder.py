"""
The image encoder: a residual-18 convolutional trunk shared by three
fully connected heads.

=============  =====================================
rotation head  6 numbers, mapped to SO(3) by
               :func:`hetem.numerics.rotations.rot6dToMatrix`
shift head     in-plane translation (pixels)
latent head    posterior mean and log-variance of *z*
=============  =====================================
"""

from typing import NamedTuple

import torch
from torch import nn

from hetem.errors import TrainingDivergenceError
from hetem.numerics.rotations import rot6dToMatrix


class EncoderOutput(NamedTuple):

    rot6d: torch.Tensor
    t: torch.Tensor
    mu: torch.Tensor
    logvar: torch.Tensor

    def rotations(self):
        return rot6dToMatrix(self.rot6d)

    def checkFinite(self):
        """
        Raise :class:`TrainingDivergenceError` if any output is not finite.
        """
        for name, value in zip(self._fields, self):
            if not bool(torch.isfinite(value).all()):
                raise TrainingDivergenceError("encoder output %s is not finite" % name)
        return self


def standardizeImages(images, eps=1e-6):
    """
    Shift and scale each image to zero mean and unit variance.
    """
    mean = images.mean(dim=(-2, -1), keepdim=True)
    std = images.std(dim=(-2, -1), keepdim=True)
    return (images - mean) / (std + eps)


def reparameterize(mu, logvar, generator=None, eta=None):
    """
    Draw ``z = mu + exp(logvar / 2) * eta`` with ``eta ~ N(0, I)``.
    A precomputed *eta* may be passed instead of a *generator*.
    """
    if eta is None:
        eta = torch.randn(mu.shape, generator=generator, dtype=mu.dtype, device=mu.device)
    return mu + torch.exp(0.5 * logvar) * eta


# -----
# Trunk
# -----

class BasicBlock(nn.Module):

    def __init__(self, inChannels, outChannels, stride=1):
        super(BasicBlock, self).__init__()
        self.conv1 = nn.Conv2d(inChannels, outChannels, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(outChannels)
        self.conv2 = nn.Conv2d(outChannels, outChannels, 3, stride=1, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(outChannels)
        self.relu = nn.ReLU(inplace=True)
        self.downsample = None
        if stride != 1 or inChannels != outChannels:
            self.downsample = nn.Sequential(
                nn.Conv2d(inChannels, outChannels, 1, stride=stride, bias=False),
                nn.BatchNorm2d(outChannels),
            )

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class ResNet18Trunk(nn.Module):

    """
    Residual-18 topology for single-channel images, up to and
    including global average pooling (no classification layer).
    """

    widths = (64, 128, 256, 512)

    def __init__(self):
        super(ResNet18Trunk, self).__init__()
        self.conv1 = nn.Conv2d(1, 64, 7, stride=2, padding=3, bias=False)
        self.bn1 = nn.BatchNorm2d(64)
        self.relu = nn.ReLU(inplace=True)
        self.maxpool = nn.MaxPool2d(3, stride=2, padding=1)
        layers = []
        inChannels = 64
        for i, width in enumerate(self.widths):
            stride = 1 if i == 0 else 2
            layers.append(nn.Sequential(BasicBlock(inChannels, width, stride), BasicBlock(width, width)))
            inChannels = width
        self.layers = nn.Sequential(*layers)
        self.avgpool = nn.AdaptiveAvgPool2d(1)

    @property
    def outputDim(self):
        return self.widths[-1]

    def forward(self, x):
        x = self.maxpool(self.relu(self.bn1(self.conv1(x))))
        x = self.layers(x)
        return torch.flatten(self.avgpool(x), 1)


def _head(inDim, hidden, outDim):
    return nn.Sequential(nn.Linear(inDim, hidden), nn.ReLU(), nn.Linear(hidden, outDim))


class Encoder(nn.Module):

    """
    Maps ``n x L x L`` images to an :class:`EncoderOutput`.
    """

    def __init__(self, d=8, hidden=256):
        super(Encoder, self).__init__()
        self.d = d
        self.trunk = ResNet18Trunk()
        features = self.trunk.outputDim
        self.rotationHead = _head(features, hidden, 6)
        self.shiftHead = _head(features, hidden, 2)
        self.conformationHead = _head(features, hidden, 2 * d)
        # start the rotation head near the identity
        with torch.no_grad():
            self.rotationHead[-1].bias.copy_(torch.tensor([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]))

    def forward(self, images, freezeConformation=False):
        """
        With *freezeConformation* the latent head runs without
        gradients, so its parameters receive none.
        """
        x = standardizeImages(images).unsqueeze(1)
        features = self.trunk(x)
        rot6d = self.rotationHead(features)
        t = self.shiftHead(features)
        if freezeConformation:
            with torch.no_grad():
                conformation = self.conformationHead(features.detach())
        else:
            conformation = self.conformationHead(features)
        mu, logvar = conformation[:, :self.d], conformation[:, self.d:]
        return EncoderOutput(rot6d, t, mu, logvar)

    def conformationParameters(self):
        return list(self.conformationHead.parameters())
