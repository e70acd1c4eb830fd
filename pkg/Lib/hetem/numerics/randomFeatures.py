"""
Gaussian random Fourier features for coordinate networks.
"""

import math

import torch
from torch import nn

from hetem.errors import ParameterError


class RFFBasis(nn.Module):

    """
    A fixed ``m x 3`` frequency matrix *B* with entries drawn from
    ``N(0, scale^2)``. *B* is a buffer, not a parameter: it is saved in
    checkpoints but never trained.
    """

    def __init__(self, m=128, scale=1.0, generator=None):
        super(RFFBasis, self).__init__()
        if m < 1:
            raise ParameterError("number of features must be positive, got %r" % m)
        if not scale > 0:
            raise ParameterError("feature scale must be positive, got %r" % scale)
        self.scale = float(scale)
        B = torch.randn(m, 3, generator=generator, dtype=torch.float64) * self.scale
        self.register_buffer("B", B.to(torch.get_default_dtype()))

    @property
    def m(self):
        return self.B.shape[0]

    @property
    def outputDim(self):
        return 2 * self.m

    def forward(self, coords):
        return rffEncode(coords, self)


def rffEncode(coords, basis):
    """
    ``[cos(2 pi c B^T), sin(2 pi c B^T)]`` for coordinates *c*
    (``... x 3``). *basis* is an :class:`RFFBasis` or a raw matrix.
    """
    B = basis.B if isinstance(basis, RFFBasis) else basis
    projection = 2 * math.pi * torch.matmul(coords.to(B.dtype), B.transpose(-1, -2))
    return torch.cat([torch.cos(projection), torch.sin(projection)], dim=-1)
