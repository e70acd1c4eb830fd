"""
The implicit volume: a coordinate network that maps a frequency
``k`` (cycles/pixel) and a conformation ``z`` to one real Hartley
coefficient.

Outputs are orthonormal coefficients, i.e. the centered Hartley
transform divided by ``L``. With that scaling the mean squared error
between two slices equals the mean squared error between the real
images they render. Frequencies beyond ``|k| = 1/2`` are outside the
band limit and decode to 0.
"""

import torch
from torch import nn

from hetem.numerics.randomFeatures import RFFBasis


class Decoder(nn.Module):

    """
    ``[rff(k), z] -> hidden -> ... -> 1`` with ReLU activations.
    *layers* counts the hidden layers.
    """

    def __init__(self, L, d=8, hidden=256, layers=3, rffM=128, rffScale=None, generator=None):
        super(Decoder, self).__init__()
        self.L = L
        self.d = d
        if rffScale is None:
            rffScale = L / 4.0
        self.rff = RFFBasis(rffM, rffScale, generator=generator)
        modules = [nn.Linear(self.rff.outputDim + d, hidden), nn.ReLU()]
        for _ in range(layers - 1):
            modules += [nn.Linear(hidden, hidden), nn.ReLU()]
        modules.append(nn.Linear(hidden, 1))
        self.mlp = nn.Sequential(*modules)

    def catZ(self, features, z):
        """
        Append *z* (``B x d`` or ``d``) to every row of
        *features* (``B x N x F`` or ``N x F``).
        """
        if z.dim() == 1:
            z = z.expand(features.shape[:-1] + (self.d,))
        else:
            z = z.view(z.shape[0], *([1] * (features.dim() - 2)), self.d)
            z = z.expand(features.shape[:-1] + (self.d,))
        return torch.cat([features, z.to(features.dtype)], dim=-1)

    def forward(self, coords, z):
        """
        Decode Hartley coefficients at *coords* (``... x N x 3``).
        Returns ``... x N``.
        """
        features = self.rff(coords)
        out = self.mlp(self.catZ(features, z)).squeeze(-1)
        inBand = coords.norm(dim=-1) <= 0.5
        return torch.where(inBand, out, torch.zeros_like(out))
