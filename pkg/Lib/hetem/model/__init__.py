"""
Networks and rendering. :class:`HetEMModel` bundles the encoder and
decoder with the image geometry (*L*, *apix*).
"""

import torch
from torch import nn

from hetem.model.decoder import Decoder
from hetem.model.encoder import Encoder
from hetem.model.renderer import extractVolume, renderHartley, renderPrediction


class HetEMModel(nn.Module):

    def __init__(self, L, d=8, hidden=256, decoderLayers=3, rffM=128, rffScale=None, apix=1.0, generator=None):
        super(HetEMModel, self).__init__()
        self.L = L
        self.d = d
        self.apix = apix
        self.encoder = Encoder(d=d, hidden=hidden)
        self.decoder = Decoder(L, d=d, hidden=hidden, layers=decoderLayers, rffM=rffM, rffScale=rffScale, generator=generator)

    @classmethod
    def fromConfig(cls, modelConfig, L, apix=1.0, generator=None):
        """
        Build from a :class:`hetem.runConfig.ModelConfig`.
        """
        from hetem.configData import getAttrWithFallback
        rffScale = getAttrWithFallback(modelConfig, "rffScale", dict(L=L))
        return cls(
            L,
            d=modelConfig.d,
            hidden=modelConfig.hidden,
            decoderLayers=modelConfig.decoderLayers,
            rffM=modelConfig.rffM,
            rffScale=rffScale,
            apix=apix,
            generator=generator,
        )

    def encode(self, images, freezeConformation=False):
        return self.encoder(images, freezeConformation=freezeConformation)

    def renderHartley(self, R, t, z, ctf=None):
        return renderHartley(self.decoder, R, t, z, ctf, self.apix)

    def renderPrediction(self, R, t, z, ctf=None):
        return renderPrediction(self.decoder, R, t, z, ctf, self.apix)

    def extractVolume(self, z):
        return extractVolume(self.decoder, z, self.apix)

    def encodeStack(self, images, batchSize=256):
        """
        Encode a full stack in evaluation mode. Returns numpy arrays
        ``(rotations, translations, mu, logvar)``.
        """
        parameter = next(self.parameters())
        wasTraining = self.training
        self.eval()
        outputs = []
        try:
            with torch.no_grad():
                for start in range(0, len(images), batchSize):
                    batch = torch.as_tensor(images[start:start + batchSize], dtype=parameter.dtype, device=parameter.device)
                    out = self.encoder(batch)
                    outputs.append((out.rotations(), out.t, out.mu, out.logvar))
        finally:
            self.train(wasTraining)
        return tuple(torch.cat([o[i] for o in outputs]).cpu().numpy() for i in range(4))
