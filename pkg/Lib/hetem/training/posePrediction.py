"""
Conditional pose prediction: the decoder renders images at poses
drawn uniformly over SO(3) x [-tMax, tMax)^2, noise is added, and the
encoder is trained to recover those poses.
"""

import math

import torch

from hetem.errors import ScheduleError
from hetem.model.encoder import reparameterize
from hetem.numerics.rotations import sampleRotationUniform, sampleTranslationUniform


class PosteriorBuffer(object):

    """
    The ``(mu, logvar)`` of the latest reconstruction batch, detached.
    """

    def __init__(self):
        self.mu = None
        self.logvar = None

    def __len__(self):
        return 0 if self.mu is None else len(self.mu)

    def isEmpty(self):
        return self.mu is None

    def update(self, mu, logvar):
        self.mu = mu.detach().clone()
        self.logvar = logvar.detach().clone()

    def sample(self, n, rng):
        """
        Draw *n* conformations by reparameterizing buffer entries.
        With a buffer of size *n* every entry is used once, in order;
        otherwise entries are drawn with replacement.
        """
        if self.isEmpty():
            raise ScheduleError("the posterior buffer is empty; run a reconstruction step first")
        if n == len(self):
            mu, logvar = self.mu, self.logvar
        else:
            index = torch.from_numpy(rng.integers(len(self), size=n)).to(self.mu.device)
            mu, logvar = self.mu[index], self.logvar[index]
        eta = torch.from_numpy(rng.standard_normal(mu.shape)).to(mu)
        return reparameterize(mu, logvar, eta=eta)

    def state(self):
        if self.isEmpty():
            return None
        return dict(mu=self.mu.cpu(), logvar=self.logvar.cpu())

    def loadState(self, state, device="cpu"):
        if state is None:
            self.mu = self.logvar = None
        else:
            self.mu = state["mu"].to(device)
            self.logvar = state["logvar"].to(device)


class CleanVarianceTracker(object):

    """
    Variance of the rendered clean images: the value for the current
    CPP batch and a running mean over all batches so far.
    """

    def __init__(self):
        self.current = 0.0
        self.mean = 0.0
        self.count = 0

    def update(self, clean):
        value = float(clean.detach().var(dim=(-2, -1), unbiased=False).mean())
        self.current = value
        self.count += 1
        self.mean += (value - self.mean) / self.count
        return value

    def state(self):
        return dict(current=self.current, mean=self.mean, count=self.count)

    def loadState(self, state):
        self.current = float(state["current"])
        self.mean = float(state["mean"])
        self.count = int(state["count"])


def cppBatch(model, buffer, tracker, rng, n, tMax, ctfPool=None, snrDb=-10.0, usePosterior=True, adaptiveNoise=True, fixedNoiseVariance=None):
    """
    Build one batch of synthetic images.

    ===================  =================================================
    model                :class:`hetem.model.HetEMModel`; only its decoder
                         is used, without gradients
    buffer               :class:`PosteriorBuffer`, used when *usePosterior*
    tracker              :class:`CleanVarianceTracker`
    rng                  numpy Generator for every random draw
    n                    batch size
    tMax                 translation bound in pixels
    ctfPool              ``m x 7`` CTF parameter tensor to draw from
    snrDb                target SNR with *adaptiveNoise*
    fixedNoiseVariance   noise variance without *adaptiveNoise*
    ===================  =================================================

    Returns ``(images, rotations, translations, noiseVariance)``; the
    poses are the regression targets.
    """
    parameter = next(model.decoder.parameters())
    dtype, device = parameter.dtype, parameter.device
    if usePosterior:
        z = buffer.sample(n, rng).to(dtype=dtype, device=device)
    else:
        z = torch.from_numpy(rng.standard_normal((n, model.d))).to(dtype=dtype, device=device)
    R = torch.from_numpy(sampleRotationUniform(rng, n)).to(dtype=dtype, device=device)
    t = torch.from_numpy(sampleTranslationUniform(rng, tMax, n)).to(dtype=dtype, device=device)
    ctf = None
    if ctfPool is not None:
        index = torch.from_numpy(rng.integers(len(ctfPool), size=n)).to(ctfPool.device)
        ctf = ctfPool[index]
    with torch.no_grad():
        clean = model.renderPrediction(R, t, z, ctf)
    signal = tracker.update(clean)
    if adaptiveNoise:
        variance = signal / 10.0 ** (snrDb / 10.0) if math.isfinite(snrDb) else 0.0
    else:
        variance = float(fixedNoiseVariance or 0.0)
    noise = torch.from_numpy(rng.standard_normal(clean.shape)).to(clean) * math.sqrt(variance)
    return clean + noise, R, t, variance
