"""
Particle image synthesis and the dataset writer.

An image is formed in Fourier space: the central slice of the class
volume for the pose's rotation, multiplied by the CTF and the
translation phase, transformed back to real space. White Gaussian noise
is then added at the requested SNR (in dB, relative to the variance of
the clean image).
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import torch

from hetem.configData import getAttrWithFallback
from hetem.errors import DegenerateSignalError, DimensionError, ParameterError
from hetem.formats import writeJson, writeText
from hetem.formats.metadataIO import metaCsvWrite
from hetem.formats.mrcIO import mrcsWrite, mrcWrite
from hetem.numerics import FourierVolume, Pose, Volume
from hetem.numerics.ctf import ctfEval
from hetem.numerics.fourierTools import extractSlice, ifft2Centered, translationPhase
from hetem.numerics.rotations import sampleRotationUniform, sampleTranslationUniform
from hetem.simulator import ParticleStack
from hetem.simulator.phantoms import makePhantoms

logger = logging.getLogger(__name__)


def snrToLinear(snrDb):
    """
    >>> snrToLinear(-10.0)
    0.1
    """
    return 10.0 ** (snrDb / 10.0)


# ---------------
# Image Formation
# ---------------

def synthesizeImage(fvol, pose, ctf, rng, snrDb):
    """
    Form one particle image from the :class:`FourierVolume` *fvol*.
    Returns ``(noisy, clean)`` as float64 ``L x L`` arrays. An infinite
    *snrDb* adds no noise.
    """
    L = fvol.L
    slice2d = extractSlice(fvol, torch.from_numpy(pose.R).to(torch.float64))
    C = ctfEval(ctf, L, fvol.apix)
    T = translationPhase(torch.from_numpy(pose.t), L)
    clean = ifft2Centered(T * C * slice2d).real.numpy()
    if math.isinf(snrDb) and snrDb > 0:
        return clean.copy(), clean
    signal = float(np.var(clean))
    if signal == 0:
        raise DegenerateSignalError("clean image is identically zero, cannot add noise at %r dB" % snrDb)
    sigma = math.sqrt(signal / snrToLinear(snrDb))
    noisy = clean + rng.normal(0.0, sigma, size=clean.shape)
    return noisy, clean


def cornerMask(L):
    """
    True for pixels strictly outside the inscribed circle of radius ``L/2``.
    """
    c = np.arange(L) - L // 2
    y, x = np.meshgrid(c, c, indexing="ij")
    return x * x + y * y > (L / 2.0) ** 2


def estimateCornerNoiseVariance(image):
    """
    Sample variance of the corner pixels of *image* (``L x L``), or a
    per-image array for an ``n x L x L`` stack.

    >>> import numpy as np
    >>> estimateCornerNoiseVariance(np.zeros((16, 16)))
    0.0
    """
    if isinstance(image, torch.Tensor):
        image = image.detach().cpu().numpy()
    image = np.asarray(image, dtype=np.float64)
    L = image.shape[-1]
    if L < 16:
        raise DimensionError("corner noise estimation needs L >= 16, got %d" % L)
    corners = image[..., cornerMask(L)]
    variance = np.var(corners, axis=-1, ddof=1)
    if image.ndim == 2:
        return float(variance)
    return variance


def _subset(images, nImages):
    n = len(images)
    if n <= nImages:
        return images
    index = np.unique(np.linspace(0, n - 1, nImages).round().astype(int))
    return images[index]


def estimateDatasetSnr(images, nImages=1000):
    """
    Estimate the SNR of a stack in dB as ``(var(I) - var(noise)) / var(noise)``
    with the noise variance taken from the image corners. At most
    *nImages* evenly spaced images are used.
    """
    images = np.asarray(_subset(images, nImages), dtype=np.float64)
    total = float(np.mean(np.var(images, axis=(-2, -1))))
    noise = float(np.mean(estimateCornerNoiseVariance(images)))
    if noise <= 0:
        logger.warning("image corners carry no noise; treating the stack as noise free")
        return math.inf
    snr = (total - noise) / noise
    if snr <= 0:
        logger.warning("estimated signal power is not positive (%.3g); clamping the SNR to -30 dB", snr)
        snr = 1e-3
    return 10.0 * math.log10(snr)


def achievedSnrDb(clean, noisy):
    """
    The SNR of a stored stack: mean clean variance over mean variance
    of the noise residual, in dB.
    """
    clean = np.asarray(clean, dtype=np.float64)
    residual = np.asarray(noisy, dtype=np.float64) - clean
    noise = float(np.mean(np.var(residual, axis=(-2, -1))))
    signal = float(np.mean(np.var(clean, axis=(-2, -1))))
    if noise == 0:
        return math.inf
    return 10.0 * math.log10(signal / noise)


# -------
# Dataset
# -------

def buildDataset(volumes, cfg, numThreads=None):
    """
    Generate a :class:`ParticleStack` from class *volumes* following
    the dataset config *cfg*. Classes are assigned round-robin, so every
    class gets ``nImages / nClasses`` images. Image *i* draws everything
    from its own stream seeded with ``(seed, i)``, so the result does
    not depend on the number of worker threads.
    """
    if not volumes:
        raise ParameterError("at least one class volume is required")
    nClasses = len(volumes)
    L = volumes[0].L
    for volume in volumes:
        if volume.L != L or volume.apix != volumes[0].apix:
            raise DimensionError("class volumes must share L and apix")
    if cfg.nImages % nClasses:
        raise ParameterError("nImages (%d) is not divisible by the class count (%d)" % (cfg.nImages, nClasses))
    pool = getAttrWithFallback(cfg, "ctfPool")
    for params in pool:
        params.validate()
    if numThreads is None:
        numThreads = getAttrWithFallback(None, "numThreads")
    fvols = [FourierVolume.fromVolume(Volume(v.data.to(torch.float64), v.apix)) for v in volumes]

    def synthesizeOne(index):
        rng = np.random.default_rng([cfg.seed, index])
        label = index % nClasses
        R = sampleRotationUniform(rng)
        t = sampleTranslationUniform(rng, cfg.tMax)
        ctf = pool[int(rng.integers(len(pool)))]
        noisy, clean = synthesizeImage(fvols[label], Pose(R, t), ctf, rng, cfg.snrDb)
        return noisy, clean, R, t, ctf.asArray(), label

    with ThreadPoolExecutor(max_workers=numThreads) as executor:
        results = list(executor.map(synthesizeOne, range(cfg.nImages)))
    logger.info("synthesized %d images of %d classes at %.1f dB", cfg.nImages, nClasses, cfg.snrDb)
    return ParticleStack(
        images=np.stack([r[0] for r in results]).astype(np.float32),
        rotations=np.stack([r[2] for r in results]),
        translations=np.stack([r[3] for r in results]),
        ctfs=np.stack([r[4] for r in results]),
        labels=np.asarray([r[5] for r in results]),
        apix=volumes[0].apix,
        clean=np.stack([r[1] for r in results]).astype(np.float32),
    )


class DatasetCompiler(object):

    """
    Writes a synthetic dataset directory. The only external method is
    :meth:`compile`; :attr:`paths` holds the location of every file.

    ===============  ======================================
    volumes          ``volumes/class_<i>.mrc``
    particles        ``particles.mrcs``
    metadata         ``particles.csv``
    config           ``config.json``
    manifest         ``manifest.json``
    report           ``report.txt``
    ===============  ======================================

    *config* is a :class:`hetem.runConfig.RunConfig`. Ground-truth
    *volumes* may be given; otherwise phantoms are built from the
    config's phantom section.
    """

    def __init__(self, config, path, volumes=None):
        self.config = config
        self.path = path
        self.volumes = volumes
        self.stack = None
        self.log = []
        self.paths = dict(
            volumes=os.path.join(path, "volumes"),
            particles=os.path.join(path, "particles.mrcs"),
            metadata=os.path.join(path, "particles.csv"),
            config=os.path.join(path, "config.json"),
            manifest=os.path.join(path, "manifest.json"),
            report=os.path.join(path, "report.txt"),
        )

    def compile(self):
        """
        Build the dataset and write all files. Returns the manifest dict.
        """
        os.makedirs(self.path, exist_ok=True)
        self.setupFile_volumes(self.paths["volumes"])
        self.setupFile_particles(self.paths["particles"])
        self.setupFile_metadata(self.paths["metadata"])
        self.setupFile_config(self.paths["config"])
        manifest = self.setupFile_manifest(self.paths["manifest"])
        self.setupFile_report(self.paths["report"])
        return manifest

    def setupFile_volumes(self, path):
        """
        Make (or take) the class volumes and write them as MRC.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        if self.volumes is None:
            phantom = self.config.phantom
            rng = np.random.default_rng(self.config.dataset.seed)
            self.volumes = makePhantoms(phantom, rng)
            self.log.append("made %d %s phantoms (L=%d)" % (len(self.volumes), phantom.kind, phantom.L))
        else:
            self.log.append("using %d imported volumes (L=%d)" % (len(self.volumes), self.volumes[0].L))
        os.makedirs(path, exist_ok=True)
        for i, volume in enumerate(self.volumes):
            mrcWrite(os.path.join(path, "class_%d.mrc" % i), volume)

    def setupFile_particles(self, path):
        """
        Synthesize the stack and write the images.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        self.stack = buildDataset(self.volumes, self.config.dataset)
        mrcsWrite(path, self.stack.images, apix=self.stack.apix)
        self.log.append("wrote %d particle images" % len(self.stack))

    def setupFile_metadata(self, path):
        """
        Write the ground-truth metadata CSV.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        metaCsvWrite(path, self.stack)

    def setupFile_config(self, path):
        """
        Echo the run config.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        from hetem.runConfig import serializeConfig
        writeText(path, serializeConfig(self.config) + "\n")

    def setupFile_manifest(self, path):
        """
        Write the manifest: sizes, class counts, requested and
        achieved SNR and the corner-estimated noise variance.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        from hetem import __version__
        stack = self.stack
        achieved = achievedSnrDb(stack.clean, stack.images)
        cornerVariance = float(np.median(estimateCornerNoiseVariance(stack.images)))
        injectedVariance = float(np.median(np.var(stack.images.astype(np.float64) - stack.clean, axis=(-2, -1))))
        manifest = dict(
            format="hetem-dataset",
            version=__version__,
            nImages=len(stack),
            L=stack.L,
            apix=stack.apix,
            nClasses=len(self.volumes),
            classCounts=stack.classCounts(),
            seed=self.config.dataset.seed,
            tMax=self.config.dataset.tMax,
            snrDbRequested=self.config.dataset.snrDb,
            snrDbAchieved=achieved,
            noiseVarianceInjected=injectedVariance,
            noiseVarianceCorner=cornerVariance,
            files=dict(
                volumes=["volumes/class_%d.mrc" % i for i in range(len(self.volumes))],
                particles=os.path.basename(self.paths["particles"]),
                metadata=os.path.basename(self.paths["metadata"]),
                config=os.path.basename(self.paths["config"]),
            ),
        )
        writeJson(path, manifest)
        self.log.append("achieved SNR %.2f dB (requested %.2f dB)" % (achieved, self.config.dataset.snrDb))
        return manifest

    def setupFile_report(self, path):
        """
        Write the human-readable log.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        writeText(path, "\n".join(self.log) + "\n")


def _test():
    """
    >>> from types import SimpleNamespace
    >>> phantom = SimpleNamespace(kind="bimodal-blobs", L=16, apix=1.0, motionAngles=None, nClasses=None)
    >>> volumes = makePhantoms(phantom, np.random.default_rng(0))
    >>> cfg = SimpleNamespace(nImages=4, snrDb=-10.0, tMax=2.0, ctfPool=None, seed=1)
    >>> stack = buildDataset(volumes, cfg, numThreads=2)
    >>> stack.images.shape, stack.classCounts()
    ((4, 16, 16), [2, 2])
    """


if __name__ == "__main__":
    import doctest
    doctest.testmod()
