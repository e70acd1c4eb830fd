"""
Fallback values for configuration entries left unset (``None``).

Several settings depend on other settings or on the data itself, so
they are resolved when they are needed rather than when the config is
parsed. :func:`getAttrWithFallback` does the lookup:

===============  ========================================================
rffScale         ``L / 4``
cppBatchSize     the training batch size
snrDbEst         estimated from the corners of the training images
ctfPool          100 typical settings drawn with the dataset seed
nClasses         2 for bimodal-blobs, one per motion angle for arm-motion
motionAngles     9, 18, ... 90 degrees
device           ``cuda`` when available, else ``cpu``
numThreads       ``HETEM_NUM_THREADS`` or the CPU count
===============  ========================================================
"""

import logging
import os

import numpy as np

import hetem

logger = logging.getLogger(__name__)


# -----------------
# Special Fallbacks
# -----------------

def rffScaleFallback(section, context):
    """
    Return ``L / 4`` so the encoded frequencies cover the Nyquist band.
    """
    return context["L"] / 4.0


def cppBatchSizeFallback(section, context):
    """
    Return the training batch size.
    """
    return section.batchSize


def snrDbEstFallback(section, context):
    """
    Estimate the dataset SNR from the stack in *context*.
    """
    from hetem.simulator.particleSimulator import estimateDatasetSnr
    value = estimateDatasetSnr(context["stack"].images, nImages=section.cornerImages)
    logger.info("estimated dataset SNR: %.2f dB", value)
    return value


def ctfPoolFallback(section, context):
    """
    Draw the default CTF pool from the dataset seed.
    """
    from hetem.numerics.ctf import defaultCtfPool
    rng = np.random.default_rng([section.seed, 0xC7F])
    return defaultCtfPool(rng)


def nClassesFallback(section, context):
    """
    Return 2 for bimodal-blobs and the number of motion angles otherwise.
    """
    if section.kind == "bimodal-blobs":
        return 2
    return len(getAttrWithFallback(section, "motionAngles"))


def deviceFallback(section, context):
    """
    Return ``"cuda"`` when a GPU is available.
    """
    if hetem.haveCUDA():
        return "cuda"
    return "cpu"


def numThreadsFallback(section, context):
    """
    Return ``HETEM_NUM_THREADS`` if set, otherwise the CPU count.
    """
    value = os.environ.get("HETEM_NUM_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            logger.warning("ignoring HETEM_NUM_THREADS=%r", value)
    return os.cpu_count() or 1


staticFallbackData = dict(
    motionAngles=[9.0 * i for i in range(1, 11)],
)

specialFallbacks = dict(
    rffScale=rffScaleFallback,
    cppBatchSize=cppBatchSizeFallback,
    snrDbEst=snrDbEstFallback,
    ctfPool=ctfPoolFallback,
    nClasses=nClassesFallback,
    device=deviceFallback,
    numThreads=numThreadsFallback,
)

requiredAttributes = [
    "outputDir",
]


# --------------
# Main Functions
# --------------

def getAttrWithFallback(section, attr, context=None):
    """
    Get the value for *attr* from the config *section*. If the
    section does not have the attribute or its value is None, the
    value is taken from a static table or computed from the other
    settings and the optional *context* dict (``L``, ``stack``).
    """
    if hasattr(section, attr) and getattr(section, attr) is not None:
        value = getattr(section, attr)
    else:
        if context is None:
            context = {}
        if attr in specialFallbacks:
            value = specialFallbacks[attr](section, context)
        else:
            value = staticFallbackData[attr]
    return value


def preflightConfig(config):
    """
    Returns a dict containing two items. The value for each
    item will be a list of ``section.attribute`` names.

    ==================  ======================================
    missingRequired     Required data that is missing.
    resolvedByFallback  Unset data that will use a fallback.
    ==================  ======================================
    """
    missingRequired = []
    resolvedByFallback = []
    for attr in requiredAttributes:
        if getattr(config, attr, None) is None:
            missingRequired.append(attr)
    for sectionName in ("phantom", "dataset", "model", "train", "analysis"):
        section = getattr(config, sectionName)
        for attr in type(section).model_fields:
            if getattr(section, attr) is not None:
                continue
            if attr in specialFallbacks or attr in staticFallbackData:
                resolvedByFallback.append("%s.%s" % (sectionName, attr))
    return dict(missingRequired=missingRequired, resolvedByFallback=resolvedByFallback)
