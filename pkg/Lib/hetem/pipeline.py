"""
The commands behind the ``hetem`` command line, callable from Python.

==================  ==========================================================
cmdSimulate         write a synthetic dataset directory
cmdTrain            train on a dataset directory, resuming when possible
cmdEvaluate         metrics, FSC curves, plots and representative volumes
cmdFsc              FSC between two MRC volumes
cmdExtractVolume    decode one latent vector into an MRC volume
==================  ==========================================================
"""

import glob
import logging
import os
import shutil

import numpy as np
import torch

from hetem.analysis.fsc import fscCurve, fscSummary
from hetem.configData import getAttrWithFallback, preflightConfig
from hetem.errors import DimensionError, HetEMError, OutputExistsError, ParameterError
from hetem.formats import atomicWrite
from hetem.formats.metadataIO import readParticleStack
from hetem.formats.mrcIO import mrcRead, mrcWrite
from hetem.model.checkpoint import latestCheckpoint, listCheckpoints, loadModel
from hetem.reportWriter import EvaluationCompiler
from hetem.runConfig import RunConfig, updateConfig
from hetem.simulator.particleSimulator import DatasetCompiler
from hetem.training.trainer import HetEMTrainer

logger = logging.getLogger(__name__)

flagNames = dict(
    no_cpp="cppEnabled",
    no_fch="fchEnabled",
    no_pds="pdsEnabled",
    no_asn="asnEnabled",
)


# -----
# Tools
# -----

def applyFlags(config, flags):
    """
    Turn off the training strategies named in *flags*
    (``no_cpp``, ``no_fch``, ``no_pds``, ``no_asn``).

    >>> cfg = applyFlags(RunConfig(), ["no_cpp"])
    >>> cfg.train.flags.cppEnabled, cfg.train.flags.fchEnabled
    (False, True)
    """
    values = {}
    for flag in flags or []:
        flag = flag.strip()
        if not flag:
            continue
        if flag not in flagNames:
            raise ParameterError("unknown flag %r (expected one of %s)" % (flag, ", ".join(sorted(flagNames))))
        values[flagNames[flag]] = False
    if not values:
        return config
    return updateConfig(config, train=dict(flags=values))


def prepareOutput(path, force=False):
    """
    Make sure *path* is a directory that may be written. A non-empty
    directory is refused unless *force* is set.
    """
    if os.path.isdir(path) and os.listdir(path) and not force:
        raise OutputExistsError("%s exists and is not empty (use --force to overwrite)" % path)
    if os.path.exists(path) and not os.path.isdir(path):
        raise OutputExistsError("%s exists and is not a directory" % path)
    os.makedirs(path, exist_ok=True)


def applyThreadLimit():
    """
    Cap torch's intra-op threads when ``HETEM_NUM_THREADS`` is set.
    """
    if os.environ.get("HETEM_NUM_THREADS"):
        n = getAttrWithFallback(None, "numThreads")
        torch.set_num_threads(n)
        logger.debug("torch limited to %d threads", n)


def _preflight(config):
    report = preflightConfig(config)
    if report["missingRequired"]:
        raise ParameterError("missing required settings: %s" % ", ".join(report["missingRequired"]))
    for name in report["resolvedByFallback"]:
        logger.debug("%s resolved by fallback", name)
    return report


def datasetPaths(datasetDir):
    return dict(
        particles=os.path.join(datasetDir, "particles.mrcs"),
        metadata=os.path.join(datasetDir, "particles.csv"),
        volumes=os.path.join(datasetDir, "volumes"),
    )


def loadDataset(datasetDir):
    """
    The :class:`hetem.simulator.ParticleStack` stored in *datasetDir*.
    """
    paths = datasetPaths(datasetDir)
    for key in ("particles", "metadata"):
        if not os.path.exists(paths[key]):
            raise ParameterError("%s is not a dataset directory: %s is missing" % (datasetDir, os.path.basename(paths[key])))
    return readParticleStack(paths["particles"], paths["metadata"])


def loadGroundTruthVolumes(datasetDir):
    """
    Ground-truth class volumes ordered by class index, or None.
    """
    found = glob.glob(os.path.join(datasetPaths(datasetDir)["volumes"], "class_*.mrc"))
    if not found:
        return None
    found.sort(key=lambda path: int(os.path.basename(path)[6:-4]))
    return [mrcRead(path) for path in found]


def _checkpoint(runDir, checkpoint=None):
    if checkpoint is not None:
        return checkpoint
    path = latestCheckpoint(runDir)
    if path is None:
        raise HetEMError("%s contains no checkpoints" % runDir)
    return path


# --------
# Commands
# --------

def cmdSimulate(config, outDir, force=False, volumePaths=None):
    """
    Write a dataset directory into *outDir*. With *volumePaths* the
    class volumes are read from MRC files instead of being generated.
    Returns the manifest dict.
    """
    config = updateConfig(config, outputDir=outDir)
    _preflight(config)
    volumes = None
    if volumePaths:
        volumes = [mrcRead(path) for path in volumePaths]
        for path, volume in zip(volumePaths, volumes):
            if volume.L != config.phantom.L:
                raise DimensionError("%s has L=%d but the config has L=%d" % (path, volume.L, config.phantom.L))
    prepareOutput(outDir, force)
    compiler = DatasetCompiler(config, outDir, volumes=volumes)
    manifest = compiler.compile()
    logger.info("dataset written to %s (SNR %.2f dB)", outDir, manifest["snrDbAchieved"])
    return manifest


def cmdTrain(config, datasetDir, runDir, resume=True, force=False):
    """
    Train on the dataset in *datasetDir*, writing into *runDir*.
    Existing checkpoints are resumed unless *force* is set, in which
    case they are removed first. Returns ``(model, epochLog)``.
    """
    config = updateConfig(config, outputDir=runDir)
    _preflight(config)
    applyThreadLimit()
    stack = loadDataset(datasetDir)
    if stack.L != config.phantom.L:
        raise DimensionError("config L=%d does not match dataset L=%d" % (config.phantom.L, stack.L))
    if force:
        shutil.rmtree(os.path.join(runDir, "checkpoints"), ignore_errors=True)
        resume = False
    elif listCheckpoints(runDir):
        if not resume:
            raise OutputExistsError("%s already has checkpoints (use --force to start over)" % runDir)
    elif os.path.isdir(runDir) and os.listdir(runDir):
        raise OutputExistsError("%s exists and is not empty (use --force to overwrite)" % runDir)
    os.makedirs(runDir, exist_ok=True)
    trainer = HetEMTrainer(config, stack, runDir, datasetDir=os.path.abspath(datasetDir))
    return trainer.run(resume=resume)


def cmdEvaluate(runDir, datasetDir, outDir=None, checkpoint=None, force=False):
    """
    Evaluate the newest checkpoint in *runDir* (or *checkpoint*)
    against the dataset in *datasetDir*. Results go to *outDir*,
    by default ``<runDir>/evaluation``. Returns the metrics dict.
    """
    applyThreadLimit()
    if outDir is None:
        outDir = os.path.join(runDir, "evaluation")
    path = _checkpoint(runDir, checkpoint)
    model, archive = loadModel(path)
    config = RunConfig.model_validate(archive["config"])
    stack = loadDataset(datasetDir)
    if stack.L != model.L:
        raise DimensionError("model L=%d does not match dataset L=%d" % (model.L, stack.L))
    volumes = loadGroundTruthVolumes(datasetDir)
    prepareOutput(outDir, force)
    compiler = EvaluationCompiler(model, stack, outDir, config, volumes=volumes, checkpoint=os.path.abspath(path))
    compiler.metrics["epoch"] = int(archive["epoch"])
    metrics = compiler.compile()
    logger.info("evaluation written to %s", outDir)
    return metrics


def cmdFsc(pathA, pathB, outDir, cutoff=0.5, force=True):
    """
    Write ``fsc.csv`` for two MRC volumes and return the resolution
    summary (see :func:`hetem.analysis.fsc.fscSummary`).
    """
    import pandas as pd
    curve = fscCurve(mrcRead(pathA), mrcRead(pathB))
    prepareOutput(outDir, force)
    frame = pd.DataFrame(dict(frequency=curve.frequencies, correlation=curve.correlations))
    with atomicWrite(os.path.join(outDir, "fsc.csv")) as tempPath:
        frame.to_csv(tempPath, index=False, lineterminator="\n")
    return fscSummary(curve, cutoffs=(cutoff, 0.143))


def cmdExtractVolume(runDir, z, outPath, checkpoint=None):
    """
    Decode latent vector *z* with the model in *runDir* and write it
    to *outPath*. Returns the :class:`hetem.numerics.Volume`.
    """
    model, _ = loadModel(_checkpoint(runDir, checkpoint))
    z = np.asarray(z, dtype=np.float64).ravel()
    if len(z) != model.d:
        raise DimensionError("z has %d values but the model latent size is %d" % (len(z), model.d))
    if not np.all(np.isfinite(z)):
        raise ParameterError("z must be finite")
    volume = model.extractVolume(z)
    mrcWrite(outPath, volume)
    return volume
