"""
The training loop. Every mini-batch runs one reconstruction step
followed, when enabled, by one conditional pose prediction step, both
through a single Adam optimizer.

Strategy flags (``train.flags``):

============  ===========================================================
cppEnabled    run the pose prediction step
fchEnabled    freeze the conformation head for the first ``fchEpochs``
              epochs and draw ``z`` from the prior meanwhile
pdsEnabled    take CPP conformations from the posterior buffer
asnEnabled    scale CPP noise to the estimated dataset SNR; otherwise use
              a fixed variance measured in the image corners
============  ===========================================================

Each epoch draws its batch order and all random numbers from a stream
seeded with ``(seed, epoch)``, so a resumed run repeats the epochs an
uninterrupted run would have produced.
"""

import logging
import math
import os
import time

import numpy as np
import pandas as pd
import torch

from hetem.configData import getAttrWithFallback
from hetem.errors import DegeneracyError, DimensionError, ParameterError, TrainingDivergenceError
from hetem.formats import atomicWrite, writeJson, writeText
from hetem.model import HetEMModel
from hetem.model.checkpoint import checkpointPath, latestCheckpoint, loadCheckpoint, saveCheckpoint
from hetem.model.encoder import reparameterize, standardizeImages
from hetem.model.renderer import imagesToHartley
from hetem.simulator.particleSimulator import estimateCornerNoiseVariance
from hetem.training.losses import lossCppParts, lossKl, lossReconTotal, lossSym, lossTranslation
from hetem.training.posePrediction import CleanVarianceTracker, PosteriorBuffer, cppBatch

logger = logging.getLogger(__name__)

logColumns = ["epoch", "loss_sym", "loss_kl", "loss_trans", "loss_cpp_rot", "loss_cpp_trans", "wall_seconds"]


def _finite(value, what, epoch):
    if not math.isfinite(float(value)):
        raise TrainingDivergenceError("%s became %r" % (what, float(value)), epoch=epoch)


class HetEMTrainer(object):

    """
    Trains a :class:`hetem.model.HetEMModel` on a
    :class:`hetem.simulator.ParticleStack`. The external methods are
    :meth:`run` and :meth:`trainEpoch`. :attr:`paths` lists the files
    written into *runDir*:

    ===========  ===================================
    config       ``config.json``
    manifest     ``manifest.json``
    trainLog     ``train_log.csv``
    report       ``report.txt``
    checkpoints  ``checkpoints/epoch_<NNNN>.pt``
    ===========  ===================================
    """

    def __init__(self, config, stack, runDir, datasetDir=None):
        self.config = config
        self.stack = stack
        self.runDir = runDir
        self.datasetDir = datasetDir
        self.log = []
        self.epochLog = []
        self.epoch = 0
        self.paths = dict(
            config=os.path.join(runDir, "config.json"),
            manifest=os.path.join(runDir, "manifest.json"),
            trainLog=os.path.join(runDir, "train_log.csv"),
            report=os.path.join(runDir, "report.txt"),
            checkpoints=os.path.join(runDir, "checkpoints"),
        )
        if config.phantom.L != stack.L:
            raise DimensionError("config L=%d does not match dataset L=%d" % (config.phantom.L, stack.L))
        train = config.train
        if len(stack) < 2:
            raise ParameterError("training needs at least 2 images")
        self.device = torch.device(getAttrWithFallback(train, "device"))
        self.snrDbEst = getAttrWithFallback(train, "snrDbEst", dict(stack=stack))
        self.cppBatchSize = getAttrWithFallback(train, "cppBatchSize")
        self.tMax = config.dataset.tMax
        # model
        torch.manual_seed(train.seed)
        self.model = HetEMModel.fromConfig(config.model, stack.L, apix=stack.apix).to(self.device)
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=train.lr)
        self.buffer = PosteriorBuffer()
        self.tracker = CleanVarianceTracker()
        # data
        dtype = torch.get_default_dtype()
        images = standardizeImages(torch.from_numpy(stack.images).to(torch.float64))
        self.images = images.to(dtype=dtype, device=self.device)
        self.ctfs = torch.from_numpy(stack.ctfs).to(dtype=dtype, device=self.device)
        self.fixedNoiseVariance = None
        if not train.flags.asnEnabled:
            subset = images[:train.cornerImages].numpy()
            self.fixedNoiseVariance = float(np.mean(estimateCornerNoiseVariance(subset)))
            self.log.append("fixed CPP noise variance %.4g from %d images" % (self.fixedNoiseVariance, len(subset)))

    # -----
    # Steps
    # -----

    def isConformationFrozen(self, epoch):
        train = self.config.train
        return train.flags.fchEnabled and epoch < train.fchEpochs

    def _applyGradients(self, loss):
        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.config.train.gradClip)
        self.optimizer.step()

    def _rotations(self, out, epoch):
        try:
            return out.rotations()
        except DegeneracyError as error:
            raise TrainingDivergenceError("rotation head output is degenerate: %s" % error, epoch=epoch)

    def reconstructionStep(self, index, rng, epoch):
        """
        One variational reconstruction step on the images at *index*.
        Returns the unweighted loss terms.
        """
        train = self.config.train
        frozen = self.isConformationFrozen(epoch)
        index = torch.from_numpy(index).to(self.device)
        images = self.images[index]
        ctf = self.ctfs[index]
        out = self.model.encode(images, freezeConformation=frozen)
        out.checkFinite()
        R = self._rotations(out, epoch)
        eta = torch.from_numpy(rng.standard_normal(out.mu.shape)).to(out.mu)
        if frozen:
            z = eta
        else:
            z = reparameterize(out.mu, out.logvar, eta=eta)
        pred = self.model.renderHartley(R, out.t, z, ctf)
        target = imagesToHartley(images)
        sym = lossSym(pred, target)
        kl = lossKl(out.mu, out.logvar)
        trans = lossTranslation(out.t)
        # KL is reported but not optimized while the head is frozen
        weightedKl = 0.0 if frozen else kl
        total = lossReconTotal(sym, weightedKl, trans, train.lambdas.lambdaZ, train.lambdas.lambdaT)
        _finite(total, "reconstruction loss", epoch)
        self._applyGradients(total)
        self.buffer.update(out.mu, out.logvar)
        return dict(loss_sym=float(sym), loss_kl=float(kl), loss_trans=float(trans))

    def cppStep(self, rng, epoch):
        """
        One conditional pose prediction step. Only the encoder
        receives gradients.
        """
        train = self.config.train
        flags = train.flags
        usePosterior = flags.pdsEnabled and not self.isConformationFrozen(epoch)
        images, rSyn, tSyn, noiseVariance = cppBatch(
            self.model, self.buffer, self.tracker, rng, self.cppBatchSize, self.tMax,
            ctfPool=self.ctfs,
            snrDb=self.snrDbEst,
            usePosterior=usePosterior,
            adaptiveNoise=flags.asnEnabled,
            fixedNoiseVariance=self.fixedNoiseVariance,
        )
        out = self.model.encode(images, freezeConformation=True)
        out.checkFinite()
        rPred = self._rotations(out, epoch)
        rotation, translation = lossCppParts(rSyn, rPred, tSyn, out.t)
        total = train.lambdas.lambdaP * (rotation + translation)
        _finite(total, "pose prediction loss", epoch)
        self._applyGradients(total)
        return dict(loss_cpp_rot=float(rotation), loss_cpp_trans=float(translation), cpp_noise_var=noiseVariance)

    def batches(self, rng):
        n = len(self.stack)
        order = rng.permutation(n)
        size = self.config.train.batchSize
        batches = [order[start:start + size] for start in range(0, n, size)]
        # batch norm needs two samples
        if len(batches) > 1 and len(batches[-1]) < 2:
            batches.pop()
        return batches

    def trainEpoch(self, epoch):
        """
        Train one epoch and return its log row.
        """
        train = self.config.train
        rng = np.random.default_rng([train.seed, epoch])
        self.model.train()
        started = time.perf_counter()
        sums = {}
        counts = {}
        for index in self.batches(rng):
            parts = self.reconstructionStep(index, rng, epoch)
            if train.flags.cppEnabled:
                parts.update(self.cppStep(rng, epoch))
            for key, value in parts.items():
                sums[key] = sums.get(key, 0.0) + value
                counts[key] = counts.get(key, 0) + 1
        row = dict(epoch=epoch)
        for key in logColumns[1:-1] + ["cpp_noise_var"]:
            row[key] = sums[key] / counts[key] if key in sums else None
        row["wall_seconds"] = time.perf_counter() - started
        row["snr_db_est"] = self.snrDbEst
        row["conformation_frozen"] = self.isConformationFrozen(epoch)
        return row

    # -----------
    # Persistence
    # -----------

    def state(self):
        return dict(
            config=self.config.model_dump(),
            L=self.stack.L,
            apix=self.stack.apix,
            epoch=self.epoch,
            model=self.model.state_dict(),
            optimizer=self.optimizer.state_dict(),
            buffer=self.buffer.state(),
            tracker=self.tracker.state(),
            log=list(self.epochLog),
            snrDbEst=self.snrDbEst,
        )

    def saveCheckpoint(self):
        return saveCheckpoint(checkpointPath(self.runDir, self.epoch), self.state())

    def resume(self, path):
        """
        Restore the state saved in the checkpoint at *path*.
        """
        archive = loadCheckpoint(path, device=self.device)
        saved = archive["config"]
        if saved["model"] != self.config.model.model_dump() or archive["L"] != self.stack.L:
            raise ParameterError("%s was written for a different model configuration" % path)
        self.model.load_state_dict(archive["model"])
        self.optimizer.load_state_dict(archive["optimizer"])
        self.buffer.loadState(archive["buffer"], device=self.device)
        self.tracker.loadState(archive["tracker"])
        self.epochLog = list(archive["log"])
        self.epoch = int(archive["epoch"])
        self.log.append("resumed from %s after epoch %d" % (path, self.epoch))
        logger.info("resumed from %s (%d epochs done)", path, self.epoch)

    def writeTrainLog(self, path):
        frame = pd.DataFrame([{key: row.get(key) for key in logColumns} for row in self.epochLog], columns=logColumns)
        with atomicWrite(path) as tempPath:
            frame.to_csv(tempPath, index=False, na_rep="", lineterminator="\n")

    def writeManifest(self, path):
        from hetem import __version__
        train = self.config.train
        manifest = dict(
            format="hetem-run",
            version=__version__,
            dataset=self.datasetDir,
            nImages=len(self.stack),
            L=self.stack.L,
            apix=self.stack.apix,
            epochsCompleted=self.epoch,
            resolved=dict(
                snrDbEst=self.snrDbEst,
                cppBatchSize=self.cppBatchSize,
                device=str(self.device),
                rffScale=float(self.model.decoder.rff.scale),
                fixedNoiseVariance=self.fixedNoiseVariance,
            ),
            lossDomain=train.lossDomain,
            hyperparameters=self.config.model_dump(mode="json"),
        )
        writeJson(path, manifest)
        return manifest

    # ----
    # Loop
    # ----

    def run(self, resume=True):
        """
        Train up to ``train.epochs`` epochs, checkpointing after each.
        Returns ``(model, epochLog)``.
        """
        from hetem.runConfig import serializeConfig
        os.makedirs(self.paths["checkpoints"], exist_ok=True)
        if resume:
            path = latestCheckpoint(self.runDir)
            if path is not None:
                self.resume(path)
        writeText(self.paths["config"], serializeConfig(self.config) + "\n")
        self.writeManifest(self.paths["manifest"])
        train = self.config.train
        while self.epoch < train.epochs:
            epoch = self.epoch
            try:
                row = self.trainEpoch(epoch)
            except TrainingDivergenceError as error:
                error.epoch = epoch
                error.checkpointPath = latestCheckpoint(self.runDir)
                self.log.append("diverged in epoch %d: %s" % (epoch, error))
                writeText(self.paths["report"], "\n".join(self.log) + "\n")
                raise
            self.epochLog.append(row)
            self.epoch = epoch + 1
            self.saveCheckpoint()
            self.writeTrainLog(self.paths["trainLog"])
            message = "epoch %d: sym %.5g kl %.4g trans %.4g" % (epoch, row["loss_sym"], row["loss_kl"], row["loss_trans"])
            if row["loss_cpp_rot"] is not None:
                message += " cpp rot %.4g trans %.4g" % (row["loss_cpp_rot"], row["loss_cpp_trans"])
            logger.info(message)
            self.log.append(message)
        self.writeTrainLog(self.paths["trainLog"])
        self.writeManifest(self.paths["manifest"])
        writeText(self.paths["report"], "\n".join(self.log) + "\n")
        self.model.eval()
        return self.model, self.epochLog


def runTraining(stack, config, runDir, resume=True, datasetDir=None):
    """
    Train on *stack* with the :class:`hetem.runConfig.RunConfig`
    *config*, writing checkpoints and logs into *runDir*. Returns
    ``(model, epochLog)``.
    """
    trainer = HetEMTrainer(config, stack, runDir, datasetDir=datasetDir)
    return trainer.run(resume=resume)
