"""
Training checkpoints: one ``torch.save`` archive per epoch, written
atomically under ``<run>/checkpoints/epoch_<NNNN>.pt``.

===============  =============================================
format           ``"hetem-checkpoint"``
version          archive layout version
config           the run config as a plain dict
L, apix          image geometry
epoch            number of completed epochs
model            model state dict (includes the RFF basis)
optimizer        optimizer state dict
buffer           posterior buffer state (or None)
tracker          clean-variance tracker state
log              per-epoch log rows so far
===============  =============================================
"""

import glob
import logging
import os
import re

import torch

from hetem.errors import HetEMError
from hetem.formats import atomicWrite

logger = logging.getLogger(__name__)

checkpointFormat = "hetem-checkpoint"
checkpointVersion = 1
checkpointPattern = re.compile(r"epoch_(\d+)\.pt$")


def checkpointPath(runDir, epoch):
    return os.path.join(runDir, "checkpoints", "epoch_%04d.pt" % epoch)


def saveCheckpoint(path, state):
    """
    Write *state* (see the module table) to *path*.
    """
    archive = dict(format=checkpointFormat, version=checkpointVersion)
    archive.update(state)
    with atomicWrite(path) as tempPath:
        torch.save(archive, tempPath)
    logger.debug("saved checkpoint %s", path)
    return path


def loadCheckpoint(path, device="cpu"):
    """
    Load and check an archive written by :func:`saveCheckpoint`.
    """
    archive = torch.load(path, map_location=device, weights_only=True)
    if not isinstance(archive, dict) or archive.get("format") != checkpointFormat:
        raise HetEMError("%s is not a hetem checkpoint" % path)
    if archive.get("version") != checkpointVersion:
        raise HetEMError("%s has unsupported checkpoint version %r" % (path, archive.get("version")))
    return archive


def listCheckpoints(runDir):
    """
    ``[(epoch, path), ...]`` sorted by epoch.
    """
    found = []
    for path in glob.glob(os.path.join(runDir, "checkpoints", "epoch_*.pt")):
        m = checkpointPattern.search(path)
        if m:
            found.append((int(m.group(1)), path))
    return sorted(found)


def latestCheckpoint(runDir):
    """
    The path of the newest checkpoint in *runDir*, or None.
    """
    found = listCheckpoints(runDir)
    if not found:
        return None
    return found[-1][1]


def loadModel(path, device="cpu"):
    """
    Rebuild the :class:`hetem.model.HetEMModel` stored in a checkpoint.
    Returns ``(model, archive)``.
    """
    from hetem.model import HetEMModel
    from hetem.runConfig import RunConfig
    archive = loadCheckpoint(path, device=device)
    config = RunConfig.model_validate(archive["config"])
    model = HetEMModel.fromConfig(config.model, archive["L"], apix=archive["apix"])
    model.load_state_dict(archive["model"])
    model.to(device)
    model.eval()
    return model, archive
