"""
Per-image metadata as CSV, one row per particle:

    index,rot00..rot22,tx,ty,defocus_u,defocus_v,astig_angle,
    voltage,cs,amp_contrast,phase_shift,class_label

Rotations are stored as the nine matrix entries (row-major). Floats are
written with the shortest text that round-trips exactly. The
``class_label`` column is optional on read.
"""

import logging

import numpy as np
import pandas as pd

from hetem.errors import DimensionError, ParameterError
from hetem.formats import atomicWrite
from hetem.formats.mrcIO import mrcsRead
from hetem.simulator import ParticleStack

logger = logging.getLogger(__name__)

rotationColumns = ["rot%d%d" % (i, j) for i in range(3) for j in range(3)]
translationColumns = ["tx", "ty"]
ctfColumns = ["defocus_u", "defocus_v", "astig_angle", "voltage", "cs", "amp_contrast", "phase_shift"]
labelColumn = "class_label"
metadataColumns = ["index"] + rotationColumns + translationColumns + ctfColumns + [labelColumn]


def metaCsvWrite(path, stack):
    """
    Write the metadata of the :class:`ParticleStack` *stack*.
    Without labels the ``class_label`` column is left out.
    """
    n = len(stack)
    frame = pd.DataFrame({"index": np.arange(n, dtype=np.int64)})
    rotations = stack.rotations.reshape(n, 9)
    for i, column in enumerate(rotationColumns):
        frame[column] = rotations[:, i]
    for i, column in enumerate(translationColumns):
        frame[column] = stack.translations[:, i]
    for i, column in enumerate(ctfColumns):
        frame[column] = stack.ctfs[:, i]
    if stack.labels is not None:
        frame[labelColumn] = stack.labels.astype(np.int64)
    with atomicWrite(path) as tempPath:
        frame.to_csv(tempPath, index=False, lineterminator="\n")


def metaCsvRead(path):
    """
    Read a metadata CSV. Returns a dict with ``rotations`` (n x 3 x 3),
    ``translations`` (n x 2), ``ctfs`` (n x 7) and ``labels`` (n ints,
    or None when the column is absent or empty). Partially blank
    labels are rejected.
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    required = ["index"] + rotationColumns + translationColumns + ctfColumns
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise ParameterError("%s: missing metadata columns %s" % (path, ", ".join(missing)))
    frame = frame.sort_values("index", kind="stable")
    index = frame["index"].to_numpy()
    if not np.array_equal(index, np.arange(len(frame))):
        raise ParameterError("%s: index column must run 0..n-1" % path)
    n = len(frame)
    labels = None
    if labelColumn in frame.columns:
        column = frame[labelColumn]
        blank = column.isna()
        if blank.all():
            logger.info("%s: class_label column is empty", path)
        elif blank.any():
            raise ParameterError("%s: class_label is blank in %d of %d rows" % (path, int(blank.sum()), n))
        else:
            labels = column.to_numpy(dtype=np.int64)
    return dict(
        rotations=frame[rotationColumns].to_numpy(dtype=np.float64).reshape(n, 3, 3),
        translations=frame[translationColumns].to_numpy(dtype=np.float64),
        ctfs=frame[ctfColumns].to_numpy(dtype=np.float64),
        labels=labels,
    )


def readParticleStack(stackPath, metaPath):
    """
    Load an image stack and its metadata into a :class:`ParticleStack`.
    """
    images, apix = mrcsRead(stackPath)
    meta = metaCsvRead(metaPath)
    if len(images) != len(meta["rotations"]):
        raise DimensionError("%s has %d images but %s has %d rows" % (stackPath, len(images), metaPath, len(meta["rotations"])))
    if meta["labels"] is None:
        logger.info("%s has no class labels", metaPath)
    return ParticleStack(images=images, apix=apix, **meta)
