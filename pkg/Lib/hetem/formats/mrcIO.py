"""
MRC2014 volumes and MRCS image stacks.

Only mode 2 (little-endian float32) is written or accepted. The fixed
header is checked before :mod:`mrcfile` opens the file so that problems
are reported with the byte offset where they were found:

======  ===============================
0       nx, ny, nz (int32)
12      mode (int32, must be 2)
92      nsymbt, extended header length
212     machine stamp (``0x44`` first)
1024    start of extended header / data
======  ===============================
"""

import logging
import os

import mrcfile
import numpy as np
import torch

from hetem.errors import DimensionError, MrcParseError
from hetem.formats import atomicWrite
from hetem.numerics import Volume

logger = logging.getLogger(__name__)

headerSize = 1024


def checkMrcHeader(path):
    """
    Validate the fixed header of *path* and the payload length.
    Returns ``(nx, ny, nz)``.
    """
    fileSize = os.path.getsize(path)
    if fileSize < headerSize:
        raise MrcParseError(path, fileSize, "file is shorter than the %d byte header" % headerSize)
    with open(path, "rb") as f:
        header = f.read(headerSize)
    stamp = header[212]
    if stamp != 0x44:
        raise MrcParseError(path, 212, "machine stamp 0x%02x is not little-endian" % stamp)
    words = np.frombuffer(header, dtype="<i4", count=24)
    nx, ny, nz, mode = [int(v) for v in words[:4]]
    if min(nx, ny, nz) < 1:
        raise MrcParseError(path, 0, "bad dimensions %d x %d x %d" % (nx, ny, nz))
    if mode != 2:
        raise MrcParseError(path, 12, "mode %d is not supported (expected 2, float32)" % mode)
    nsymbt = int(words[23])
    if nsymbt < 0:
        raise MrcParseError(path, 92, "negative extended header length %d" % nsymbt)
    expected = headerSize + nsymbt + nx * ny * nz * 4
    if fileSize != expected:
        offset = min(fileSize, expected)
        raise MrcParseError(path, offset, "payload is %d bytes, header implies %d" % (fileSize - headerSize - nsymbt, nx * ny * nz * 4))
    return nx, ny, nz


def _read(path):
    checkMrcHeader(path)
    with mrcfile.open(path, mode="r", permissive=False) as mrc:
        data = np.array(mrc.data, dtype=np.float32)
        apix = float(mrc.voxel_size.x)
    if not apix > 0:
        apix = 1.0
    return data, apix


def _write(path, data, apix, stack=False):
    data = np.ascontiguousarray(data, dtype="<f4")
    with atomicWrite(path) as tempPath:
        with mrcfile.new(tempPath, overwrite=True) as mrc:
            mrc.set_data(data)
            if stack:
                mrc.set_image_stack()
            mrc.voxel_size = apix
            mrc.update_header_stats()
    logger.debug("wrote %s %r", path, data.shape)


def _toNumpy(data):
    if isinstance(data, Volume):
        data = data.data
    if isinstance(data, torch.Tensor):
        data = data.detach().cpu().numpy()
    return np.asarray(data)


# -------
# Volumes
# -------

def mrcWrite(path, volume, apix=None):
    """
    Write a :class:`Volume` (or an ``L x L x L`` array) to *path*.
    """
    if apix is None:
        apix = volume.apix if isinstance(volume, Volume) else 1.0
    data = _toNumpy(volume)
    if data.ndim != 3:
        raise DimensionError("a volume has three axes, got shape %r" % (data.shape,))
    _write(path, data, apix)


def mrcReadArray(path):
    """
    Read a volume as ``(float32 array, apix)``.
    """
    data, apix = _read(path)
    if data.ndim != 3:
        raise MrcParseError(path, 8, "expected a volume, got shape %r" % (data.shape,))
    return data, apix


def mrcRead(path):
    """
    Read a volume file into a :class:`Volume` (float32 data).
    """
    data, apix = mrcReadArray(path)
    return Volume(torch.from_numpy(data), apix=apix)


# ------
# Stacks
# ------

def mrcsWrite(path, images, apix=1.0):
    """
    Write an ``n x L x L`` image stack.
    """
    data = _toNumpy(images)
    if data.ndim != 3:
        raise DimensionError("an image stack has three axes, got shape %r" % (data.shape,))
    _write(path, data, apix, stack=True)


def mrcsRead(path):
    """
    Read an image stack as ``(n x L x L float32 array, apix)``.
    A single image is returned as a stack of one.
    """
    data, apix = _read(path)
    if data.ndim == 2:
        data = data[None]
    return data, apix
