"""
Synthetic data: phantom volumes and particle stacks generated with the
image formation model.
"""

from dataclasses import dataclass, field

import numpy as np

from hetem.errors import DimensionError, ParameterError
from hetem.numerics import Pose
from hetem.numerics.ctf import CTFParams, ctfFieldNames


@dataclass
class ParticleStack(object):

    """
    Images plus per-image metadata.

    ===============  ===========================================
    images           ``n x L x L`` float32
    rotations        ``n x 3 x 3``
    translations     ``n x 2`` (pixels)
    ctfs             ``n x 7`` in :data:`ctfFieldNames` order
    labels           ``n`` ints, or ``None`` for external data
    apix             pixel size in Å
    clean            optional noise-free images (not written to disk)
    ===============  ===========================================
    """

    images: np.ndarray
    rotations: np.ndarray
    translations: np.ndarray
    ctfs: np.ndarray
    labels: np.ndarray = None
    apix: float = 1.0
    clean: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float32)
        n = len(self.images)
        if self.images.ndim != 3 or self.images.shape[1] != self.images.shape[2]:
            raise DimensionError("images must be n x L x L, got %r" % (self.images.shape,))
        self.rotations = np.asarray(self.rotations, dtype=np.float64).reshape(n, 3, 3)
        self.translations = np.asarray(self.translations, dtype=np.float64).reshape(n, 2)
        self.ctfs = np.asarray(self.ctfs, dtype=np.float64).reshape(n, len(ctfFieldNames))
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise DimensionError("expected %d labels, got %r" % (n, self.labels.shape))
            if self.labels.min() < 0:
                raise ParameterError("class labels must not be negative")
        if not self.apix > 0:
            raise ParameterError("apix must be positive, got %r" % self.apix)

    def __len__(self):
        return len(self.images)

    @property
    def L(self):
        return self.images.shape[-1]

    @property
    def nClasses(self):
        if self.labels is None:
            return None
        return int(self.labels.max()) + 1

    def pose(self, index):
        return Pose(self.rotations[index], self.translations[index])

    def ctf(self, index):
        return CTFParams.fromArray(self.ctfs[index])

    def classCounts(self):
        if self.labels is None:
            return None
        return np.bincount(self.labels).tolist()
