"""
The deterministic numerical kernel: grids, centered transforms,
Fourier slicing, the CTF, rotations and random Fourier features.

Grid convention, shared by every module in the package:

- arrays are indexed ``[z, y, x]`` (volumes) and ``[y, x]`` (images)
- coordinate vectors are ordered ``(x, y, z)``
- real-space origin and zero frequency both sit at index ``L // 2``
- frequencies are in cycles/pixel, ``k = (i - L/2) / L``
"""

from dataclasses import dataclass

import numpy as np
import torch

from hetem.errors import DimensionError, ParameterError


def asTensor(value, dtype=None):
    """
    Convert *value* to a tensor without copying when it already is one.
    """
    if isinstance(value, torch.Tensor):
        if dtype is not None and value.dtype != dtype:
            return value.to(dtype)
        return value
    value = np.asarray(value)
    tensor = torch.from_numpy(np.ascontiguousarray(value))
    if dtype is not None:
        tensor = tensor.to(dtype)
    return tensor


def realDtypeFor(tensor):
    """
    The real dtype matching *tensor* (float64 for complex128 and so on).
    """
    if tensor.is_complex():
        return torch.float64 if tensor.dtype == torch.complex128 else torch.float32
    if tensor.dtype in (torch.float64, torch.float32, torch.float16):
        return tensor.dtype
    return torch.float64


def checkEvenSquare(array, ndim=2):
    """
    Raise a :class:`DimensionError` unless the trailing *ndim* axes
    of *array* all have the same, even length. Return that length.
    """
    shape = tuple(array.shape)
    if len(shape) < ndim:
        raise DimensionError("expected at least %d dimensions, got shape %r" % (ndim, shape))
    edges = shape[-ndim:]
    L = edges[0]
    if any(e != L for e in edges):
        raise DimensionError("expected a square/cubic grid, got shape %r" % (shape,))
    if L % 2:
        raise DimensionError("grid edge must be even, got %d" % L)
    return L


def frequencies1d(L, dtype=torch.float64, device=None):
    """
    Centered frequency axis in cycles/pixel, zero at index ``L // 2``.

    >>> frequencies1d(4).tolist()
    [-0.5, -0.25, 0.0, 0.25]
    """
    return (torch.arange(L, dtype=dtype, device=device) - L // 2) / L


def planeGrid(L, dtype=torch.float64, device=None):
    """
    The ``L*L x 3`` central plane ``[k_x, k_y, 0]`` in row-major
    ``(y, x)`` order.
    """
    k = frequencies1d(L, dtype=dtype, device=device)
    ky, kx = torch.meshgrid(k, k, indexing="ij")
    kz = torch.zeros_like(kx)
    return torch.stack([kx.reshape(-1), ky.reshape(-1), kz.reshape(-1)], dim=-1)


def volumeGrid(L, dtype=torch.float64, device=None):
    """
    The ``L**3 x 3`` frequency grid in ``(x, y, z)`` order, flattened
    in ``[z, y, x]`` index order.
    """
    k = frequencies1d(L, dtype=dtype, device=device)
    kz, ky, kx = torch.meshgrid(k, k, k, indexing="ij")
    return torch.stack([kx.reshape(-1), ky.reshape(-1), kz.reshape(-1)], dim=-1)


# -----
# Types
# -----

@dataclass
class Volume(object):

    """
    A real cubic voxel grid ``data[z, y, x]`` with pixel size *apix* (Å).
    """

    data: torch.Tensor
    apix: float = 1.0

    def __post_init__(self):
        self.data = asTensor(self.data)
        L = checkEvenSquare(self.data, ndim=3)
        if self.data.dim() != 3:
            raise DimensionError("a volume has exactly three axes, got %d" % self.data.dim())
        if L < 16:
            raise DimensionError("volume edge must be at least 16, got %d" % L)
        if self.data.is_complex():
            raise ParameterError("volume data must be real")
        if not bool(torch.isfinite(self.data).all()):
            raise ParameterError("volume contains non-finite values")
        if not self.apix > 0:
            raise ParameterError("apix must be positive, got %r" % self.apix)

    @property
    def L(self):
        return self.data.shape[0]


@dataclass
class FourierVolume(object):

    """
    The centered 3D Fourier transform of a volume, zero frequency at
    ``data[L//2, L//2, L//2]``.
    """

    data: torch.Tensor
    apix: float = 1.0

    def __post_init__(self):
        self.data = asTensor(self.data)
        checkEvenSquare(self.data, ndim=3)
        if not self.data.is_complex():
            self.data = self.data.to(torch.complex128)

    @property
    def L(self):
        return self.data.shape[0]

    @classmethod
    def fromVolume(cls, volume):
        """
        Transform a real :class:`Volume`.
        """
        from hetem.numerics.fourierTools import fftnCentered
        return cls(fftnCentered(volume.data), apix=volume.apix)


@dataclass
class Pose(object):

    """
    A rotation *R* (3x3) and an in-plane translation *t* (pixels).
    """

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(2)

    def validate(self, tMax=None, tol=1e-6):
        """
        Raise a :class:`ParameterError` if the pose breaks its invariants.
        """
        from hetem.numerics.rotations import isRotation
        if not isRotation(self.R, tol=tol):
            raise ParameterError("R is not a proper rotation")
        if tMax is not None and np.any(np.abs(self.t) > tMax):
            raise ParameterError("translation %r exceeds t_max %r" % (self.t.tolist(), tMax))
