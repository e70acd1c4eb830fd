"""
Rotation helpers: Haar-uniform sampling, the 6D continuous
representation used by the pose head, and quaternion conversion.
"""

import math

import numpy as np
import torch

from hetem.errors import DegeneracyError, ParameterError
from hetem.numerics import asTensor


def isRotation(R, tol=1e-6):
    """
    True when every matrix in *R* is orthonormal with determinant +1.

    >>> import numpy as np
    >>> isRotation(np.eye(3)), isRotation(np.diag([1.0, 1.0, -1.0]))
    (True, False)
    """
    R = np.asarray(R.detach().cpu().numpy() if isinstance(R, torch.Tensor) else R, dtype=np.float64)
    R = R.reshape(-1, 3, 3)
    identity = np.eye(3)
    orth = np.linalg.norm(np.swapaxes(R, -1, -2) @ R - identity, axis=(-2, -1))
    det = np.linalg.det(R)
    return bool(np.all(orth <= tol) and np.all(np.abs(det - 1) <= tol))


# -----------
# Quaternions
# -----------

def quaternionToMatrix(q):
    """
    Convert unit quaternion(s) ``(w, x, y, z)`` to rotation matrices.
    """
    q = np.asarray(q, dtype=np.float64)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - z * w)
    R[..., 0, 2] = 2 * (x * z + y * w)
    R[..., 1, 0] = 2 * (x * y + z * w)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - x * w)
    R[..., 2, 0] = 2 * (x * z - y * w)
    R[..., 2, 1] = 2 * (y * z + x * w)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def matrixToQuaternion(R):
    """
    Convert rotation matrices to unit quaternions ``(w, x, y, z)``
    with ``w >= 0``.
    """
    R = np.asarray(R, dtype=np.float64)
    flat = R.reshape(-1, 3, 3)
    result = np.empty((flat.shape[0], 4))
    for i, m in enumerate(flat):
        trace = m[0, 0] + m[1, 1] + m[2, 2]
        if trace > 0:
            s = 2 * math.sqrt(trace + 1)
            q = (0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = 2 * math.sqrt(1 + m[0, 0] - m[1, 1] - m[2, 2])
            q = ((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
        elif m[1, 1] > m[2, 2]:
            s = 2 * math.sqrt(1 + m[1, 1] - m[0, 0] - m[2, 2])
            q = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s)
        else:
            s = 2 * math.sqrt(1 + m[2, 2] - m[0, 0] - m[1, 1])
            q = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s)
        q = np.asarray(q)
        if q[0] < 0:
            q = -q
        result[i] = q / np.linalg.norm(q)
    return result.reshape(R.shape[:-2] + (4,))


# --------
# Sampling
# --------

def sampleRotationUniform(rng, n=None):
    """
    Draw Haar-uniform rotation(s) from the numpy Generator *rng*.
    Returns a 3x3 matrix, or ``n x 3 x 3`` when *n* is given.
    """
    size = 1 if n is None else n
    u = rng.random((size, 3))
    r1 = np.sqrt(1 - u[:, 0])
    r2 = np.sqrt(u[:, 0])
    t1 = 2 * np.pi * u[:, 1]
    t2 = 2 * np.pi * u[:, 2]
    q = np.stack([np.cos(t2) * r2, np.sin(t1) * r1, np.cos(t1) * r1, np.sin(t2) * r2], axis=-1)
    R = quaternionToMatrix(q)
    if n is None:
        return R[0]
    return R


def sampleTranslationUniform(rng, tMax, n=None):
    """
    Draw in-plane translation(s) uniformly from ``[-tMax, tMax]^2``.
    A *tMax* of 0 gives zero translations.
    """
    if tMax < 0:
        raise ParameterError("tMax must not be negative, got %r" % tMax)
    size = (2,) if n is None else (n, 2)
    if tMax == 0:
        return np.zeros(size)
    return rng.uniform(-tMax, tMax, size=size)


# ----------------
# 6D Representation
# ----------------

def rot6dToMatrix(v, tol=None):
    """
    Map ``(..., 6)`` vectors to rotations by Gram-Schmidt on the two
    3-vectors ``a = v[:3]``, ``b = v[3:]``. The columns of the result
    are ``e1 = a/|a|``, ``e2`` (``b`` with its ``e1`` part removed,
    normalized) and ``e3 = e1 x e2``.

    Raises :class:`DegeneracyError` when ``a`` is zero or when the part
    of ``b`` orthogonal to ``a`` is at most *tol* times ``|b|``. *tol*
    defaults to the square root of the machine epsilon of the input
    dtype, so float32 and float64 inputs are judged alike.

    >>> import torch
    >>> R = rot6dToMatrix(torch.tensor([2.0, 0, 0, 1.0, 3.0, 0]))
    >>> R.tolist()
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    """
    v = asTensor(v)
    if v.shape[-1] != 6:
        raise ParameterError("expected a trailing dimension of 6, got shape %r" % (tuple(v.shape),))
    if tol is None:
        tol = math.sqrt(torch.finfo(v.dtype).eps)
    a = v[..., :3]
    b = v[..., 3:]
    aNorm = a.norm(dim=-1, keepdim=True)
    with torch.no_grad():
        if bool((aNorm <= torch.finfo(v.dtype).tiny).any()):
            raise DegeneracyError("zero first vector in 6D rotation")
    e1 = a / aNorm
    residual = b - (e1 * b).sum(dim=-1, keepdim=True) * e1
    bNorm = residual.norm(dim=-1, keepdim=True)
    with torch.no_grad():
        # a zero b has a zero residual and fails here too
        if bool((bNorm <= tol * b.norm(dim=-1, keepdim=True)).any()):
            raise DegeneracyError("parallel vectors in 6D rotation")
    e2 = residual / bNorm
    e3 = torch.cross(e1, e2, dim=-1)
    return torch.stack([e1, e2, e3], dim=-1)


def matrixTo6d(R):
    """
    The 6D representation of rotation(s) *R*: its first two columns.
    """
    R = asTensor(R)
    return torch.cat([R[..., :, 0], R[..., :, 1]], dim=-1)
