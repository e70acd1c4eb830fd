"""
Centered Fourier and Hartley transforms, Fourier slicing and
translation operators.

All transforms act on the trailing axes, so batches of images
(``n x L x L``) are handled the same way as single images. Forward
transforms are unnormalized; inverse transforms carry the ``1/N``.

The Hartley transform used here is ``H = Re F - Im F``. For a real
signal it is real, its own inverse up to ``1/N``, and it holds the
same information as the Fourier transform:

=========  =========================================
Re F(k)    ``(H(k) + H(-k)) / 2``
Im F(k)    ``(H(-k) - H(k)) / 2``
=========  =========================================
"""

import math

import numpy as np
import torch
from scipy import ndimage

from hetem.numerics import FourierVolume, Volume, asTensor, checkEvenSquare, frequencies1d, planeGrid, realDtypeFor


def _dims(ndim):
    return tuple(range(-ndim, 0))


# ------------------
# Centered Transforms
# ------------------

def fft2Centered(image):
    """
    2D FFT of *image* (or a stack of images) with zero frequency
    moved to index ``L // 2``.

    >>> import torch
    >>> X = fft2Centered(torch.full((4, 4), 2.0))
    >>> float(X[2, 2].real), float(X.abs().sum() - X[2, 2].abs())
    (32.0, 0.0)
    """
    image = asTensor(image)
    checkEvenSquare(image, ndim=2)
    dims = _dims(2)
    return torch.fft.fftshift(torch.fft.fft2(torch.fft.ifftshift(image, dim=dims), dim=dims), dim=dims)


def ifft2Centered(fimage):
    """
    Inverse of :func:`fft2Centered`. The result is complex; take
    ``.real`` when the input came from a real image.
    """
    fimage = asTensor(fimage)
    checkEvenSquare(fimage, ndim=2)
    dims = _dims(2)
    return torch.fft.fftshift(torch.fft.ifft2(torch.fft.ifftshift(fimage, dim=dims), dim=dims), dim=dims)


def fftnCentered(volume):
    """
    3D FFT of *volume* with zero frequency at ``[L//2, L//2, L//2]``.
    """
    volume = asTensor(volume)
    checkEvenSquare(volume, ndim=3)
    dims = _dims(3)
    return torch.fft.fftshift(torch.fft.fftn(torch.fft.ifftshift(volume, dim=dims), dim=dims), dim=dims)


def ifftnCentered(fvolume):
    """
    Inverse of :func:`fftnCentered`.
    """
    fvolume = asTensor(fvolume)
    checkEvenSquare(fvolume, ndim=3)
    dims = _dims(3)
    return torch.fft.fftshift(torch.fft.ifftn(torch.fft.ifftshift(fvolume, dim=dims), dim=dims), dim=dims)


def ht2Centered(image):
    """
    Centered 2D Hartley transform.
    """
    f = fft2Centered(image)
    return f.real - f.imag


def iht2Centered(himage):
    """
    Inverse of :func:`ht2Centered`.
    """
    L = himage.shape[-1]
    return ht2Centered(himage) / (L * L)


def htnCentered(volume):
    """
    Centered 3D Hartley transform.
    """
    f = fftnCentered(volume)
    return f.real - f.imag


def ihtnCentered(hvolume):
    """
    Inverse of :func:`htnCentered`.
    """
    L = hvolume.shape[-1]
    return htnCentered(hvolume) / (L ** 3)


def mirrorIndex(array, dims=(-2, -1)):
    """
    Map index ``i`` to ``(L - i) mod L`` along *dims*. On the centered
    grid this takes ``k`` to ``-k`` (the Nyquist index maps to itself).

    >>> import torch
    >>> mirrorIndex(torch.arange(4.0), dims=(-1,)).tolist()
    [0.0, 3.0, 2.0, 1.0]
    """
    dims = tuple(dims)
    return torch.roll(torch.flip(array, dims), shifts=(1,) * len(dims), dims=dims)


def flipHorizontal(image):
    """
    Mirror images about column ``L // 2``. The same index map mirrors
    ``k_x`` in the Fourier and Hartley domains, so the function can be
    applied in either domain.
    """
    return mirrorIndex(image, dims=(-1,))


# -------
# Slicing
# -------

def sliceCoords(R, L):
    """
    The central slice ``R^T [k_x, k_y, 0]`` for rotation(s) *R*.

    Returns an ``(..., L*L, 3)`` tensor of ``(x, y, z)`` frequency
    coordinates in cycles/pixel, ordered like a row-major ``L x L``
    image. Differentiable with respect to *R*.
    """
    R = asTensor(R)
    plane = planeGrid(L, dtype=R.dtype, device=R.device)
    # row vectors: (R^T p)^T = p^T R
    return torch.matmul(plane, R)


def trilinearSample(fvol, coords):
    """
    Trilinear interpolation of a centered grid at *coords*.

    *fvol* is a :class:`FourierVolume` or an ``L x L x L`` tensor (real
    or complex). *coords* is ``(..., N, 3)`` in cycles/pixel. Real and
    imaginary parts are interpolated independently. Points that fall
    outside the grid support return 0.
    """
    data = fvol.data if isinstance(fvol, FourierVolume) else asTensor(fvol)
    L = data.shape[-1]
    coords = asTensor(coords).to(realDtypeFor(data))
    g = coords * L + L // 2
    inside = ((g >= 0) & (g <= L - 1)).all(dim=-1)
    base = torch.floor(g).clamp(0, L - 2)
    frac = g - base
    base = base.long()
    flat = data.reshape(-1)
    x0, y0, z0 = base[..., 0], base[..., 1], base[..., 2]
    fx, fy, fz = frac[..., 0], frac[..., 1], frac[..., 2]
    result = None
    for dz in (0, 1):
        wz = fz if dz else 1 - fz
        for dy in (0, 1):
            wy = fy if dy else 1 - fy
            for dx in (0, 1):
                wx = fx if dx else 1 - fx
                index = ((z0 + dz) * L + (y0 + dy)) * L + (x0 + dx)
                value = flat[index.clamp(0, L ** 3 - 1)] * (wx * wy * wz)
                result = value if result is None else result + value
    return torch.where(inside, result, torch.zeros_like(result))


def extractSlice(fvol, R):
    """
    The ``L x L`` central slice of *fvol* for rotation *R*.
    """
    L = fvol.L if isinstance(fvol, FourierVolume) else fvol.shape[-1]
    values = trilinearSample(fvol, sliceCoords(R, L))
    return values.reshape(values.shape[:-1] + (L, L))


def projectRealSpace(volume, pose):
    """
    Brute-force projection: rotate *volume* by ``pose.R`` (trilinear
    resampling, ``V'(p) = V(R^T p)``), sum along z, then shift the
    image by ``pose.t`` with periodic boundaries.

    This is the real-space counterpart of slicing, kept as an oracle
    for the Fourier pipeline.
    """
    if not isinstance(volume, Volume):
        volume = Volume(volume)
    data = volume.data.detach().cpu().numpy().astype(np.float64)
    L = volume.L
    R = np.asarray(pose.R, dtype=np.float64)
    c = np.arange(L, dtype=np.float64) - L // 2
    z, y, x = np.meshgrid(c, c, c, indexing="ij")
    p = np.stack([x.ravel(), y.ravel(), z.ravel()])
    q = R.T @ p
    # map_coordinates wants [z, y, x] index order
    indices = np.stack([q[2], q[1], q[0]]) + L // 2
    rotated = ndimage.map_coordinates(data, indices, order=1, mode="constant", cval=0.0)
    image = rotated.reshape(L, L, L).sum(axis=0)
    t = np.asarray(pose.t, dtype=np.float64)
    if np.any(t != 0):
        image = ndimage.shift(image, (t[1], t[0]), order=1, mode="grid-wrap")
    return torch.from_numpy(image).to(volume.data.dtype)


# -----------
# Translation
# -----------

def _phase(t, L, dtype):
    t = asTensor(t, dtype=dtype)
    k = frequencies1d(L, dtype=dtype, device=t.device)
    ky, kx = torch.meshgrid(k, k, indexing="ij")
    tx = t[..., 0, None, None]
    ty = t[..., 1, None, None]
    return 2 * math.pi * (kx * tx + ky * ty)


def translationPhase(t, L):
    """
    ``exp(-2 pi i (k_x t_x + k_y t_y))`` on the centered grid for
    translation(s) *t* (pixels). Multiplying a centered Fourier image
    by it shifts the real image by *t*.
    """
    t = asTensor(t)
    dtype = t.dtype if t.is_floating_point() else torch.float64
    phi = _phase(t, L, dtype)
    return torch.complex(torch.cos(phi), -torch.sin(phi))


def hartleyTranslate(himage, t):
    """
    Shift Hartley-domain image(s) *himage* by *t* pixels:
    ``H'(k) = cos(phi) H(k) + sin(phi) H(-k)``, ``phi = 2 pi k.t``.
    Equivalent to :func:`translationPhase` applied in the Fourier domain.
    """
    L = himage.shape[-1]
    phi = _phase(t, L, himage.dtype)
    return torch.cos(phi) * himage + torch.sin(phi) * mirrorIndex(himage)
