"""
The contrast transfer function, weak-phase form:

    C(k) = -[sqrt(1 - w^2) sin(gamma) + w cos(gamma)]
    gamma = pi lambda d(theta) |k|^2 - (pi/2) cs lambda^3 |k|^4 + phase

with the astigmatic defocus ``d(theta) = (du + dv + (du - dv) cos 2(theta - astig)) / 2``.
Frequencies here are physical (1/Å); the grid frequency in
cycles/pixel is divided by the pixel size.

Parameters are carried in :class:`CTFParams` with these units:

===============  =======================
defocusU         Å
defocusV         Å
astigAngle       radians
voltage          kV
cs               mm
ampContrast      dimensionless, [0, 1)
phaseShift       radians
===============  =======================
"""

import math
from dataclasses import astuple, dataclass, fields

import numpy as np
import torch

from hetem.errors import ParameterError
from hetem.numerics import asTensor, frequencies1d


@dataclass(frozen=True)
class CTFParams(object):

    defocusU: float
    defocusV: float
    astigAngle: float = 0.0
    voltage: float = 300.0
    cs: float = 2.7
    ampContrast: float = 0.1
    phaseShift: float = 0.0

    def validate(self):
        """
        Raise a :class:`ParameterError` if a value is out of range.
        """
        values = astuple(self)
        if not all(math.isfinite(v) for v in values):
            raise ParameterError("CTF parameters must be finite: %r" % (values,))
        if self.defocusU <= 0 or self.defocusV <= 0:
            raise ParameterError("defocus must be positive, got %r/%r" % (self.defocusU, self.defocusV))
        if self.voltage <= 0:
            raise ParameterError("voltage must be positive, got %r" % self.voltage)
        if not 0 <= self.ampContrast < 1:
            raise ParameterError("amplitude contrast must be in [0, 1), got %r" % self.ampContrast)
        return self

    def asArray(self):
        return np.asarray(astuple(self), dtype=np.float64)

    @classmethod
    def fromArray(cls, values):
        return cls(*[float(v) for v in values])


ctfFieldNames = tuple(f.name for f in fields(CTFParams))


def electronWavelength(voltage):
    """
    Relativistic electron wavelength in Å for an accelerating
    *voltage* in kV.

    >>> round(electronWavelength(300.0), 5)
    0.01969
    """
    if voltage <= 0:
        raise ParameterError("voltage must be positive, got %r" % voltage)
    volts = voltage * 1e3
    return 12.2643247 / math.sqrt(volts * (1 + 0.978466e-6 * volts))


def _radialGrid(L, apix, dtype, device):
    k = frequencies1d(L, dtype=dtype, device=device) / apix
    ky, kx = torch.meshgrid(k, k, indexing="ij")
    return kx * kx + ky * ky, torch.atan2(ky, kx)


def ctfEvalBatch(params, L, apix, dtype=torch.float64, device=None):
    """
    Evaluate ``n`` CTFs at once. *params* is an ``n x 7`` array in
    :data:`ctfFieldNames` order. Returns ``n x L x L``.
    """
    params = asTensor(params, dtype=dtype)
    if device is not None:
        params = params.to(device)
    if params.dim() != 2 or params.shape[-1] != len(ctfFieldNames):
        raise ParameterError("expected an n x %d parameter array, got %r" % (len(ctfFieldNames), tuple(params.shape)))
    if not apix > 0:
        raise ParameterError("apix must be positive, got %r" % apix)
    if bool((params[:, 3] <= 0).any()):
        raise ParameterError("voltage must be positive")
    k2, theta = _radialGrid(L, apix, dtype, params.device)
    p = [params[:, i, None, None] for i in range(len(ctfFieldNames))]
    du, dv, astig, voltage, cs, w, phase = p
    volts = voltage * 1e3
    lam = 12.2643247 / torch.sqrt(volts * (1 + 0.978466e-6 * volts))
    # mm -> Å
    csA = cs * 1e7
    defocus = 0.5 * (du + dv + (du - dv) * torch.cos(2 * (theta - astig)))
    gamma = math.pi * lam * defocus * k2 - 0.5 * math.pi * csA * lam ** 3 * k2 * k2 + phase
    return -(torch.sqrt(1 - w * w) * torch.sin(gamma) + w * torch.cos(gamma))


def ctfEval(params, L, apix, dtype=torch.float64):
    """
    Evaluate one :class:`CTFParams` on the centered ``L x L`` grid.

    >>> c = ctfEval(CTFParams(15000.0, 15000.0), 16, 1.0)
    >>> round(float(c[8, 8]), 6)
    -0.1
    """
    params.validate()
    return ctfEvalBatch(params.asArray()[None], L, apix, dtype=dtype)[0]


def defaultCtfPool(rng, n=100):
    """
    Draw *n* typical microscope settings: ``du = dv`` uniform in
    [10000, 20000] Å, 300 kV, cs 2.7 mm, amplitude contrast 0.1.
    """
    defocus = rng.uniform(10000.0, 20000.0, size=n)
    return [CTFParams(float(d), float(d), 0.0, 300.0, 2.7, 0.1, 0.0) for d in defocus]
