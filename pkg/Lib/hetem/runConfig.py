"""
The run configuration: one JSON document with a section per stage.

=========  ===============================================
phantom    ground-truth volumes (:class:`PhantomConfig`)
dataset    particle stack generation (:class:`DatasetConfig`)
model      network sizes (:class:`ModelConfig`)
train      optimization (:class:`TrainConfig`)
analysis   evaluation options (:class:`AnalysisConfig`)
outputDir  where the command writes its results
=========  ===============================================

Unknown keys are rejected. Entries that may be ``null`` are resolved
through :mod:`hetem.configData` when they are needed.
"""

import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from hetem.configData import getAttrWithFallback
from hetem.errors import ParameterError
from hetem.numerics.ctf import CTFParams
from hetem.simulator.phantoms import checkMotionAngles


class _Section(BaseModel):

    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants", validate_assignment=True)


class PhantomConfig(_Section):

    kind: Literal["bimodal-blobs", "arm-motion"] = "bimodal-blobs"
    L: int = 32
    apix: float = Field(default=6.0, gt=0)
    nClasses: Optional[int] = None
    motionAngles: Optional[List[float]] = None

    @field_validator("L")
    @classmethod
    def _checkL(cls, value):
        if value < 16 or value % 2:
            raise ValueError("L must be even and at least 16, got %d" % value)
        return value

    @model_validator(mode="after")
    def _checkClasses(self):
        if self.kind == "arm-motion":
            try:
                angles = checkMotionAngles(getAttrWithFallback(self, "motionAngles"))
            except ParameterError as error:
                raise ValueError(str(error))
            expected = len(angles)
        else:
            expected = 2
        if self.nClasses is not None and self.nClasses != expected:
            raise ValueError("%s needs nClasses=%d, got %d" % (self.kind, expected, self.nClasses))
        return self


class DatasetConfig(_Section):

    nImages: int = Field(default=2000, gt=0)
    snrDb: float = -10.0
    tMax: float = Field(default=8.0, ge=0)
    ctfPool: Optional[List[CTFParams]] = None
    seed: int = 0
    classBalance: Literal["equal"] = "equal"

    @field_validator("snrDb")
    @classmethod
    def _checkSnr(cls, value):
        # +inf disables noise
        if math.isnan(value) or value == -math.inf:
            raise ValueError("snrDb must be a number or +Infinity, got %r" % value)
        return value

    @field_validator("ctfPool")
    @classmethod
    def _checkPool(cls, value):
        if value is None:
            return value
        if not value:
            raise ValueError("ctfPool must not be empty")
        for params in value:
            try:
                params.validate()
            except ParameterError as error:
                raise ValueError(str(error))
        return value


class ModelConfig(_Section):

    d: int = Field(default=8, ge=1)
    hidden: int = Field(default=256, ge=1)
    decoderLayers: int = Field(default=3, ge=1)
    rffM: int = Field(default=128, ge=1)
    rffScale: Optional[float] = Field(default=None, gt=0)
    encoderTrunk: Literal["resnet18"] = "resnet18"


class TrainFlags(_Section):

    cppEnabled: bool = True
    fchEnabled: bool = True
    pdsEnabled: bool = True
    asnEnabled: bool = True


class LossWeights(_Section):

    lambdaZ: float = Field(default=1e-4, gt=0)
    lambdaT: float = Field(default=1e-3, gt=0)
    lambdaP: float = Field(default=0.1, gt=0)


class TrainConfig(_Section):

    lr: float = Field(default=1.5e-4, gt=0)
    batchSize: int = Field(default=64, ge=2)
    epochs: int = Field(default=200, ge=1)
    fchEpochs: int = Field(default=50, ge=0)
    lambdas: LossWeights = Field(default_factory=LossWeights)
    snrDbEst: Optional[float] = None
    flags: TrainFlags = Field(default_factory=TrainFlags)
    seed: int = 0
    cppBatchSize: Optional[int] = Field(default=None, ge=2)
    gradClip: float = Field(default=10.0, gt=0)
    cornerImages: int = Field(default=1000, ge=1)
    device: Optional[str] = None
    lossDomain: Literal["hartley"] = "hartley"

    @model_validator(mode="after")
    def _checkSchedule(self):
        if self.fchEpochs > self.epochs:
            raise ValueError("fchEpochs (%d) must not exceed epochs (%d)" % (self.fchEpochs, self.epochs))
        return self


class AnalysisConfig(_Section):

    kmeansRestarts: int = Field(default=10, ge=1)
    kmeansSeed: int = 0
    fscCutoff: float = Field(default=0.5, gt=0, lt=1)
    kdeGridSize: int = Field(default=512, ge=16)
    traversalValues: List[float] = Field(default_factory=lambda: [-1.0, 0.0, 1.0], min_length=1)


class RunConfig(_Section):

    phantom: PhantomConfig = Field(default_factory=PhantomConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    outputDir: Optional[str] = None

    @model_validator(mode="after")
    def _checkSplit(self):
        nClasses = getAttrWithFallback(self.phantom, "nClasses")
        if self.dataset.nImages % nClasses:
            raise ValueError("nImages (%d) is not divisible by the class count (%d)" % (self.dataset.nImages, nClasses))
        return self


# -----
# Tools
# -----

def _wrapValidation(error):
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"])
    message = first["msg"]
    if location:
        message = "%s: %s" % (location, message)
    return ParameterError("invalid configuration: %s" % message)


def parseConfig(text):
    """
    Parse JSON *text* into a :class:`RunConfig`.
    """
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as error:
        raise _wrapValidation(error)


def serializeConfig(config):
    """
    The JSON text for *config*. Infinite SNR is written as ``Infinity``.
    """
    return config.model_dump_json(indent=2)


def loadConfig(path=None):
    """
    Read a config file. With no *path* the defaults are returned.
    """
    if path is None:
        return RunConfig()
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parseConfig(text)


def updateConfig(config, **sections):
    """
    Return a validated copy of *config* with values replaced.
    *sections* maps a section name to a dict of new values, or a
    top-level name to its value.

    >>> cfg = updateConfig(RunConfig(), train=dict(epochs=3, fchEpochs=1))
    >>> cfg.train.epochs, cfg.train.fchEpochs
    (3, 1)
    """
    data = config.model_dump()
    for name, value in sections.items():
        if isinstance(value, dict) and isinstance(data.get(name), dict):
            _deepUpdate(data[name], value)
        else:
            data[name] = value
    try:
        return RunConfig.model_validate(data)
    except ValidationError as error:
        raise _wrapValidation(error)


def _deepUpdate(target, values):
    for key, value in values.items():
        if isinstance(value, dict) and isinstance(target.get(key), dict):
            _deepUpdate(target[key], value)
        else:
            target[key] = value
