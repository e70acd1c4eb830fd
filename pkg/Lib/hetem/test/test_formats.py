import os
import struct

import numpy as np
import pandas as pd
import pytest
import torch

from hetem.errors import DimensionError, MrcParseError, ParameterError
from hetem.formats import atomicWrite, readJson, writeJson
from hetem.formats.metadataIO import labelColumn, metaCsvRead, metaCsvWrite, metadataColumns, readParticleStack
from hetem.formats.mrcIO import checkMrcHeader, mrcRead, mrcReadArray, mrcsRead, mrcsWrite, mrcWrite
from hetem.numerics import Volume
from hetem.simulator import ParticleStack


def makeStack(rng, n=6, L=16, labels=True):
    from hetem.numerics.rotations import sampleRotationUniform
    return ParticleStack(
        images=rng.standard_normal((n, L, L)).astype(np.float32),
        rotations=sampleRotationUniform(rng, n),
        translations=rng.uniform(-3, 3, size=(n, 2)),
        ctfs=np.column_stack([rng.uniform(1e4, 2e4, n), rng.uniform(1e4, 2e4, n), rng.uniform(0, 3, n), np.full(n, 300.0), np.full(n, 2.7), np.full(n, 0.1), np.zeros(n)]),
        labels=np.arange(n) % 2 if labels else None,
        apix=6.0,
    )


# ---
# MRC
# ---

def test_volumeRoundTripIsBitwise(tmp_path, rng):
    data = rng.standard_normal((16, 16, 16)).astype(np.float32)
    path = str(tmp_path / "v.mrc")
    mrcWrite(path, Volume(torch.from_numpy(data), apix=2.5))
    volume = mrcRead(path)
    assert volume.apix == pytest.approx(2.5)
    assert volume.data.numpy().tobytes() == data.tobytes()
    assert checkMrcHeader(path) == (16, 16, 16)


def test_stackRoundTrip(tmp_path, rng):
    images = rng.standard_normal((5, 16, 16)).astype(np.float32)
    path = str(tmp_path / "s.mrcs")
    mrcsWrite(path, images, apix=6.0)
    back, apix = mrcsRead(path)
    assert np.array_equal(back, images)
    assert apix == pytest.approx(6.0)


def test_truncatedFile(tmp_path, rng):
    path = str(tmp_path / "v.mrc")
    mrcWrite(path, rng.standard_normal((16, 16, 16)).astype(np.float32))
    with open(path, "rb") as f:
        content = f.read()
    with open(path, "wb") as f:
        f.write(content[:-100])
    with pytest.raises(MrcParseError) as info:
        mrcRead(path)
    assert info.value.offset == len(content) - 100


def test_wrongMode(tmp_path, rng):
    path = str(tmp_path / "v.mrc")
    mrcWrite(path, rng.standard_normal((16, 16, 16)).astype(np.float32))
    with open(path, "r+b") as f:
        f.seek(12)
        f.write(struct.pack("<i", 1))
    with pytest.raises(MrcParseError) as info:
        mrcReadArray(path)
    assert info.value.offset == 12


def test_wrongEndianness(tmp_path, rng):
    path = str(tmp_path / "v.mrc")
    mrcWrite(path, rng.standard_normal((16, 16, 16)).astype(np.float32))
    with open(path, "r+b") as f:
        f.seek(212)
        f.write(bytes([0x11, 0x11]))
    with pytest.raises(MrcParseError) as info:
        mrcRead(path)
    assert info.value.offset == 212


def test_headerTooShort(tmp_path):
    path = str(tmp_path / "short.mrc")
    with open(path, "wb") as f:
        f.write(b"\0" * 100)
    with pytest.raises(MrcParseError):
        mrcRead(path)


def test_writeRejectsWrongShape(tmp_path):
    with pytest.raises(DimensionError):
        mrcWrite(str(tmp_path / "v.mrc"), np.zeros((16, 16), dtype=np.float32))
    with pytest.raises(DimensionError):
        mrcsWrite(str(tmp_path / "s.mrcs"), np.zeros((16, 16), dtype=np.float32))


def test_atomicWriteLeavesNothingOnFailure(tmp_path):
    path = str(tmp_path / "out.mrc")
    with pytest.raises(RuntimeError):
        with atomicWrite(path) as tempPath:
            with open(tempPath, "wb") as f:
                f.write(b"partial")
            raise RuntimeError("crash")
    assert os.listdir(str(tmp_path)) == []


def test_json(tmp_path):
    path = str(tmp_path / "m.json")
    writeJson(path, dict(a=1, b=[1.5, None], c=float("inf")))
    assert readJson(path) == dict(a=1, b=[1.5, None], c=float("inf"))


# --------
# Metadata
# --------

def test_metadataRoundTrip(tmp_path, rng):
    stack = makeStack(rng)
    path = str(tmp_path / "p.csv")
    metaCsvWrite(path, stack)
    meta = metaCsvRead(path)
    assert np.array_equal(meta["rotations"], stack.rotations)
    assert np.array_equal(meta["translations"], stack.translations)
    assert np.array_equal(meta["ctfs"], stack.ctfs)
    assert np.array_equal(meta["labels"], stack.labels)
    assert list(pd.read_csv(path).columns) == metadataColumns


def test_metadataIsDeterministicText(tmp_path, rng):
    stack = makeStack(rng)
    a = str(tmp_path / "a.csv")
    b = str(tmp_path / "b.csv")
    metaCsvWrite(a, stack)
    metaCsvWrite(b, stack)
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


def test_missingLabelsStayAbsent(tmp_path, rng):
    stack = makeStack(rng)
    path = str(tmp_path / "p.csv")
    metaCsvWrite(path, stack)
    frame = pd.read_csv(path, float_precision="round_trip").drop(columns=[labelColumn])
    frame.to_csv(path, index=False)
    assert metaCsvRead(path)["labels"] is None


def test_blankLabels(tmp_path, rng):
    stack = makeStack(rng)
    path = str(tmp_path / "p.csv")
    metaCsvWrite(path, stack)
    frame = pd.read_csv(path, float_precision="round_trip")
    frame[labelColumn] = np.nan
    frame.to_csv(path, index=False)
    assert metaCsvRead(path)["labels"] is None
    frame[labelColumn] = stack.labels.astype(np.float64)
    frame.loc[1, labelColumn] = np.nan
    frame.to_csv(path, index=False)
    with pytest.raises(ParameterError):
        metaCsvRead(path)


def test_missingColumn(tmp_path, rng):
    path = str(tmp_path / "p.csv")
    metaCsvWrite(path, makeStack(rng))
    frame = pd.read_csv(path).drop(columns=["rot11"])
    frame.to_csv(path, index=False)
    with pytest.raises(ParameterError):
        metaCsvRead(path)


def test_readParticleStack(tmp_path, rng):
    stack = makeStack(rng, labels=False)
    mrcsWrite(str(tmp_path / "p.mrcs"), stack.images, apix=stack.apix)
    metaCsvWrite(str(tmp_path / "p.csv"), stack)
    loaded = readParticleStack(str(tmp_path / "p.mrcs"), str(tmp_path / "p.csv"))
    assert loaded.labels is None
    assert np.array_equal(loaded.images, stack.images)
    assert loaded.apix == pytest.approx(6.0)


def test_readParticleStackCountMismatch(tmp_path, rng):
    stack = makeStack(rng)
    mrcsWrite(str(tmp_path / "p.mrcs"), stack.images[:4])
    metaCsvWrite(str(tmp_path / "p.csv"), stack)
    with pytest.raises(DimensionError):
        readParticleStack(str(tmp_path / "p.mrcs"), str(tmp_path / "p.csv"))
