import torch

from hetem.numerics.randomFeatures import RFFBasis, rffEncode


def test_outputShapeAndRange():
    basis = RFFBasis(m=16, scale=4.0, generator=torch.Generator().manual_seed(0))
    coords = torch.rand(10, 3, dtype=torch.float64) - 0.5
    features = basis(coords)
    assert features.shape == (10, 32)
    assert basis.outputDim == 32
    cos, sin = features[:, :16], features[:, 16:]
    assert torch.allclose(cos ** 2 + sin ** 2, torch.ones_like(cos), atol=1e-6)


def test_basisIsFixed():
    basis = RFFBasis(m=8, scale=2.0)
    assert list(basis.parameters()) == []
    assert "B" in basis.state_dict()


def test_seededBasisIsReproducible():
    a = RFFBasis(m=8, scale=2.0, generator=torch.Generator().manual_seed(5))
    b = RFFBasis(m=8, scale=2.0, generator=torch.Generator().manual_seed(5))
    assert torch.equal(a.B, b.B)


def test_zeroCoordinate():
    B = torch.randn(4, 3)
    features = rffEncode(torch.zeros(1, 3), B)
    assert torch.equal(features, torch.tensor([[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]]))
