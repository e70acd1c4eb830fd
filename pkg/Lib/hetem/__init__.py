"""
hetem: heterogeneous cryo-EM reconstruction with an amortized
variational autoencoder and conditional pose prediction.
"""

import torch

__all__ = [
    "haveCUDA",
    "__version__",
]

__version__ = "0.1"


def haveCUDA():
    """
    This will return a bool indicating if a CUDA device is available.
    """
    return torch.cuda.is_available()
