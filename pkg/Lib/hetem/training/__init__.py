"""
Losses, the conditional pose prediction task and the training loop.
"""

from hetem.training.trainer import HetEMTrainer, runTraining

__all__ = [
    "HetEMTrainer",
    "runTraining",
]
