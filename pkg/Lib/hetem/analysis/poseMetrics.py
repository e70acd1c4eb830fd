"""
Pose errors after global alignment.

An amortized reconstruction fixes no laboratory frame: the learned
volume may be rotated (and, for the handedness ambiguity, mirrored)
relative to the ground truth. :func:`alignPosesGlobal` finds the
global rotation that best maps predicted rotations onto the truth.
Both composition sides are searched,

=====  ===========================
left   ``R_global @ R_pred``
right  ``R_pred @ R_global``
=====  ===========================

each with and without the mirror ``R -> J R J``, ``J = diag(1, 1, -1)``.
The candidate with the lowest median error wins.
"""

import logging
from dataclasses import dataclass

import numpy as np

from hetem.errors import DimensionError, InsufficientDataError
from hetem.numerics import Pose

logger = logging.getLogger(__name__)

mirrorMatrix = np.diag([1.0, 1.0, -1.0])
alignmentSides = ("left", "right")


@dataclass
class PoseAlignment(object):

    rGlobal: np.ndarray
    mirror: bool = False
    side: str = "left"

    def asDict(self):
        return dict(rGlobal=np.asarray(self.rGlobal).tolist(), mirror=bool(self.mirror), side=self.side)


def poseArrays(poses):
    """
    Normalize *poses* to ``(rotations n x 3 x 3, translations n x 2)``.
    Accepts a list of :class:`Pose` or a ``(rotations, translations)`` pair.
    """
    if isinstance(poses, tuple) and len(poses) == 2 and not isinstance(poses[0], Pose):
        R, t = poses
    else:
        poses = list(poses)
        R = [p.R for p in poses]
        t = [p.t for p in poses]
    R = np.asarray(R, dtype=np.float64).reshape(-1, 3, 3)
    t = None if t is None else np.asarray(t, dtype=np.float64).reshape(-1, 2)
    return R, t


def _rotations(value):
    if isinstance(value, (list, tuple)) and value and isinstance(value[0], Pose):
        return poseArrays(value)[0]
    return np.asarray(value, dtype=np.float64).reshape(-1, 3, 3)


def applyAlignment(rotations, alignment):
    """
    Apply *alignment* to predicted *rotations* (``n x 3 x 3``).
    """
    R = _rotations(rotations)
    if alignment is None:
        return R
    if alignment.mirror:
        R = mirrorMatrix @ R @ mirrorMatrix
    if alignment.side == "left":
        return alignment.rGlobal @ R
    return R @ alignment.rGlobal


def _procrustes(M):
    U, _, Vt = np.linalg.svd(M)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt)) or 1.0])
    return U @ D @ Vt


def _fit(pred, truth, side):
    if side == "left":
        # max tr(G^T sum T P^T)
        M = np.einsum("nij,nkj->ik", truth, pred)
    else:
        # max tr(G^T sum P^T T)
        M = np.einsum("nji,njk->ik", pred, truth)
    return _procrustes(M)


def _errors(pred, truth, G, side):
    aligned = G @ pred if side == "left" else pred @ G
    return ((truth - aligned) ** 2).sum(axis=(-2, -1))


def alignPosesGlobal(pred, truth, iterations=10):
    """
    Find the :class:`PoseAlignment` minimizing the median of
    ``|R_truth - align(R_pred)|_F^2``. A Procrustes fit on all poses is
    refined by refitting on the poses whose error is at most the median.
    The result does not depend on the order of the poses.
    """
    P = _rotations(pred)
    T = _rotations(truth)
    if len(P) != len(T):
        raise DimensionError("got %d predicted and %d true poses" % (len(P), len(T)))
    if len(P) < 3:
        raise InsufficientDataError("global alignment needs at least 3 poses, got %d" % len(P))
    best = None
    for side in alignmentSides:
        for mirror in (False, True):
            candidate = mirrorMatrix @ P @ mirrorMatrix if mirror else P
            G = _fit(candidate, T, side)
            errors = _errors(candidate, T, G, side)
            score = float(np.median(errors))
            for _ in range(iterations):
                inliers = errors <= np.median(errors)
                G2 = _fit(candidate[inliers], T[inliers], side)
                errors2 = _errors(candidate, T, G2, side)
                score2 = float(np.median(errors2))
                if score2 >= score - 1e-15:
                    break
                G, errors, score = G2, errors2, score2
            if best is None or score < best[0] - 1e-12:
                best = (score, PoseAlignment(G, mirror, side))
    logger.debug("pose alignment: side %s mirror %s median %.4g", best[1].side, best[1].mirror, best[0])
    return best[1]


# ------
# Errors
# ------

def rotationErrors(pred, truth, alignment=None):
    """
    Per-pose ``|R_truth - align(R_pred)|_F^2``.
    """
    aligned = applyAlignment(pred, alignment)
    return ((_rotations(truth) - aligned) ** 2).sum(axis=(-2, -1))


def rotationErrorMedian(pred, truth, alignment=None):
    return float(np.median(rotationErrors(pred, truth, alignment)))


def rotationErrorMean(pred, truth, alignment=None):
    return float(np.mean(rotationErrors(pred, truth, alignment)))


def translationErrors(pred, truth):
    """
    Per-pose ``|t_truth - t_pred|^2`` in pixels squared.
    """
    pred = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1, 2)
    if pred.shape != truth.shape:
        raise DimensionError("got %d predicted and %d true translations" % (len(pred), len(truth)))
    return ((truth - pred) ** 2).sum(axis=-1)


def translationErrorMedian(pred, truth):
    """
    >>> translationErrorMedian([[1.0, 0.0]] * 3, [[0.0, 0.0]] * 3)
    1.0
    """
    return float(np.median(translationErrors(pred, truth)))


def translationErrorMean(pred, truth):
    return float(np.mean(translationErrors(pred, truth)))
