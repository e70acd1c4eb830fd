"""
Latent-space metrics: classification error, rank correlation along
the first principal component, and the pose/conformation
entanglement score.
"""

import itertools
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import spearmanr
from sklearn.cluster import KMeans
from sklearn.decomposition import PCA

from hetem.analysis.poseMetrics import poseArrays, rotationErrorMedian, translationErrorMedian
from hetem.errors import (
    DegenerateClusterError,
    DegenerateStatisticsError,
    DimensionError,
    InsufficientDataError,
    ParameterError,
    UndefinedCorrelationError,
)

logger = logging.getLogger(__name__)

classifierDescription = "PCA to min(d, k) components, k-means (%d restarts, seed %d), Hungarian matching"


def _latents(latents):
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim == 1:
        latents = latents[:, None]
    return latents


def pc1Projection(latents):
    """
    Fit PCA(1) to *latents* and return ``(projections, pca)``.
    """
    latents = _latents(latents)
    pca = PCA(n_components=1)
    projection = pca.fit_transform(latents)[:, 0]
    return projection, pca


# --------------
# Classification
# --------------

def clusterLatents(latents, k, restarts=10, seed=0):
    """
    Reduce *latents* with PCA and run k-means. Returns
    ``(assignments, kmeans, pca)``.
    """
    latents = _latents(latents)
    if k < 2:
        raise ParameterError("clustering needs k >= 2, got %d" % k)
    if len(latents) < k:
        raise InsufficientDataError("cannot make %d clusters from %d latents" % (k, len(latents)))
    if np.allclose(latents, latents[0]):
        raise DegenerateClusterError("all latent vectors are identical")
    pca = PCA(n_components=min(latents.shape[1], k))
    reduced = pca.fit_transform(latents)
    kmeans = KMeans(n_clusters=k, n_init=restarts, random_state=seed)
    assignments = kmeans.fit_predict(reduced)
    return assignments, kmeans, pca


def matchClusters(assignments, labels):
    """
    Optimal cluster-to-label matching (Hungarian assignment on the
    confusion matrix). Returns ``(mapping, correct)`` where
    *mapping* maps cluster index to label.
    """
    assignments = np.asarray(assignments, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    size = int(max(assignments.max(), labels.max())) + 1
    confusion = np.zeros((size, size), dtype=np.int64)
    np.add.at(confusion, (assignments, labels), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    mapping = dict(zip(rows.tolist(), cols.tolist()))
    return mapping, int(confusion[rows, cols].sum())


def classificationError(latents, labels, k, restarts=10, seed=0):
    """
    Fraction of images whose k-means cluster, after optimal matching,
    disagrees with the ground-truth label.
    """
    latents = _latents(latents)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(latents):
        raise DimensionError("got %d latents and %d labels" % (len(latents), len(labels)))
    assignments, _, _ = clusterLatents(latents, k, restarts, seed)
    _, correct = matchClusters(assignments, labels)
    return 1.0 - correct / float(len(labels))


# -----------
# Correlation
# -----------

def spearmanPc1(latents, labels):
    """
    Spearman correlation between the PC1 projection of *latents* and
    ordinal *labels*. PCA signs are arbitrary, so the absolute value is
    returned.
    """
    latents = _latents(latents)
    labels = np.asarray(labels)
    if len(np.unique(labels)) < 2:
        raise InsufficientDataError("need at least two distinct labels")
    projection, _ = pc1Projection(latents)
    if np.ptp(projection) <= 1e-12 * max(1.0, np.abs(latents).max()):
        raise UndefinedCorrelationError("PC1 projection is constant")
    rho = spearmanr(projection, labels).correlation
    if not math.isfinite(rho):
        raise UndefinedCorrelationError("rank correlation is undefined")
    return abs(float(rho))


# ------------
# Entanglement
# ------------

@dataclass
class EntanglementReport(object):

    eRot: float
    eTrans: float
    eZ: float
    eTotal: float

    def asDict(self):
        return dict((key[0].lower() + "_" + key[1:].lower(), value) for key, value in asdict(self).items())


def pc1ClassStatistics(latents, labels):
    """
    Per-class mean and standard deviation of the PC1 projection (PC1
    fitted on all latents). Returns ``(classes, means, stds)``.
    """
    projection, _ = pc1Projection(latents)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    means = []
    stds = []
    for c in classes:
        values = projection[labels == c]
        if len(values) < 2:
            raise InsufficientDataError("class %r has fewer than 2 latents" % c)
        means.append(float(values.mean()))
        stds.append(float(values.std(ddof=1)))
    return classes, np.asarray(means), np.asarray(stds)


def entanglementZ(means, stds):
    """
    Mean over class pairs of ``exp(-(mu_i - mu_j)^2 / (sigma_i sigma_j))``.

    >>> entanglementZ([0.0, 0.0], [1.0, 1.0])
    1.0
    >>> round(entanglementZ([0.0, 1.0], [1.0, 1.0]), 4)
    0.3679
    """
    means = np.asarray(means, dtype=np.float64)
    stds = np.asarray(stds, dtype=np.float64)
    if len(means) < 2:
        raise InsufficientDataError("entanglement needs at least two classes")
    if np.any(stds <= 0):
        raise DegenerateStatisticsError("a class has zero variance along PC1")
    terms = []
    for i, j in itertools.combinations(range(len(means)), 2):
        terms.append(math.exp(-(means[i] - means[j]) ** 2 / (stds[i] * stds[j])))
    return float(np.mean(terms))


def entanglement(latents, labels, predPoses, truthPoses, alignment=None):
    """
    Build an :class:`EntanglementReport`. The pose terms are the median
    squared rotation error (after *alignment*) and the median squared
    translation error; they are summed as they are, although rotation
    errors are dimensionless and translation errors are in pixels squared.
    """
    predR, predT = poseArrays(predPoses)
    truthR, truthT = poseArrays(truthPoses)
    _, means, stds = pc1ClassStatistics(latents, labels)
    eZ = entanglementZ(means, stds)
    eRot = rotationErrorMedian(predR, truthR, alignment)
    eTrans = translationErrorMedian(predT, truthT)
    return EntanglementReport(eRot, eTrans, eZ, eRot + eTrans + eZ)
