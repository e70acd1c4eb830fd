"""
Choosing latent codes to decode into volumes.

==========================  ==================================================
representativeVolumes       per class, the kernel-density peak along the
                            class's own PC1
clusterCentroidVolumes      k-means centroids in PCA space
pc1TraversalVolumes         points along the global PC1, in units of its
                            standard deviation
==========================  ==================================================
"""

import logging
import warnings

import numpy as np
from scipy.stats import gaussian_kde
from sklearn.decomposition import PCA

from hetem.analysis.latentMetrics import clusterLatents, pc1Projection

logger = logging.getLogger(__name__)

minimumClassPoints = 10


def _warn(message):
    logger.warning(message)
    warnings.warn(message, stacklevel=3)


def densityPeakLatent(latents, gridSize=512):
    """
    The latent vector at the Gaussian-KDE peak of the PC1 projection
    of *latents*. Falls back to the mean for fewer than
    ``minimumClassPoints`` points, a constant projection or a singular
    density estimate.
    """
    latents = np.asarray(latents, dtype=np.float64)
    mean = latents.mean(axis=0)
    if len(latents) < minimumClassPoints:
        _warn("only %d latents; using the mean" % len(latents))
        return mean
    pca = PCA(n_components=1)
    projection = pca.fit_transform(latents)[:, 0]
    if np.ptp(projection) <= 1e-12:
        return mean
    try:
        kde = gaussian_kde(projection)
    except np.linalg.LinAlgError:
        _warn("singular density estimate; using the mean")
        return mean
    grid = np.linspace(projection.min(), projection.max(), gridSize)
    peak = grid[int(np.argmax(kde(grid)))]
    return pca.inverse_transform(np.array([[peak]]))[0]


def representativeLatents(latents, labels, gridSize=512):
    """
    ``(classes, zs)``: one density-peak latent per class label.
    """
    latents = np.asarray(latents, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    zs = []
    for c in classes:
        points = latents[labels == c]
        if len(points) < minimumClassPoints:
            _warn("class %r has %d latents (< %d); using the class mean" % (c, len(points), minimumClassPoints))
            zs.append(points.mean(axis=0))
        else:
            zs.append(densityPeakLatent(points, gridSize))
    return classes, np.asarray(zs)


def representativeVolumes(model, latents, labels, gridSize=512):
    """
    Decode the density-peak latent of every class. Returns a list of
    :class:`hetem.numerics.Volume`, ordered by class label.
    """
    _, zs = representativeLatents(latents, labels, gridSize)
    return [model.extractVolume(z) for z in zs]


def clusterCentroidVolumes(model, latents, k, restarts=10, seed=0):
    """
    Decode the k-means centroids. Returns ``(volumes, zs)``.
    """
    _, kmeans, pca = clusterLatents(latents, k, restarts, seed)
    zs = pca.inverse_transform(kmeans.cluster_centers_)
    return [model.extractVolume(z) for z in zs], zs


def pc1TraversalVolumes(model, latents, values=(-1.0, 0.0, 1.0)):
    """
    Decode points at ``mean + v * std(PC1) * PC1`` for each *v*.
    Returns ``(volumes, zs)``.
    """
    projection, pca = pc1Projection(latents)
    std = float(projection.std())
    zs = pca.inverse_transform(np.asarray(values, dtype=np.float64)[:, None] * std)
    return [model.extractVolume(z) for z in zs], zs
