"""
Evaluation output: metrics, FSC curves, latent plot data, plots and
representative volumes for one trained model and its dataset.
"""

import logging
import os
import warnings

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from scipy.stats import gaussian_kde

from hetem.analysis.fsc import fscCurve, fscResolution
from hetem.analysis.latentMetrics import (
    classificationError,
    classifierDescription,
    entanglement,
    pc1Projection,
    spearmanPc1,
)
from hetem.analysis.poseMetrics import (
    alignPosesGlobal,
    rotationErrorMean,
    rotationErrorMedian,
    translationErrorMean,
    translationErrorMedian,
)
from hetem.analysis.representatives import clusterCentroidVolumes, pc1TraversalVolumes, representativeLatents
from hetem.configData import getAttrWithFallback
from hetem.errors import (
    DegenerateClusterError,
    DegenerateStatisticsError,
    InsufficientDataError,
    UndefinedCorrelationError,
)
from hetem.formats import atomicWrite, writeJson, writeText
from hetem.formats.mrcIO import mrcWrite

logger = logging.getLogger(__name__)

metricKeys = ["rot_mse_median", "trans_mse_median", "class_err", "spearman_pc1", "fsc_res", "e_entangle"]

unitsNote = (
    "e_entangle.e_total adds e_rot (dimensionless, squared Frobenius norm) "
    "and e_trans (pixels squared) without rescaling"
)

metricFailures = (DegenerateClusterError, DegenerateStatisticsError, InsufficientDataError, UndefinedCorrelationError)

densityGridSize = 200


def poseReport(predR, predT, truthR, truthT):
    """
    Aligned pose errors as a dict. The ``alignment`` entry is the
    :class:`hetem.analysis.poseMetrics.PoseAlignment` used.

    >>> R = np.stack([np.eye(3)] * 4)
    >>> t = np.zeros((4, 2))
    >>> report = poseReport(R, t, R, t)
    >>> report["rot_mse_median"], report["trans_mse_median"]
    (0.0, 0.0)
    """
    alignment = alignPosesGlobal(predR, truthR)
    return dict(
        rot_mse_median=rotationErrorMedian(predR, truthR, alignment),
        rot_mse_mean=rotationErrorMean(predR, truthR, alignment),
        trans_mse_median=translationErrorMedian(predT, truthT),
        trans_mse_mean=translationErrorMean(predT, truthT),
        alignment=alignment,
    )


class EvaluationCompiler(object):

    """
    Evaluates *model* on the :class:`hetem.simulator.ParticleStack`
    *stack* and writes the results into *path*. *volumes* are the
    ground-truth class volumes, indexed by class label, or None.
    The only external method is :meth:`compile`.

    ======================  =============================================
    metrics                 ``metrics.json``
    latentPc1               ``latent_pc1.csv``
    latentPc1Density        ``latent_pc1_density.csv``
    fscPlot                 ``fsc.png``
    latentPlot              ``latent_pc1_density.png``
    report                  ``report.txt``
    ======================  =============================================

    Per class *i* the compiler also writes ``fsc_class<i>.csv`` and
    ``representative_class<i>.mrc``, per k-means cluster *i*
    ``centroid_class<i>.mrc`` and per PC1 traversal point *j*
    ``pc1_traversal<j>.mrc``.
    """

    def __init__(self, model, stack, path, config, volumes=None, checkpoint=None):
        self.model = model
        self.stack = stack
        self.path = path
        self.config = config
        self.volumes = volumes
        self.checkpoint = checkpoint
        self.log = []
        self.notices = []
        self.metrics = {}
        self.encoded = None
        self.alignment = None
        self.representatives = None
        self.curves = None
        self.projection = None
        self.density = None
        self.paths = dict(
            metrics=os.path.join(path, "metrics.json"),
            latentPc1=os.path.join(path, "latent_pc1.csv"),
            latentPc1Density=os.path.join(path, "latent_pc1_density.csv"),
            fscPlot=os.path.join(path, "fsc.png"),
            latentPlot=os.path.join(path, "latent_pc1_density.png"),
            report=os.path.join(path, "report.txt"),
        )

    def notice(self, message):
        logger.warning(message)
        warnings.warn(message, stacklevel=2)
        self.notices.append(message)
        self.log.append("notice: " + message)

    def compile(self):
        """
        Run the evaluation and write all files. Returns the metrics dict.
        """
        os.makedirs(self.path, exist_ok=True)
        R, t, mu, _ = self.model.encodeStack(self.stack.images)
        self.encoded = dict(rotations=R, translations=t, latents=mu)
        self.log.append("encoded %d images" % len(self.stack))
        self.setupMetrics_poses()
        if self.stack.labels is None:
            self.notice("dataset has no class labels; classification metrics skipped")
            for key in ("class_err", "spearman_pc1", "fsc_res", "e_entangle"):
                self.metrics[key] = None
        else:
            self.setupMetrics_classes()
            self.setupFile_representatives()
            self.setupFile_fsc()
            self.setupFile_fscPlot(self.paths["fscPlot"])
        self.setupFile_latentPc1(self.paths["latentPc1"])
        self.setupFile_centroids()
        self.setupFile_pc1Traversal()
        self.setupFile_latentPc1Density(self.paths["latentPc1Density"])
        self.setupFile_latentPlot(self.paths["latentPlot"])
        self.setupFile_metrics(self.paths["metrics"])
        self.setupFile_report(self.paths["report"])
        return self.metrics

    # -------
    # Metrics
    # -------

    def setupMetrics_poses(self):
        """
        Aligned rotation and translation errors.

        **This should not be called externally.** Subclasses
        may override this method to compute the metrics
        in a different way if desired.
        """
        report = poseReport(
            self.encoded["rotations"], self.encoded["translations"],
            self.stack.rotations, self.stack.translations,
        )
        self.alignment = report.pop("alignment")
        self.metrics.update(report)
        self.metrics["alignment"] = self.alignment.asDict()
        self.log.append("median rotation error %.4g, median translation error %.4g px^2" % (report["rot_mse_median"], report["trans_mse_median"]))

    def setupMetrics_classes(self):
        """
        Classification error, PC1 rank correlation and entanglement.
        A metric that is undefined for these latents is recorded as
        None with a notice.

        **This should not be called externally.** Subclasses
        may override this method to compute the metrics
        in a different way if desired.
        """
        analysis = self.config.analysis
        latents = self.encoded["latents"]
        labels = self.stack.labels
        k = len(np.unique(labels))
        self.metrics["classifier"] = classifierDescription % (analysis.kmeansRestarts, analysis.kmeansSeed)
        computations = [
            ("class_err", lambda: classificationError(latents, labels, k, analysis.kmeansRestarts, analysis.kmeansSeed)),
            ("spearman_pc1", lambda: spearmanPc1(latents, labels)),
            ("e_entangle", lambda: entanglement(
                latents, labels,
                (self.encoded["rotations"], self.encoded["translations"]),
                (self.stack.rotations, self.stack.translations),
                self.alignment,
            ).asDict()),
        ]
        for key, compute in computations:
            try:
                self.metrics[key] = compute()
            except metricFailures as error:
                self.notice("%s is undefined: %s" % (key, error))
                self.metrics[key] = None
        self.metrics["units_note"] = unitsNote
        self.log.append("class_err %r, spearman_pc1 %r" % (self.metrics["class_err"], self.metrics["spearman_pc1"]))

    # -----
    # Files
    # -----

    def setupFile_representatives(self):
        """
        Decode and write one representative volume per class.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        classes, zs = representativeLatents(self.encoded["latents"], self.stack.labels, self.config.analysis.kdeGridSize)
        self.representatives = []
        for c, z in zip(classes, zs):
            volume = self.model.extractVolume(z)
            mrcWrite(os.path.join(self.path, "representative_class%d.mrc" % c), volume)
            self.representatives.append((int(c), z, volume))
        self.metrics["representative_z"] = dict((str(c), z.tolist()) for c, z, _ in self.representatives)
        self.log.append("wrote %d representative volumes" % len(self.representatives))

    def setupFile_centroids(self):
        """
        Decode and write the k-means cluster centroids. The cluster
        count is the number of labelled classes, or the phantom class
        count for unlabelled data.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        analysis = self.config.analysis
        if self.stack.labels is not None:
            k = len(np.unique(self.stack.labels))
        else:
            k = getAttrWithFallback(self.config.phantom, "nClasses")
        if k < 2:
            self.notice("a single class has no cluster centroids")
            self.metrics["centroid_z"] = None
            return
        try:
            volumes, zs = clusterCentroidVolumes(self.model, self.encoded["latents"], k, analysis.kmeansRestarts, analysis.kmeansSeed)
        except metricFailures as error:
            self.notice("cluster centroids are undefined: %s" % error)
            self.metrics["centroid_z"] = None
            return
        for i, volume in enumerate(volumes):
            mrcWrite(os.path.join(self.path, "centroid_class%d.mrc" % i), volume)
        self.metrics["centroid_z"] = [z.tolist() for z in zs]
        self.log.append("wrote %d cluster centroid volumes" % len(volumes))

    def setupFile_pc1Traversal(self):
        """
        Decode and write volumes along the first principal component
        of the latents, at ``config.analysis.traversalValues`` standard
        deviations from the mean.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        values = list(self.config.analysis.traversalValues)
        volumes, zs = pc1TraversalVolumes(self.model, self.encoded["latents"], values)
        for j, volume in enumerate(volumes):
            mrcWrite(os.path.join(self.path, "pc1_traversal%d.mrc" % j), volume)
        self.metrics["pc1_traversal_values"] = values
        self.metrics["pc1_traversal_z"] = [z.tolist() for z in zs]
        self.log.append("wrote %d PC1 traversal volumes" % len(volumes))

    def setupFile_fsc(self):
        """
        FSC of every representative volume against its ground truth.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        cutoff = self.config.analysis.fscCutoff
        self.curves = []
        if self.volumes is None:
            self.notice("no ground-truth volumes; FSC skipped")
            self.metrics["fsc_res"] = None
            return
        resolution = []
        resolution0143 = []
        for c, _, volume in self.representatives:
            if c >= len(self.volumes):
                self.notice("no ground-truth volume for class %d; FSC skipped" % c)
                resolution.append(None)
                resolution0143.append(None)
                continue
            curve = fscCurve(volume, self.volumes[c])
            frame = pd.DataFrame(dict(frequency=curve.frequencies, correlation=curve.correlations))
            with atomicWrite(os.path.join(self.path, "fsc_class%d.csv" % c)) as tempPath:
                frame.to_csv(tempPath, index=False, lineterminator="\n")
            resolution.append(fscResolution(curve, cutoff))
            resolution0143.append(fscResolution(curve, 0.143))
            self.curves.append((c, curve))
        apix = self.stack.apix
        self.metrics["fsc_res"] = resolution
        self.metrics["fsc_res_0143"] = resolution0143
        self.metrics["fsc_res_angstrom"] = [None if r is None else r * apix for r in resolution]
        self.metrics["fsc_cutoff"] = cutoff
        self.log.append("FSC resolution (pixels): %s" % ", ".join("%.3g" % r for r in resolution if r is not None))

    def setupFile_fscPlot(self, path):
        """
        Plot the FSC curves.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        if not self.curves:
            return
        figure, axis = plt.subplots(figsize=(5, 4))
        for c, curve in self.curves:
            axis.plot(curve.frequencies, curve.correlations, label="class %d" % c)
        axis.axhline(self.config.analysis.fscCutoff, color="gray", linestyle="--", linewidth=0.8)
        axis.set_xlabel("frequency (1/pixel)")
        axis.set_ylabel("FSC")
        axis.set_ylim(-0.05, 1.05)
        axis.legend()
        self._saveFigure(figure, path)

    def setupFile_latentPc1(self, path):
        """
        Per-image PC1 projection of the latent means.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        projection, _ = pc1Projection(self.encoded["latents"])
        self.projection = projection
        frame = pd.DataFrame(dict(index=np.arange(len(projection)), pc1=projection))
        if self.stack.labels is not None:
            frame["class_label"] = self.stack.labels
        with atomicWrite(path) as tempPath:
            frame.to_csv(tempPath, index=False, lineterminator="\n")

    def setupFile_latentPc1Density(self, path):
        """
        Kernel density of the PC1 projection, one column per class.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        projection = self.projection
        span = max(np.ptp(projection), 1e-6)
        grid = np.linspace(projection.min() - 0.1 * span, projection.max() + 0.1 * span, densityGridSize)
        frame = pd.DataFrame(dict(pc1=grid))
        labels = self.stack.labels
        if labels is None:
            groups = [("density", projection)]
        else:
            groups = [("density_class%d" % c, projection[labels == c]) for c in np.unique(labels)]
        for column, values in groups:
            frame[column] = self._density(values, grid)
        self.density = frame
        with atomicWrite(path) as tempPath:
            frame.to_csv(tempPath, index=False, na_rep="", lineterminator="\n")

    def _density(self, values, grid):
        if len(values) < 2 or np.ptp(values) <= 1e-12:
            return np.full(len(grid), np.nan)
        try:
            return gaussian_kde(values)(grid)
        except np.linalg.LinAlgError:
            return np.full(len(grid), np.nan)

    def setupFile_latentPlot(self, path):
        """
        Plot the PC1 densities.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        figure, axis = plt.subplots(figsize=(5, 4))
        for column in self.density.columns[1:]:
            axis.plot(self.density["pc1"], self.density[column], label=column.replace("density_", ""))
        axis.set_xlabel("PC1")
        axis.set_ylabel("density")
        if len(self.density.columns) > 2:
            axis.legend()
        self._saveFigure(figure, path)

    def _saveFigure(self, figure, path):
        figure.tight_layout()
        with atomicWrite(path) as tempPath:
            figure.savefig(tempPath, format="png", dpi=120)
        plt.close(figure)

    def setupFile_metrics(self, path):
        """
        Write the metrics JSON.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        self.metrics["n_images"] = len(self.stack)
        self.metrics["notices"] = list(self.notices)
        if self.checkpoint is not None:
            self.metrics["checkpoint"] = self.checkpoint
        writeJson(path, self.metrics)

    def setupFile_report(self, path):
        """
        Write the human-readable log.

        **This should not be called externally.** Subclasses
        may override this method to handle the file creation
        in a different way if desired.
        """
        writeText(path, "\n".join(self.log) + "\n")
