"""Representation quality metrics and the shallow-vs-deep sweep.

Representations are (features x samples) matrices; labels are one integer
per sample (column).
"""
import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .hierarchy import (
    JointConfig,
    LayerSpec,
    joint_train,
    pretrain,
    reconstruct_from_top,
    reconstruct_x,
    transform,
)
from .matrix import ShapeError
from .nonlinearity import Nonlinearity
from .nsnmf import UnitConfig


class MetricWarning(RuntimeWarning):
    """A metric was evaluated at a degenerate input."""


@dataclass
class LabeledData:
    representation: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.representation = np.asarray(self.representation, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.representation.ndim != 2 or self.labels.shape != (self.representation.shape[1],):
            raise ShapeError(
                f"{self.labels.shape[0]} labels for a representation of shape {self.representation.shape}"
            )


def frobenius_distance(x, x_tilde):
    return float(np.linalg.norm(np.asarray(x) - np.asarray(x_tilde)))


def reconstruction_error(x, x_tilde):
    """``||X - Xt||_F / ||X||_F``.

    For an all-zero ``X`` the normalization is undefined: the raw distance
    is returned and a :class:`MetricWarning` is issued.
    """
    x = np.asarray(x, dtype=np.float64)
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    if x.shape != x_tilde.shape:
        raise ShapeError(f"reconstruction_error: {x.shape} vs {x_tilde.shape}")
    dist = frobenius_distance(x, x_tilde)
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        warnings.warn("reconstruction error of an all-zero matrix is not normalized", MetricWarning, stacklevel=2)
        return dist
    return dist / norm


def _sq_distances(train, test):
    # columns are samples
    return (
        np.sum(test * test, axis=0)[:, None]
        - 2.0 * test.T @ train
        + np.sum(train * train, axis=0)[None, :]
    )


def nearest_centroid_classify(train, test, method="centroid", n_neighbors=5):
    """Accuracy of a nearest-centroid (or k-NN) classifier fitted on ``train``.

    Ties go to the lowest class id. Test classes absent from ``train`` can
    never be predicted and count as errors.
    """
    if train.representation.shape[0] != test.representation.shape[0]:
        raise ShapeError("train and test representations have different feature counts")
    classes = np.unique(train.labels)
    missing = np.setdiff1d(np.unique(test.labels), classes)
    if missing.size:
        warnings.warn(f"test classes {missing.tolist()} do not occur in train", MetricWarning, stacklevel=2)
    if method == "centroid":
        centroids = np.stack(
            [train.representation[:, train.labels == c].mean(axis=1) for c in classes], axis=1
        )
        diff = test.representation[:, :, None] - centroids[:, None, :]
        d2 = np.einsum("fsc,fsc->sc", diff, diff)
        pred = classes[np.argmin(d2, axis=1)]
    elif method == "knn":
        d2 = _sq_distances(train.representation, test.representation)
        nn = np.argsort(d2, axis=1, kind="stable")[:, :n_neighbors]
        votes = train.labels[nn]
        counts = np.stack([(votes == c).sum(axis=1) for c in classes], axis=1)
        pred = classes[np.argmax(counts, axis=1)]
    else:
        raise ValueError(f"unknown classifier {method!r}")
    return float(np.mean(pred == test.labels))


def scatter_traces(data):
    """Traces of the between-class and pooled within-class scatter,
    both divided by the sample count."""
    x, y = data.representation, data.labels
    n = x.shape[1]
    mu = x.mean(axis=1, keepdims=True)
    between = within = 0.0
    for c in np.unique(y):
        xc = x[:, y == c]
        mc = xc.mean(axis=1, keepdims=True)
        between += xc.shape[1] * float(np.sum((mc - mu) ** 2))
        within += float(np.sum((xc - mc) ** 2))
    return between / n, within / n


def fisher_discriminant(data):
    """Trace ratio ``tr(S_B) / tr(S_W)`` with class-size weighting.

    Returns ``inf`` (with a :class:`MetricWarning`) when every class is a
    single repeated point.
    """
    if np.unique(data.labels).size < 2:
        raise ValueError("fisher_discriminant needs at least two classes")
    between, within = scatter_traces(data)
    if within == 0.0:
        warnings.warn("zero within-class scatter; separation is infinite", MetricWarning, stacklevel=2)
        return math.inf
    return between / within


def project_2d(h):
    """Scores of the samples (columns of ``h``) on the top two principal
    components, shape (2, n). Each component's sign is fixed so its
    largest-magnitude loading is positive."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape[0] < 2:
        raise ShapeError("project_2d needs at least two features")
    centered = h - h.mean(axis=1, keepdims=True)
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    scores = np.zeros((2, h.shape[1]))
    tol = (s[0] if s.size else 0.0) * max(h.shape) * np.finfo(float).eps
    for i in range(2):
        if i >= s.size or s[i] <= tol:
            if i == 1 or (s.size and s[0] > 0):
                warnings.warn("rank-deficient input; component %d set to zero" % (i + 1), MetricWarning, stacklevel=2)
            continue
        loading = u[:, i]
        if loading[np.argmax(np.abs(loading))] < 0:
            loading = -loading
        scores[i] = loading @ centered
    return scores


@dataclass
class EvalRecord:
    feature_count: int
    model: str
    seed: int
    recon_error: float
    recon_error_train: float
    frobenius_error: float
    classification_rate: float
    fisher_value: float


@dataclass
class EvalReport:
    records: list = field(default_factory=list)
    projections: dict = field(default_factory=dict)

    def to_csv(self, path):
        names = list(EvalRecord.__dataclass_fields__)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for r in self.records:
                writer.writerow([getattr(r, k) if not isinstance(getattr(r, k), float) else repr(getattr(r, k)) for k in names])

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"records": [asdict(r) for r in self.records]}, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def get(self, feature_count, model):
        for r in self.records:
            if r.feature_count == feature_count and r.model == model:
                return r
        raise KeyError((feature_count, model))


def _score(model, x_train, x_test, labels_train, labels_test, h_train, h_test, k, name, seed):
    x_test_tilde = reconstruct_from_top(model, h_test)
    rep_train = LabeledData(h_train, labels_train)
    return EvalRecord(
        feature_count=k,
        model=name,
        seed=seed,
        recon_error=reconstruction_error(x_test, x_test_tilde),
        recon_error_train=reconstruction_error(x_train, reconstruct_x(model)),
        frobenius_error=frobenius_distance(x_test, x_test_tilde),
        classification_rate=nearest_centroid_classify(rep_train, LabeledData(h_test, labels_test)),
        fisher_value=fisher_discriminant(rep_train),
    )


def sweep(
    x_train,
    labels_train,
    feature_counts,
    x_test=None,
    labels_test=None,
    hidden=(80,),
    models=("shallow", "deep"),
    theta=0.0,
    nonlinearity=None,
    unit=None,
    joint=None,
    project_at=None,
    fold_in="joint",
):
    """Train shallow (one layer of k) and deep (``hidden`` then k) models for
    every k and score them.

    Both model types share ``unit.seed``. Test metrics use fold-in
    representations of ``x_test``; without a test set the training data
    is scored; ``fold_in`` picks the :func:`transform` method. ``project_at`` names a feature count whose top-layer
    training representations are projected to 2-D into
    ``report.projections``.
    """
    f = Nonlinearity() if nonlinearity is None else nonlinearity
    unit = UnitConfig(k=1) if unit is None else unit
    joint = JointConfig(seed=unit.seed) if joint is None else joint
    if x_test is None:
        x_test, labels_test = x_train, labels_train
    report = EvalReport()
    for k in feature_counts:
        for name in models:
            if name == "shallow":
                specs = [LayerSpec(k, theta)]
            elif name == "deep":
                specs = [LayerSpec(h, theta) for h in hidden] + [LayerSpec(k, theta)]
            else:
                raise ValueError(f"unknown model type {name!r}")
            model = pretrain(x_train, specs, replace(unit, k=k), f)
            if name == "deep":
                model, _ = joint_train(model, x_train, joint)
            h_train = model.layers[-1].h
            h_test = h_train if x_test is x_train else transform(model, x_test, joint, method=fold_in)
            report.records.append(
                _score(model, x_train, x_test, labels_train, labels_test, h_train, h_test, k, name, unit.seed)
            )
            if project_at == k:
                report.projections[name] = project_2d(h_train)
    if project_at is not None and np.asarray(x_train).shape[0] >= 2:
        report.projections["raw"] = project_2d(x_train)
    return report
