"""retrace: entropy-based classification of per-URL retweeting traces.

Reconstructs per-URL activity traces from timestamped events, reduces
each trace to two information-theoretic features (time-interval entropy
and user entropy), and classifies or clusters traces into five activity
categories with k-NN, an RBF-kernel SVM trained by sequential minimal
optimization, and EM-fitted gaussian mixtures.
"""

from ._kernels import BACKEND
from .classify import (
    KnnModel,
    Standardizer,
    SvmModel,
    smo_train,
    train_knn,
    train_svm,
)
from .entropy import (
    FeatureVector,
    IntervalDistribution,
    UserDistribution,
    featurize,
    interval_distribution,
    time_interval_entropy,
    user_distribution,
    user_entropy,
)
from .evaluation import (
    ClassifierSpec,
    ClassReport,
    ConfusionMatrix,
    cluster_confusion,
    cross_validate,
    f_measure,
    purity,
    roc_area,
    stratified_folds,
)
from .gmm import GmmModel, StandardizedGmm, em_assign, em_fit, em_select_k
from .model_io import load_model, save_model
from .synth import GenSpec, gen_corpus, gen_trace
from .trace_model import (
    ActivityClass,
    Event,
    EventParseError,
    Trace,
    build_traces,
    filter_popular,
    parse_events,
    read_labels,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityClass",
    "BACKEND",
    "ClassReport",
    "ClassifierSpec",
    "ConfusionMatrix",
    "Event",
    "EventParseError",
    "FeatureVector",
    "GenSpec",
    "GmmModel",
    "IntervalDistribution",
    "KnnModel",
    "Standardizer",
    "StandardizedGmm",
    "SvmModel",
    "Trace",
    "UserDistribution",
    "build_traces",
    "cluster_confusion",
    "cross_validate",
    "em_assign",
    "em_fit",
    "em_select_k",
    "f_measure",
    "featurize",
    "filter_popular",
    "gen_corpus",
    "gen_trace",
    "interval_distribution",
    "load_model",
    "parse_events",
    "purity",
    "read_labels",
    "roc_area",
    "save_model",
    "smo_train",
    "stratified_folds",
    "time_interval_entropy",
    "train_knn",
    "train_svm",
    "user_distribution",
    "user_entropy",
]
