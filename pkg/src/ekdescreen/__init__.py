"""Kernel-density intensity features and logistic screening for chest radiographs."""

from .errors import EkdeError
from .imaging import GrayImage, LabeledCase, DatasetManifest, load_gray_image, read_manifest, flatten
from .kde import KdeModel, BandwidthDiagnostics, epanechnikov, silverman_bandwidth, fit_kde
from .kde import pdf_naive, pdf_fast, kde_mean, kde_std
from .features import FeatureVector, FeatureTable, extract, extract_batch
from .classifier import LogisticModel, ClassStats, CoefficientCI, FitConfig
from .classifier import sigmoid, lda_init, fit, wald_ci, predict, save_model, load_model
from .evaluation import ConfusionMatrix, MetricsReport, RocCurve, SplitPlan
from .evaluation import confusion, metrics, roc, split, cross_validate
from .evaluation import probability_bounds, density_threshold

__version__ = "0.1.0"
