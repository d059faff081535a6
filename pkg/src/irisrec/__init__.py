"""Iris recognition from texture statistics: segmentation, a 252-value
feature pool, kernel PCA and a small fully connected classifier."""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .imaging import load_image, save_pgm
from .preprocess import preprocess
from .edges import detect_edges
from .segmentation import Circle, IrisGeometry, segment
from .normalization import NormalizedIris, rubber_sheet
from .features import FEATURE_NAMES, N_FEATURES, extract_features
from .reduce import kpca_fit, kpca_transform
from .classify import MLP, TrainConfig, train, evaluate
from .analysis import pearson_matrix, feature_auc, rank_features
