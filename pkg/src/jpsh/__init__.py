"""Compact binary codes for Hamming-space similarity search.

The pipeline: load features (``data_io``), pick anchors (``anchors``), build
the affinity graphs (``graphs``), run the alternating optimizer
(``optimizer``), encode corpora (``encoder``), search (``index``) and score
retrieval quality (``metrics``). ``baselines`` adds the LSH sanity floor and
the random-anchor variant; ``model_io`` persists trained models.
"""

from .anchors import AnchorSet, kmeans, random_anchor_set
from .baselines import LshModel, lsh_encode, lsh_encode_batch, lsh_train, train_random_anchor
from .data_io import (
    FeatureSet,
    SplitSpec,
    apply_center,
    center,
    load_features,
    load_labels,
    save_features,
    save_labels,
    split,
)
from .encoder import CodeSet, encode, encode_batch, load_codes, save_codes
from .graphs import AnchorAffinity, AnchorSimilarity, build_affinity, build_anchor_similarity
from .index import HammingIndex, SearchResult, hamming, search_radius, search_ranked
from .metrics import EvalReport, average_precision, evaluate, relevance
from .model_io import load_model, save_model
from .optimizer import (
    Hyperparams,
    JpshModel,
    TrainTrace,
    WorkState,
    objective,
    train,
    train_ablation,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorAffinity",
    "AnchorSet",
    "AnchorSimilarity",
    "CodeSet",
    "EvalReport",
    "FeatureSet",
    "HammingIndex",
    "Hyperparams",
    "JpshModel",
    "LshModel",
    "SearchResult",
    "SplitSpec",
    "TrainTrace",
    "WorkState",
    "apply_center",
    "average_precision",
    "build_affinity",
    "build_anchor_similarity",
    "center",
    "encode",
    "encode_batch",
    "evaluate",
    "hamming",
    "kmeans",
    "load_codes",
    "load_features",
    "load_labels",
    "load_model",
    "lsh_encode",
    "lsh_encode_batch",
    "lsh_train",
    "objective",
    "random_anchor_set",
    "relevance",
    "save_codes",
    "save_features",
    "save_labels",
    "save_model",
    "search_radius",
    "search_ranked",
    "split",
    "train",
    "train_ablation",
    "train_random_anchor",
]
