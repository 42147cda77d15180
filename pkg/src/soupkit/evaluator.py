"""Embedding-space evaluation: kNN prediction and the neighbor-entropy score.

Prediction embeds references and queries with the same encoder and votes
over the k most cosine-similar references.  The label-free score treats a
batch as its own reference set: each row's k nearest in-batch neighbors
(self excluded) define a softmax distribution over scaled similarities,
and the mean entropy of those distributions is low when a few neighbors
stand far above the rest and maximal, log(k), when all similarities
agree, which is exactly the collapsed-representation case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BatchTooSmall, LengthMismatch, TooFewRefs, Unsupported
from .toy_models import classifier_logits, forward_embed, softmax

DEFAULT_K = 16
DEFAULT_TEMPERATURE = 0.07

# zero rows stay zero instead of dividing to NaN
_NORM_FLOOR = 1e-12
_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class KnnConfig:
    """Neighborhood size and similarity temperature shared by the kNN ops."""

    k: int = DEFAULT_K
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if self.k < 1:
            raise Unsupported("k must be at least 1")
        if self.temperature <= 0:
            raise Unsupported("temperature must be positive")


def l2_normalize_rows(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    norms = np.sqrt((z * z).sum(axis=1, keepdims=True))
    return z / np.maximum(norms, _NORM_FLOOR)


def _top_k_stable(sims: np.ndarray, k: int) -> np.ndarray:
    # stable sort on descending similarity: equal similarities keep their
    # original reference order, so ties resolve to the lower index
    return np.argsort(-sims, axis=1, kind="stable")[:, :k]


def knn_predict(
    ref_z: np.ndarray,
    ref_labels: np.ndarray,
    query_z: np.ndarray,
    num_classes: int,
    k: int = DEFAULT_K,
    temperature: float = DEFAULT_TEMPERATURE,
    weighted: bool = True,
) -> np.ndarray:
    """Labels for each query row voted by its k nearest references.

    The default vote weighs neighbors by a softmax over their scaled
    similarities; ``weighted=False`` counts them equally.  Vote ties go to
    the lowest class index.
    """
    ref_z = np.asarray(ref_z, dtype=np.float64)
    labels = np.asarray(ref_labels)
    if labels.ndim != 1 or labels.shape[0] != ref_z.shape[0]:
        raise LengthMismatch(
            f"{labels.shape[0] if labels.ndim == 1 else labels.shape} labels"
            f" for {ref_z.shape[0]} reference rows"
        )
    if k < 1:
        raise Unsupported("k must be at least 1")
    if temperature <= 0:
        raise Unsupported("temperature must be positive")
    if ref_z.shape[0] < k:
        raise TooFewRefs(f"k={k} with only {ref_z.shape[0]} reference rows")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise Unsupported("reference labels out of range")

    sims = l2_normalize_rows(query_z) @ l2_normalize_rows(ref_z).T
    idx = _top_k_stable(sims, k)
    top_labels = labels[idx]
    if weighted:
        weights = softmax(np.take_along_axis(sims, idx, axis=1) / temperature, axis=1)
    else:
        weights = np.ones_like(idx, dtype=np.float64)
    votes = np.zeros((query_z.shape[0], num_classes))
    np.add.at(votes, (np.arange(query_z.shape[0])[:, None], top_labels), weights)
    # argmax takes the first maximum, i.e. the lowest class on a tie
    return votes.argmax(axis=1).astype(np.int32)


def accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    if predicted.shape != labels.shape:
        raise LengthMismatch(f"predictions {predicted.shape} vs labels {labels.shape}")
    if predicted.size == 0:
        raise LengthMismatch("cannot score an empty prediction set")
    return float((predicted == labels).mean())


def knn_entropy(
    z: np.ndarray, k: int = DEFAULT_K, temperature: float = DEFAULT_TEMPERATURE
) -> float:
    """Mean entropy of each row's softmax-weighted k-neighborhood.

    Rows are L2-normalized; the self-similarity is excluded.  All rows
    identical gives the maximum log(k); a row with one exact twin among
    otherwise-distant neighbors contributes almost nothing at a sharp
    temperature.  Concentrated neighborhoods drive the score down, total
    collapse drives it up.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if k < 1:
        raise Unsupported("k must be at least 1")
    if temperature <= 0:
        raise Unsupported("temperature must be positive")
    if n <= k:
        raise BatchTooSmall(f"need more than k={k} rows, got {n}")
    u = l2_normalize_rows(z)
    sims = u @ u.T
    np.fill_diagonal(sims, -np.inf)
    top = np.take_along_axis(sims, _top_k_stable(sims, k), axis=1)
    p = softmax(top / temperature, axis=1)
    h = -(p * np.log(np.maximum(p, _LOG_FLOOR))).sum(axis=1)
    return float(h.mean())


def loo_knn_accuracy(
    z: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    k: int = DEFAULT_K,
    temperature: float = DEFAULT_TEMPERATURE,
    weighted: bool = True,
) -> float:
    """Leave-one-out kNN accuracy of one embedded labeled set."""
    z = np.asarray(z, dtype=np.float64)
    labels = np.asarray(labels)
    n = z.shape[0]
    if labels.ndim != 1 or labels.shape[0] != n:
        raise LengthMismatch(f"{labels.shape} labels for {n} rows")
    if k < 1:
        raise Unsupported("k must be at least 1")
    if n <= k:
        raise TooFewRefs(f"leave-one-out with k={k} needs more than {k + 1} rows, got {n}")
    u = l2_normalize_rows(z)
    sims = u @ u.T
    np.fill_diagonal(sims, -np.inf)
    idx = _top_k_stable(sims, k)
    top_labels = labels[idx]
    if weighted:
        weights = softmax(np.take_along_axis(sims, idx, axis=1) / temperature, axis=1)
    else:
        weights = np.ones_like(idx, dtype=np.float64)
    votes = np.zeros((n, num_classes))
    np.add.at(votes, (np.arange(n)[:, None], top_labels), weights)
    return accuracy(votes.argmax(axis=1).astype(np.int32), labels.astype(np.int32))


def embed_dataset(params, ds, batch_size: int = 256) -> np.ndarray:
    """Embed a dataset's inputs in order, in batches; (n, embed_dim) float64."""
    if batch_size < 1:
        raise Unsupported("batch_size must be positive")
    x = ds.inputs
    chunks = [
        forward_embed(params, x[start : start + batch_size])
        for start in range(0, x.shape[0], batch_size)
    ]
    if not chunks:
        raise Unsupported("cannot embed an empty dataset")
    return np.concatenate(chunks, axis=0)


def knn_accuracy(
    params,
    refs,
    queries,
    k: int = DEFAULT_K,
    temperature: float = DEFAULT_TEMPERATURE,
    weighted: bool = True,
) -> float:
    """Accuracy of kNN prediction from one labeled set to another."""
    pred = knn_predict(
        embed_dataset(params, refs),
        refs.labels,
        embed_dataset(params, queries),
        refs.num_classes,
        k=k,
        temperature=temperature,
        weighted=weighted,
    )
    return accuracy(pred, queries.labels.astype(np.int32))


def head_accuracy(params, ds) -> float:
    """Accuracy of the trained classifier head on a labeled dataset."""
    pred = classifier_logits(params, ds.inputs).argmax(axis=1).astype(np.int32)
    return accuracy(pred, ds.labels.astype(np.int32))
