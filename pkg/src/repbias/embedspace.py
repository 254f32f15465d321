"""Exact kNN over feature matrices and a softmax linear probe on frozen features.

The probe is a single linear softmax layer trained by deterministic
full-batch gradient descent from a zero initialization; the representation
metric is cosine similarity over L2-normalized rows. No approximation
anywhere: kNN results must match an exhaustive scan bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import FeatureMatrix, PredictionTable


class EmbedSpaceError(ValueError):
    pass


class ProbeDivergenceError(EmbedSpaceError):
    pass


@dataclass
class KnnConfig:
    k: int = 4
    exclude_self: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise EmbedSpaceError(f"k must be >= 1, got {self.k}")


@dataclass
class ProbeConfig:
    step_size: float = 0.1
    iterations: int = 500
    l2_penalty: float = 0.0

    def __post_init__(self):
        if self.step_size <= 0:
            raise EmbedSpaceError("step_size must be positive")
        if self.iterations < 0:
            raise EmbedSpaceError("iterations must be non-negative")
        if self.l2_penalty < 0:
            raise EmbedSpaceError("l2_penalty must be non-negative")


@dataclass
class ProbeModel:
    """C x D weight matrix plus C biases of a softmax classifier."""

    weights: np.ndarray
    bias: np.ndarray

    @property
    def num_classes(self) -> int:
        return int(self.weights.shape[0])


def normalize_rows(fm: FeatureMatrix) -> FeatureMatrix:
    """Scale every row to unit Euclidean norm; zero rows are an error."""
    rows = np.asarray(fm.rows, dtype=np.float64)
    norms = np.linalg.norm(rows, axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise EmbedSpaceError(f"cannot normalize all-zero row {int(zero[0])}")
    return FeatureMatrix(rows / norms[:, None], model_id=fm.model_id, split_name=fm.split_name)


def knn_query(
    query_row: np.ndarray,
    reference: FeatureMatrix,
    cfg: KnnConfig,
    query_index: int | None = None,
) -> list[tuple[int, float]]:
    """Exact top-k reference rows by cosine similarity, descending.

    Both sides must be row-normalized. Ties break to the lower index; the
    query's own reference row is skipped when cfg.exclude_self and its
    identity index is supplied.
    """
    ref = reference.rows
    n = ref.shape[0]
    excluded = 1 if (cfg.exclude_self and query_index is not None) else 0
    if cfg.k >= n - excluded:
        raise EmbedSpaceError(f"k={cfg.k} too large for reference of size {n}")
    sims = ref @ np.asarray(query_row, dtype=np.float64)
    if excluded:
        sims = sims.copy()
        sims[query_index] = -np.inf
    # full lexsort keeps boundary ties exact (argpartition would not)
    order = np.lexsort((np.arange(n), -sims))
    return [(int(i), float(sims[i])) for i in order[: cfg.k]]


def _vote(labels: np.ndarray, sims: np.ndarray) -> int:
    """Majority label; ties by higher summed similarity, then lower label."""
    tally: dict[int, tuple[int, float]] = {}
    for lab, sim in zip(labels.tolist(), sims.tolist()):
        count, total = tally.get(lab, (0, 0.0))
        tally[lab] = (count + 1, total + sim)
    return min(tally, key=lambda lab: (-tally[lab][0], -tally[lab][1], lab))


def knn_classify(
    queries: FeatureMatrix,
    query_labels: np.ndarray,
    reference: FeatureMatrix,
    ref_labels: np.ndarray,
    cfg: KnnConfig,
    query_indices: np.ndarray | None = None,
) -> PredictionTable:
    """kNN majority-vote predictions for every query row.

    query_labels supplies the true labels recorded in the output table;
    query_indices gives each query's identity row in the reference (used for
    self-exclusion and as the table index; defaults to 0..N-1).
    """
    ref_labels = np.asarray(ref_labels)
    if ref_labels.shape[0] != len(reference):
        raise EmbedSpaceError("reference labels misaligned with reference rows")
    if queries.dim != reference.dim:
        raise EmbedSpaceError(f"query dim {queries.dim} != reference dim {reference.dim}")
    n = len(queries)
    if query_indices is None:
        query_indices = np.arange(n)
    entries = []
    for pos in range(n):
        qi = int(query_indices[pos])
        neighbors = knn_query(queries.rows[pos], reference, cfg, query_index=qi)
        idx = np.array([i for i, _ in neighbors])
        sims = np.array([s for _, s in neighbors])
        pred = _vote(ref_labels[idx], sims)
        entries.append((qi, int(query_labels[pos]), pred))
    return PredictionTable(queries.model_id, entries)


def probe_loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    l2_penalty: float = 0.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean softmax cross-entropy (+ 0.5*l2*|W|^2) and its analytic gradient."""
    n = features.shape[0]
    logits = features @ weights.T + bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    probs = expz / expz.sum(axis=1, keepdims=True)
    nll = -np.mean(shifted[np.arange(n), labels] - np.log(expz.sum(axis=1)))
    penalty = 0.5 * l2_penalty * float(np.sum(weights * weights)) if l2_penalty else 0.0
    loss = nll + penalty
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    grad_w = delta.T @ features / n + l2_penalty * weights
    grad_b = delta.sum(axis=0) / n
    return float(loss), grad_w, grad_b


def train_probe(
    features: FeatureMatrix,
    labels: np.ndarray,
    cfg: ProbeConfig,
    num_classes: int | None = None,
    loss_out: list[float] | None = None,
) -> ProbeModel:
    """Full-batch gradient descent from zero weights for cfg.iterations steps."""
    x = np.asarray(features.rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape[0] != x.shape[0]:
        raise EmbedSpaceError("labels misaligned with feature rows")
    if not np.all(np.isfinite(x)):
        raise EmbedSpaceError("features must be finite")
    c = int(num_classes if num_classes is not None else y.max() + 1)
    if y.min() < 0 or y.max() >= c:
        raise EmbedSpaceError("labels out of range")
    w = np.zeros((c, x.shape[1]))
    b = np.zeros(c)
    for _ in range(cfg.iterations):
        # overflow surfaces as a non-finite loss and is reported below
        with np.errstate(over="ignore", invalid="ignore"):
            loss, gw, gb = probe_loss_and_grad(w, b, x, y, cfg.l2_penalty)
        if not np.isfinite(loss):
            raise ProbeDivergenceError(
                "training loss became non-finite; reduce step_size"
            )
        if loss_out is not None:
            loss_out.append(loss)
        w -= cfg.step_size * gw
        b -= cfg.step_size * gb
    return ProbeModel(w, b)


def probe_predict(
    model: ProbeModel,
    features: FeatureMatrix,
    labels: np.ndarray,
    indices: np.ndarray | None = None,
) -> PredictionTable:
    """Argmax-of-logits predictions; argmax ties go to the smaller class."""
    x = np.asarray(features.rows, dtype=np.float64)
    if x.shape[1] != model.weights.shape[1]:
        raise EmbedSpaceError(
            f"feature dim {x.shape[1]} != probe dim {model.weights.shape[1]}"
        )
    logits = x @ model.weights.T + model.bias
    preds = np.argmax(logits, axis=1)
    if indices is None:
        indices = np.arange(x.shape[0])
    entries = [
        (int(i), int(t), int(p)) for i, t, p in zip(indices, labels, preds)
    ]
    return PredictionTable(features.model_id, entries)


def probe_accuracy(pt: PredictionTable) -> float:
    if len(pt) == 0:
        raise EmbedSpaceError("empty prediction table")
    return float(np.mean(pt.true_labels() == pt.pred_labels()))
