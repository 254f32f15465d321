"""The four audit analyses: GAP extraction, color-bias scoring, shape-bias
accuracy and distortion deltas.

Published headline counts depend on the checkpoints that produced them;
this module validates the definitions on ingested tables and reports new
measurements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .colorsig import ColorSignature, image_signature
from .corpus import Dataset, FeatureMatrix, PredictionTable, SubsetManifest
from .embedspace import KnnConfig, ProbeModel, knn_query, probe_accuracy, probe_predict
from .transport import emd


class AlignmentError(ValueError):
    pass


@dataclass
class GapSet:
    """Images every unsupervised model gets identically wrong and the
    supervised model gets right, plus the intermediate overlap counts."""

    indices: SubsetManifest
    shared_wrong_count: int
    shared_wrong_same_count: int
    gap_count: int

    def __post_init__(self):
        if not (self.gap_count <= self.shared_wrong_same_count <= self.shared_wrong_count):
            raise ValueError(
                f"count chain violated: {self.gap_count} <= "
                f"{self.shared_wrong_same_count} <= {self.shared_wrong_count}"
            )
        if self.gap_count != len(self.indices):
            raise ValueError("gap_count disagrees with manifest length")


@dataclass
class ColorBiasReport:
    model_id: str
    per_query_emd: list[tuple[int, float]]
    mean_emd: float


@dataclass
class ShapeBiasReport:
    model_id: str
    accuracy: float
    n: int


@dataclass
class DistortionReport:
    model_id: str
    baseline_acc: float
    deltas: dict[str, float] = field(default_factory=dict)


def _require_aligned(reference: PredictionTable, other: PredictionTable) -> None:
    if len(reference) != len(other):
        raise AlignmentError(
            f"table '{other.model_id}' has {len(other)} entries, "
            f"'{reference.model_id}' has {len(reference)}"
        )
    for (ia, ta, _), (ib, tb, _) in zip(reference.entries, other.entries):
        if ia != ib:
            raise AlignmentError(
                f"table '{other.model_id}' index {ib} != {ia} of '{reference.model_id}'"
            )
        if ta != tb:
            raise AlignmentError(
                f"table '{other.model_id}' true label {tb} != {ta} at index {ia}"
            )


def agreement_and_gap(unsup: list[PredictionTable], sup: PredictionTable) -> GapSet:
    """Shared-wrong / shared-wrong-same / gap sets over aligned tables."""
    if not unsup:
        raise ValueError("need at least one unsupervised prediction table")
    for table in list(unsup) + [sup]:
        _require_aligned(unsup[0], table)
    indices = unsup[0].indices()
    truth = unsup[0].true_labels()
    preds = np.stack([t.pred_labels() for t in unsup])
    all_wrong = np.all(preds != truth[None, :], axis=0)
    same_pred = np.all(preds == preds[0][None, :], axis=0)
    sup_right = sup.pred_labels() == truth
    shared_wrong = all_wrong
    shared_wrong_same = all_wrong & same_pred
    gap = shared_wrong_same & sup_right
    manifest = SubsetManifest("gap", [int(i) for i in indices[gap]])
    return GapSet(
        indices=manifest,
        shared_wrong_count=int(shared_wrong.sum()),
        shared_wrong_same_count=int(shared_wrong_same.sum()),
        gap_count=int(gap.sum()),
    )


class _SignatureCache:
    def __init__(self, ds: Dataset):
        self._ds = ds
        self._cache: dict[int, ColorSignature] = {}

    def __call__(self, index: int) -> ColorSignature:
        sig = self._cache.get(index)
        if sig is None:
            sig = image_signature(self._ds.records[index])
            self._cache[index] = sig
        return sig


def color_bias_score(
    subset: SubsetManifest,
    query_feats: FeatureMatrix,
    ref_feats: FeatureMatrix,
    query_imgs: Dataset,
    ref_imgs: Dataset,
    cfg: KnnConfig,
) -> ColorBiasReport:
    """Mean hue-signature EMD between each subset image and its top-k
    representation-space neighbors; small means color-alike neighborhoods.

    Features must be row-normalized and row-aligned with their datasets.
    cfg.exclude_self treats the query's subset index as its identity row in
    ref_feats (only meaningful when query and reference are the same split).
    """
    if len(subset) == 0:
        raise ValueError("empty subset")
    subset.validate(dataset_size=len(query_imgs))
    if len(query_feats) != len(query_imgs):
        raise AlignmentError("query features misaligned with query dataset")
    if len(ref_feats) != len(ref_imgs):
        raise AlignmentError("reference features misaligned with reference dataset")
    query_sig = _SignatureCache(query_imgs)
    ref_sig = _SignatureCache(ref_imgs)
    per_query: list[tuple[int, float]] = []
    for idx in subset.indices:
        neighbors = knn_query(
            query_feats.rows[idx], ref_feats, cfg,
            query_index=idx if cfg.exclude_self else None,
        )
        sig_q = query_sig(idx)
        values = [emd(sig_q, ref_sig(j)) for j, _ in neighbors]
        per_query.append((idx, float(np.mean(values))))
    mean_emd = float(np.mean([v for _, v in per_query]))
    return ColorBiasReport(query_feats.model_id, per_query, mean_emd)


def shape_bias_eval(
    silhouette_feats: FeatureMatrix,
    manifest: SubsetManifest,
    labels: np.ndarray,
    probe: ProbeModel,
) -> ShapeBiasReport:
    """Probe accuracy over the manifest rows of the silhouette split."""
    manifest.validate(dataset_size=len(silhouette_feats))
    labels = np.asarray(labels)
    if labels.shape[0] != len(silhouette_feats):
        raise AlignmentError("labels misaligned with silhouette features")
    rows = np.array(manifest.indices, dtype=np.int64)
    selected = FeatureMatrix(
        silhouette_feats.rows[rows],
        model_id=silhouette_feats.model_id,
        split_name=silhouette_feats.split_name,
    )
    table = probe_predict(probe, selected, labels[rows], indices=rows)
    return ShapeBiasReport(silhouette_feats.model_id, probe_accuracy(table), len(manifest))


def distortion_eval(
    baseline: PredictionTable,
    distorted: dict[str, PredictionTable],
) -> DistortionReport:
    """Signed accuracy change of each distorted table against the baseline."""
    base_acc = probe_accuracy(baseline)
    deltas: dict[str, float] = {}
    for name in sorted(distorted):
        table = distorted[name]
        _require_aligned(baseline, table)
        deltas[name] = probe_accuracy(table) - base_acc
    return DistortionReport(baseline.model_id, base_acc, deltas)
