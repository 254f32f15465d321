"""Shared fixture builders and independent oracles for the test suite.

Everything here is deliberately written as straight-line reference code
(pure-python scans, scipy LP, CDF arithmetic) so it cannot share bugs with
the implementations it checks.
"""

from __future__ import annotations

import numpy as np

from repbias.colorsig import ColorSignature
from repbias.corpus import Dataset, FeatureMatrix, ImageRecord, PredictionTable


def random_signature(rng: np.random.Generator, max_entries: int = 64, span: int = 180) -> ColorSignature:
    k = int(rng.integers(1, max_entries + 1))
    positions = np.sort(rng.choice(span, size=k, replace=False)).astype(np.float64)
    weights = rng.random(k) + 1e-3
    weights /= weights.sum()
    return ColorSignature(weights, positions)


def lp_transport_oracle(supply, demand, cost) -> float:
    """Vanilla equality-form LP via scipy.optimize.linprog (HiGHS)."""
    from scipy.optimize import linprog

    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    b_eq = np.concatenate([supply, demand * (supply.sum() / demand.sum())])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert res.success, res.message
    return float(res.fun)


def brute_knn(query: np.ndarray, reference: np.ndarray, k: int, exclude: int | None = None):
    """Exhaustive scan in pure python: sort all rows by (similarity desc, index)."""
    sims = [float(np.dot(reference[i], query)) for i in range(reference.shape[0])]
    order = sorted(
        (i for i in range(len(sims)) if i != exclude),
        key=lambda i: (-sims[i], i),
    )
    return [(i, sims[i]) for i in order[:k]]


def blob_features(rng: np.random.Generator, n_per_class: int = 100):
    a = rng.normal((2.0, 2.0), 0.3, size=(n_per_class, 2))
    b = rng.normal((-2.0, -2.0), 0.3, size=(n_per_class, 2))
    x = np.vstack([a, b])
    y = np.array([0] * n_per_class + [1] * n_per_class)
    return FeatureMatrix(x, model_id="blob"), y


def random_image(rng: np.random.Generator, label: int | None = None) -> ImageRecord:
    lab = int(rng.integers(0, 10)) if label is None else label
    return ImageRecord(lab, rng.integers(0, 256, size=(3, 32, 32), dtype=np.uint8))


def random_dataset(rng: np.random.Generator, n: int, split: str = "rand") -> Dataset:
    return Dataset([random_image(rng) for _ in range(n)], split_name=split)


def table_from_arrays(model_id: str, truth: np.ndarray, preds: np.ndarray) -> PredictionTable:
    entries = [(i, int(t), int(p)) for i, (t, p) in enumerate(zip(truth, preds))]
    return PredictionTable(model_id, entries)


def random_table_family(rng: np.random.Generator, n: int, n_unsup: int = 3):
    """Aligned prediction tables with enough label collisions to exercise
    every branch of the shared-wrong / same-pred / gap chain."""
    truth = rng.integers(0, 4, size=n)
    unsup = [
        table_from_arrays(f"u{m}", truth, rng.integers(0, 4, size=n))
        for m in range(n_unsup)
    ]
    sup = table_from_arrays("sup", truth, rng.integers(0, 4, size=n))
    return unsup, sup


def hue_image(rng: np.random.Generator, hues: list[int], label: int) -> ImageRecord:
    """Full-saturation image whose 1024 pixels are drawn from the given hues."""
    from repbias.distort import _hsv_to_rgb_arrays

    h = rng.choice(np.array(hues, dtype=np.float64), size=(32, 32))
    s = np.full((32, 32), 255.0)
    v = np.full((32, 32), 255.0)
    rgb = _hsv_to_rgb_arrays(h, s, v)
    pixels = np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)
    return ImageRecord(label, pixels)


def hue_group_fixture(seed: int = 0, n: int = 200):
    """Images in 4 hue groups with labels orthogonal to hue.

    Model A embeds each image by its own hue histogram (plus noise), so
    nearest neighbors share hue; model B embeds by a label one-hot (plus
    noise), so neighbors share labels but mix hues.
    """
    from repbias.colorsig import HUE_BINS, image_signature

    rng = np.random.default_rng(seed)
    bases = [10, 55, 100, 145]
    records = []
    groups = []
    for i in range(n):
        group = (i // 4) % 4
        label = i % 4
        hues = [bases[group] + d for d in (-3, -1, 1, 3)]
        records.append(hue_image(rng, hues, label))
        groups.append(group)
    ds = Dataset(records, split_name="huefix")

    hist = np.zeros((n, HUE_BINS))
    for i, rec in enumerate(records):
        sig = image_signature(rec)
        hist[i, sig.positions.astype(int)] = sig.weights
    feats_a = hist + 0.01 * rng.normal(size=hist.shape)

    onehot = np.zeros((n, 10))
    onehot[np.arange(n), ds.labels()] = 1.0
    feats_b = onehot + 0.01 * rng.normal(size=onehot.shape)

    return ds, FeatureMatrix(feats_a, model_id="hue_clustered"), FeatureMatrix(
        feats_b, model_id="label_clustered"
    ), np.array(groups)
