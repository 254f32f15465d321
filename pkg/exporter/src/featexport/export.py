"""Batch inference over an image batch file, emitting feature/prediction files.

Inference runs the encoder in evaluation mode with no augmentation; outputs
are streamed in dataset order, so row i of every emitted file is image i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .formats import read_image_batch, write_feature_file, write_prediction_csv
from .model import CheckpointError, load_checkpoint


@dataclass
class ExportJob:
    checkpoint: str
    dataset: str
    output: str
    batch_size: int = 256
    device: str = "cpu"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _encode(job: ExportJob, need_head: bool):
    model, head, normalize = load_checkpoint(job.checkpoint, device=job.device)
    if need_head and head is None:
        raise CheckpointError(f"{job.checkpoint}: no classifier head in checkpoint")
    labels, images = read_image_batch(job.dataset)
    feats = []
    logits = []
    with torch.no_grad():
        for start in range(0, images.shape[0], job.batch_size):
            chunk = images[start : start + job.batch_size]
            x = torch.from_numpy(chunk.astype(np.float32) / 255.0).to(job.device)
            if normalize is not None:
                mean, std = normalize
                x = (x - mean.to(job.device)) / std.to(job.device)
            f = model(x)
            feats.append(f.cpu().numpy())
            if need_head:
                logits.append(head(f).cpu().numpy())
    features = np.concatenate(feats, axis=0)
    return labels, features, (np.concatenate(logits, axis=0) if need_head else None)


def export_features(job: ExportJob) -> str:
    """Encode every image and write the feature file; returns the output path."""
    _, features, _ = _encode(job, need_head=False)
    write_feature_file(job.output, features.astype(np.float32))
    return job.output


def export_predictions(job: ExportJob) -> str:
    """Argmax head predictions with true labels copied from the dataset."""
    labels, _, logits = _encode(job, need_head=True)
    preds = np.argmax(logits, axis=1)
    write_prediction_csv(job.output, labels, preds)
    return job.output
