"""Thin bridge from pretrained encoder checkpoints to the audit toolkit's
file formats: feature matrices ("RFV1" binaries) and prediction CSVs.

No training and no augmentation happen here; analysis lives entirely in the
consuming toolkit.
"""

__version__ = "0.1.0"
