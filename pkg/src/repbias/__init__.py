"""Bias auditor for learned image representations.

Quantifies color bias (EMD over hue-histogram signatures), shape bias
(silhouette-set accuracy), cross-model failure overlap (GAP sets) and
distortion robustness for exported feature matrices and prediction tables.
"""

__version__ = "0.1.0"
