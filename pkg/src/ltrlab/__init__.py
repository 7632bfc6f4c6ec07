"""Learning-to-rank toolkit over precomputed feature vectors.

Provides run/qrels I/O, a bilinear yes/no-logit scorer with logit-delta
reranking, teacher-guided hard-negative mining, a composite ranking
objective (pairwise + teacher distillation + pointwise calibration),
an AdamW training loop, retrieval metrics, and score-distribution
diagnostics.
"""

__version__ = "0.1.0"
