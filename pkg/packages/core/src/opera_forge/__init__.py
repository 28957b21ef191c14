"""opera-forge: respiratory-audio self-supervised pretraining and benchmarking.

Preprocessing, contrastive and generative pretraining on log-mel
spectrograms, and a linear-probe benchmark with report generation.
"""

__version__ = "0.1.0"
