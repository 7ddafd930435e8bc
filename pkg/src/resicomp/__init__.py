"""Loss-resilient image/token codec toolkit.

A transport-layer codec built around slice-partitioned latent tokens:
a deterministic block-transform tokenizer, quantized low-discrepancy
slice partitioning, context-mode scheduled conditional entropy coding
with Gaussian-mixture models, a bit-exact range coder, Markov burst-loss
simulation, and feature-domain packet loss concealment.
"""

__version__ = "0.1.0"
