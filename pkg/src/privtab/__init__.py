"""privtab: differentially private tabular data synthesis.

A teacher ensemble trained on disjoint shards votes on generator samples;
only Gaussian-noised vote aggregates reach the student discriminator, so the
generator inherits an (epsilon, delta)-DP guarantee by post-processing. A
Renyi-DP accountant tracks the accumulated cost and stops training at the
configured budget. Utility is measured with a train-on-synthetic,
test-on-real harness over five downstream classifiers.
"""

__version__ = "0.1.0"
