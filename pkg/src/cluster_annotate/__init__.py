"""Unsupervised curation of image feature sets.

The pipeline reduces a feature matrix in two steps (optional PCA, then a
nonlinear embedding), clusters the embedding with three different methods,
keeps only the samples all methods agree on, and hands the surviving
clusters to a human (or a truth oracle) for naming.
"""

__version__ = "0.1.0"
