"""Image directory -> penultimate ConvNeXt activations as an .fmat matrix.

Kept separate from the clustering pipeline on purpose: the .fmat file and
the sample manifest are the only contract between the two, so the pipeline
never needs a deep-learning runtime.
"""

from .model import VARIANTS, build_model
from .run import ExtractionJob, extract

__all__ = ["ExtractionJob", "extract", "build_model", "VARIANTS"]
