import numpy as np
import pytest

from cluster_annotate.dataio import FeatureMatrix, SampleManifest, SampleRecord


@pytest.fixture
def tiny_matrix():
    data = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.5]], dtype=np.float32)
    return FeatureMatrix(data, ("a", "b", "c"))


@pytest.fixture
def tiny_manifest():
    return SampleManifest(
        (
            SampleRecord("a", "img/a.png", true_label="cat"),
            SampleRecord("b", "img/b.png", true_label="dog"),
            SampleRecord("c", "img/c.png", true_label="cat"),
        )
    )
