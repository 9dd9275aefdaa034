import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from retrace import featurize, gen_corpus  # noqa: E402


@pytest.fixture(scope="session")
def benchmark_corpus():
    """The 100-per-class seed-7 corpus used by the heavier suites."""
    traces, labels = gen_corpus(100, 7)
    vectors = [featurize(t) for t in traces]
    class_labels = [t.label for t in traces]
    return traces, labels, vectors, class_labels
