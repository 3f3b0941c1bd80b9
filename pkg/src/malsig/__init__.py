"""malsig: analyze executable binaries as signals and images.

Byte signals become grayscale byteplot images; images become compact
texture descriptors; descriptors (or random projections of the raw
signal) drive family classification - nearest neighbor or sparse
representation with l1 minimization - and content-based retrieval over a
persisted fingerprint store indexed by an exact ball tree.
"""

from . import (
    balltree,
    corpus,
    errors,
    evaluation,
    features,
    gist,
    images,
    projections,
    retrieval,
    sections,
    sparse,
    store,
)

__version__ = "0.1.0"

__all__ = [
    "balltree",
    "corpus",
    "errors",
    "evaluation",
    "features",
    "gist",
    "images",
    "projections",
    "retrieval",
    "sections",
    "sparse",
    "store",
    "__version__",
]
