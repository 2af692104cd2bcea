"""Path-signature node features for graph convolutional networks on sensor networks."""

from .errors import (
    DataError,
    DivergenceError,
    DomainError,
    InsufficientDataError,
    NumericalError,
    PsgcnnError,
    ShapeError,
    TrainingError,
)
from .proximity import PointSet, ProximityGraph, apply_shift, build_proximity_graph, gcn_shift, pairwise_distance
from .signature import (
    Stream,
    TruncatedSignature,
    chen_product,
    segment_signature,
    signature,
    signature_length,
    spatio_temporal_signature,
    word_index,
)

__version__ = "0.1.0"
