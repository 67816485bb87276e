"""
Reconstruction of reservoir temperature fields from sparse sensors.

Two estimators share one grid, sensing and metrics layer: Gappy POD
(least squares on leading POD modes) and sparse representation (basis
pursuit denoising over a snapshot or POD dictionary, with an optional
outlier-robust variant).
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DataError,
    FormatError,
    NumericalError,
    OperatorError,
    ParameterError,
    ReconError,
    ShapeError,
    StateError,
    UnderdeterminedError,
)
from .grid import FieldGrid, Snapshot, SnapshotLibrary, center_library, load_snapshots  # noqa: E402
from .metrics import depth_band_stats, error1, error2, error_map  # noqa: E402
from .pod import PodBasis, compute_pod, gappy_reconstruct  # noqa: E402
from .sensing import MeasurementOperator, NoiseModel, apply, make_operator  # noqa: E402
from .sparse import Dictionary, SolverOptions, bpdn_solve, robust_solve, sparse_reconstruct  # noqa: E402
from .synth import StratificationParams, generate_library, generate_snapshot  # noqa: E402

__all__ = [
    "ConfigError",
    "DataError",
    "Dictionary",
    "FieldGrid",
    "FormatError",
    "MeasurementOperator",
    "NoiseModel",
    "NumericalError",
    "OperatorError",
    "ParameterError",
    "PodBasis",
    "ReconError",
    "ShapeError",
    "Snapshot",
    "SnapshotLibrary",
    "SolverOptions",
    "StateError",
    "StratificationParams",
    "UnderdeterminedError",
    "apply",
    "bpdn_solve",
    "center_library",
    "compute_pod",
    "depth_band_stats",
    "error1",
    "error2",
    "error_map",
    "gappy_reconstruct",
    "generate_library",
    "generate_snapshot",
    "load_snapshots",
    "make_operator",
    "robust_solve",
    "sparse_reconstruct",
]
