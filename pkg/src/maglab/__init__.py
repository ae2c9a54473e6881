"""maglab: magnitude of finite metric spaces and of convex bodies in l1^N."""

from .approximation import (
    SequenceSpec,
    SuiteReport,
    SweepRow,
    SweepTable,
    divergence_experiment,
    inequality_suite,
    magnitude_lower_sequence,
    one_point_sweep,
    sample_polytope,
    threshold_crossings,
)
from .errors import (
    CapExceeded,
    ConditionWarning,
    MaglabError,
    NotPositiveDefinite,
    ValidationError,
)
from .l1_geometry import (
    ConvexMagnitudeResult,
    IntrinsicVolumeVector,
    Polytope,
    WillsCheck,
    box_intrinsic_volumes,
    box_magnitude,
    box_polytope,
    convex_magnitude_l1,
    coordinate_simplex_intrinsic_volumes,
    coordinate_simplex_magnitude,
    coordinate_simplex_polytope,
    elementary_symmetric,
    exp_magnitude_bound,
    intrinsic_volumes,
    intrinsic_volumes_mc,
    magnitude_diam_bound,
    mcmullen_bound_check,
    polytope_v1_diam_bound,
    project,
    scale_polytope,
    v1_concavity_check,
    v1_intrinsic,
    volume,
    wills_identity_check,
)
from .metric_core import (
    FiniteMetricSpace,
    PDReport,
    PointCloud,
    SimilarityMatrix,
    Weighting,
    diagonal_embedding,
    is_positive_definite,
    l1_product,
    magnitude_finite,
    negative_type_probe,
    nested_magnitudes,
    scale_space,
    similarity_matrix,
    space_from_points,
    subspace_from_cloud,
)

__version__ = "0.1.0"
