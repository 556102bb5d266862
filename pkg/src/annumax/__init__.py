"""Geometric machinery for delta-discretised spherical maximal averages.

Library layout:

- ``geometry``: spheres, annuli, polar caps, slabs, projections, wedge norm
- ``volume``: Monte-Carlo and grid volume oracles plus closed-form bounds
- ``families``: sphere families, extremal triples, dyadic classification
- ``maximal``: maximal region averages, norms, multiplicity functional
- ``experiments`` / ``cli``: reproducible delta-sweep experiments
- ``_kernels``: compiled/numpy twin implementations of the hot predicates
"""

from ._kernels import BACKEND as kernel_backend
from .geometry import (
    DegenerateDirectionError,
    DependentBasisError,
    DirectionData,
    Region,
    RegionKind,
    Slab,
    Sphere,
    centre_distance,
    proj_orthocomplement,
    region_contains,
    slab_of_pair,
    unit_direction,
    wedge_norm,
)
from .volume import (
    BoundPrediction,
    Box,
    VolumeEstimate,
    VolumeMethod,
    grid_volume,
    mc_volume,
    parallelepiped_volume,
    predicted_tuple_bound,
)
from .families import (
    BucketSignature,
    SphereFamily,
    TripleKind,
    TripleSpec,
    angular_bucket,
    bucket_audit,
    cardinality_audit,
    collinear_triple,
    distance_bucket,
    enemy_triple,
    generic_triple,
    load_family,
    random_family,
    save_family,
)
from .maximal import (
    AnnulusIndicator,
    BallIndicator,
    ConstantField,
    HalfSpaceIndicator,
    MaxProbeConfig,
    VoxelGrid,
    eval_max,
    focusing_probe,
    lp_norm,
    multiplicity_functional,
    region_average,
    sliced_max_norm,
)
from .experiments import (
    ExperimentConfig,
    ExperimentKind,
    ExperimentResult,
    FitResult,
    exponent_a,
    fit_exponent,
    predicted_rhs,
    run,
)

__version__ = "0.1.0"
