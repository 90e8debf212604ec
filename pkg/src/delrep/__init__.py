"""delrep: repetitivity and discrepancy diagnostics for Delone point sets.

The package measures, at desk scale, the geometry that links almost linear
repetitivity of a point set to the decay of its box-counting discrepancy:
density extremes over squarish boxes, power-law gap fits, constructive dyadic
decompositions of unit-cube unions, Burago-Kleiner partial sums, and exact
multiscale box substitution schemes that generate the interesting examples.
All metric quantities use the sup-norm.
"""

from .errors import (
    ContractError,
    DomainError,
    InfeasibleScaleError,
    InsufficientDataError,
    InvalidInputError,
    NormalizationError,
    OutOfWindowError,
    PartitionError,
    PrecisionError,
    StructuralError,
)
from .geometry import (
    Box,
    SquarishClass,
    as_cloud,
    box_metrics,
    epsilon_copy,
    hausdorff_distance,
    load_cloud,
    save_cloud,
)
from .delone import (
    Patch,
    PointSet,
    build_pointset,
    gen_lattice,
    gen_perturbed,
    load_pointset,
    save_pointset,
)
from .dyadic import (
    CubeUnion,
    DyadicCube,
    SSExpression,
    dyadic_decompose,
    rasterize,
    rasterize_polygon,
    smallest_enclosing_dyadic,
    ss_cells,
    ss_diff,
    ss_discrepancy_bound,
    ss_evaluate,
    ss_leaf,
    ss_union,
    uc_discrepancy_check,
)
from .discrepancy import (
    DensityCurve,
    DiscrepancyReport,
    WeightDistribution,
    bk_partial_sum,
    density_curve,
    density_extremes,
    discrepancy_scan,
    fit_delta,
    theoretical_delta,
    volume_weight,
    weight_patch_count,
    weight_point_count,
)
from .repetitivity import (
    RadiusResult,
    RepetitivityProfile,
    profile,
    radius_passes,
    repetitivity_radius,
)
from .substitution import (
    GeneratedPatch,
    GrowthFit,
    Scheme,
    check_incommensurable,
    check_irreducible,
    example_scheme,
    extract_delone,
    fit_growth,
    generate_patch,
    load_scheme,
    make_scheme,
    patch_boundary_cloud,
    save_scheme,
    tile_count_scan,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "ContractError",
    "CubeUnion",
    "DensityCurve",
    "DiscrepancyReport",
    "DomainError",
    "DyadicCube",
    "GeneratedPatch",
    "GrowthFit",
    "InfeasibleScaleError",
    "InsufficientDataError",
    "InvalidInputError",
    "NormalizationError",
    "OutOfWindowError",
    "PartitionError",
    "Patch",
    "PointSet",
    "PrecisionError",
    "RadiusResult",
    "RepetitivityProfile",
    "SSExpression",
    "Scheme",
    "SquarishClass",
    "StructuralError",
    "WeightDistribution",
    "as_cloud",
    "bk_partial_sum",
    "box_metrics",
    "build_pointset",
    "check_incommensurable",
    "check_irreducible",
    "density_curve",
    "density_extremes",
    "discrepancy_scan",
    "dyadic_decompose",
    "epsilon_copy",
    "example_scheme",
    "extract_delone",
    "fit_delta",
    "fit_growth",
    "gen_lattice",
    "gen_perturbed",
    "generate_patch",
    "hausdorff_distance",
    "load_cloud",
    "load_pointset",
    "load_scheme",
    "make_scheme",
    "patch_boundary_cloud",
    "profile",
    "radius_passes",
    "rasterize",
    "rasterize_polygon",
    "repetitivity_radius",
    "save_cloud",
    "save_pointset",
    "save_scheme",
    "smallest_enclosing_dyadic",
    "ss_cells",
    "ss_diff",
    "ss_discrepancy_bound",
    "ss_evaluate",
    "ss_leaf",
    "ss_union",
    "theoretical_delta",
    "tile_count_scan",
    "uc_discrepancy_check",
    "volume_weight",
    "weight_patch_count",
    "weight_point_count",
]
