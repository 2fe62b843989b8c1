"""Optimal transport for Gaussian mixture models.

Restricting transport couplings to mixtures gives a distance computed
by a small transportation LP over closed-form Gaussian costs; this
package implements the distance, its plans, geodesics, multi-marginal
barycenters and pointwise assignment maps, a relaxed
transport-plus-likelihood fitting energy in 1D, and image pipelines
(color transfer, texture synthesis) built on top.
"""

from .assignment import PairPosterior, posterior, t_mean, t_rand, transport_points
from .barycenter import BarycenterResult, mmw2, mw2_barycenter
from .errors import (
    DegenerateCovarianceError,
    DensityUndefinedError,
    NumericalError,
    PosteriorUndefinedError,
)
from .gaussian import (
    AffineMap,
    Gaussian,
    gaussian_barycenter,
    interpolate_gaussian,
    mmw2_gaussian_sq,
    multimarginal_plan_gaussian,
    ot_map_gaussian,
    w2_gaussian_sq,
)
from .gmm import (
    Gmm,
    PointCloud,
    canonicalize,
    fit_em,
    kmeans,
    load_gmm,
    load_point_cloud,
    log_pdf,
    sample,
    save_gmm,
    save_point_cloud,
)
from .imaging import (
    PatchSet,
    adsn,
    color_transfer,
    extract_patches,
    load_image,
    recompose_patches,
    save_image,
    texture_synthesize,
)
from .linalg import SpdMatrix, pinv, sqrtm, sym_eig
from .mw2 import (
    TransportPlan,
    mw2,
    mw2_geodesic,
    mw2_trace_bound,
    quantiles_1d,
    save_plan,
    w2_1d_exact,
)
from .relaxed import CouplingParams1D, EnergyGradient, energy, gradient, optimize
from .transport import (
    DiscreteCoupling,
    MultiCoupling,
    solve_multimarginal,
    solve_transport,
)

__version__ = "0.1.0"

__all__ = [
    "AffineMap",
    "BarycenterResult",
    "CouplingParams1D",
    "DegenerateCovarianceError",
    "DensityUndefinedError",
    "DiscreteCoupling",
    "EnergyGradient",
    "Gaussian",
    "Gmm",
    "MultiCoupling",
    "NumericalError",
    "PairPosterior",
    "PatchSet",
    "PointCloud",
    "PosteriorUndefinedError",
    "SpdMatrix",
    "TransportPlan",
    "adsn",
    "canonicalize",
    "color_transfer",
    "energy",
    "extract_patches",
    "fit_em",
    "gaussian_barycenter",
    "gradient",
    "interpolate_gaussian",
    "kmeans",
    "load_gmm",
    "load_image",
    "load_point_cloud",
    "log_pdf",
    "mmw2",
    "mmw2_gaussian_sq",
    "multimarginal_plan_gaussian",
    "mw2",
    "mw2_barycenter",
    "mw2_geodesic",
    "mw2_trace_bound",
    "optimize",
    "ot_map_gaussian",
    "pinv",
    "posterior",
    "quantiles_1d",
    "recompose_patches",
    "sample",
    "save_gmm",
    "save_image",
    "save_plan",
    "save_point_cloud",
    "solve_multimarginal",
    "solve_transport",
    "sqrtm",
    "sym_eig",
    "t_mean",
    "t_rand",
    "texture_synthesize",
    "transport_points",
    "w2_1d_exact",
    "w2_gaussian_sq",
]
