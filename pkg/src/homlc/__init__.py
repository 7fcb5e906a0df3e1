"""Homothetic log-concave density estimation."""

from .errors import (ConfigError, DegenerateEstimateError, DegenerateSampleError, HomLCError,
                     InputError, InvariantError, NumericError, ParseError, SamplerError,
                     SingularCovarianceError, SolverError)
from .evaluation import Model, Truth, body_error, dx2, hellinger_sq_1d, hellinger_sq_mc, log_density
from .geometry import (Ball, Box, ConvexBody, LinearImage, PointHull, bounding_radii, contains,
                       d_scale, d_scale_inf_alpha, minkowski, volume)
from .io import load_model, save_model
from .pipeline import FitConfig, SimConfig, fit, simulate
from .projection import (FitTrace, ObjectiveContext, PiecewiseLinearConcave, RadialSample,
                         fit_projection, fit_radii, segment_integral)
from .sampling import GeneratorFamily, sample_density, sample_radial, sample_uniform_body
from .shape import ScatterEstimate, estimate_hull, estimate_scatter, whiten

__version__ = "0.1.0"
