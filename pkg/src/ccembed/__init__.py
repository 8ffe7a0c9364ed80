"""Isometric embeddings of conformally compact metrics at desk scale.

The package takes a metric given as expression-valued components over a
model manifold with boundary, verifies that its curvature at infinity stays
below a chosen negative bound, builds a plateaued defining function and the
associated positive-definite adjusted tensor on a collar, embeds that tensor
into Euclidean space by seeded gradient descent, and composes the result
into a scaled half-space model, re-verifying every claimed property along
the way.
"""

from .bdf import (BdfProfile, GField, NormalFormData, assemble_G,
                  assemble_bdf, choose_epsilon, compute_phi, flow_collar,
                  make_cutoff)
from .builtins import builtin_names, make_builtin
from .config import (DEFAULT_TOLERANCES, PipelineConfig, parse_config,
                     parse_tolerance_overrides)
from .curvature import (KappaInfinityField, TwoPlane, curvature_limit_scan,
                        kappa_infinity, kappa_rescale, plane_family,
                        sectional_curvature)
from .embed import (EmbedGrid, EuclideanEmbedding, OptimizerConfig,
                    analytic_embedding, embed_grid_from_collar,
                    embedding_diagnostics, optimize_embedding,
                    pullback_metric)
from .errors import (CcembedError, ConfigError, ConsistencyError,
                     DegeneratePlaneError, EvaluationError,
                     ExpressionSyntaxError, FlowError, GridError,
                     HypothesisViolation, NotABdfError, NotConvergedError,
                     QuadratureError, RepresentabilityError,
                     SpecValidationError, UnknownIdentifierError)
from .expr import evaluate, parse_expression, to_source
from .halfspace import (HalfSpaceModel, PEmbedding, compose, induced_kappa,
                        induced_curvature_inequality, pullback_halfspace,
                        totally_geodesic_half_plane, verify_p_embedding)
from .manifold import (BoundaryGrid, CollarGrid, ModelManifold, collar_torus,
                       disk, make_boundary_grid, make_collar_grid)
from .metric import (MetricSpec, compute_k2, eval_metric, make_metric_spec,
                     scale_metric, validate_spec)
from .pipeline import PipelineResult, run_pipeline
from .suite import SuiteSummary, run_suite

__version__ = "0.1.0"
