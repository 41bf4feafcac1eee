"""charflow: characteristic-flow solver for hyperbolic Dirichlet problems
with an interior stop set, and transport-based image inpainting.
"""

from ._kernels import available_backends, default_backend
from .characteristics import (CharacteristicTrace, ScaledField, arc_length_bound_check,
                              integrate_backward, integrate_forward, jacobian_xi,
                              make_scaled_field)
from .geometry import (BoundaryCurve, Domain, StopArc, StopSet, classify_side,
                       disk_domain, disk_segment_domain, domain_by_name,
                       project_to_boundary, rect_skeleton_domain, validate_domain)
from .linear_solver import (GridFunction, LinearProblem, evaluate_solution,
                            make_linear_problem, restart_solve, solve_on_grid,
                            trace_on_level, traces_on_stopset, u0_from_samples)
from .bv_analysis import (BVEstimate, assemble_bv_estimate, check_bounds, discrete_tv,
                          estimate_aux_norms, jump_mass_sigma, tv_bound_interior)
from .quasilinear import (FixedPointReport, FunctionalCoefficients, SelfMapBounds,
                          apply_U, build_inpainting_coefficients, nonuniqueness_demo,
                          self_map_bounds, solve_quasilinear)
from .timefield import (TimeField, TransportField, check_causality,
                        disk_segment_timefield, estimate_m0, field_from_distance_grid,
                        grad_T0, inward_radial_field, normal_field, radial_timefield,
                        rect_skeleton_timefield, rotated_field, transform_time)
from .inpaint import inpaint_image

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
