"""Numerics for three-dimensional almost-Riemannian structures.

Frame classification and normal-form validation, Hamiltonian geodesic flow
with an exponential map and two-point shooting, the closed-form cut and
conjugate loci and metric spheres of the type-1 nilpotent family, abnormal
extremal tracing, and hypoelliptic heat kernels with the singular-volume
barrier demonstration.
"""

__version__ = "0.1.0"

from .abnormal import (AbnormalControls, AbnormalTrace, Type2Linearization,
                       abnormal_controls, abnormal_field, trace_abnormal,
                       type2_linearization)
from .errors import (ClassificationError, DomainBoxError, FieldVanishesError,
                     FrameParseError, OffSingularSetError,
                     QuadratureToleranceError, ScanFailureError,
                     ShootingFailureError, SingularSetError)
from .frames import (Box, CheckResult, FrameSpec, PointClass, PointKind,
                     ValidationReport, baouendi_goulaouic_frame,
                     classify_point, euclidean_frame, metric_tensor,
                     nilpotent_frame, parse_frame_spec, singular_set_sample,
                     validate_normal_form, volume_density)
from .geodesics import (CovectorInit, GeodesicPath, PhaseState, ShootOptions,
                        ShootResult, exponential_map, hamiltonian,
                        integrate_geodesic, shoot_distance)
from .heat import (BarrierGrid, BarrierResult, HeatQuery, KernelAuxiliaries,
                   LaplacianCoefficients, QuadratureConfig,
                   barrier_simulation, hermite_functions, integrand_I,
                   integrand_baouendi_goulaouic, integrand_heisenberg,
                   intrinsic_laplacian_coeffs, kernel,
                   kernel_auxiliaries, kernel_baouendi_goulaouic,
                   kernel_heisenberg, kernel_with_error, leandre_estimate,
                   leandre_report, mehler_partial_sum, pde_residual, q_kernel,
                   reduced_potential)
from .nilpotent import (WHOLE_RAY, CutLocusDescription, NilpotentParams,
                        SphereSample, conjugate_time, cut_angles,
                        cut_locus_curve, cut_locus_description,
                        cut_membership, cut_time, discriminant,
                        discriminant_expanded, ellipse_separation,
                        geodesic_closed_form, jacobian_closed_form, s1,
                        sphere_sample, tau)
