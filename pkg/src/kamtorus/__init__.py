"""Newton iteration for Kolmogorov invariant tori of near-integrable Hamiltonians."""

from .cohomology import Frequency, check_diophantine, small_divisor_spectrum, solve_homological
from .exceptions import (
    AliasingError, ConvergenceError, DivergenceError, KAMError, NondegeneracyError,
    PreconditionError, RealityError, ResonanceError, SmallDivisorError, TorusEscapeError,
)
from .group import GroupElement, apply_point, compose, exp, exp_by_squaring, inverse, pullback, symplectic_defect
from .normalform import KolmogorovForm, LieElement, TangentForm, check_nondegeneracy, solve_linearized
from .scheme import (
    CertificateConstants, IterationReport, ScheduleParams, abstract_fp_simulate,
    convergence_certificate, kam_run, newton_step,
)
from .series import FourierTaylorSeries, StripParams, make_series, majorant_norm
from .verify import TorusEmbedding, flow_check, invariance_residual, torus_embedding

__version__ = "0.1.0"
