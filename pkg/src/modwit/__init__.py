"""Entanglement and EPR-steering witnesses for modular position/momentum variables."""

__version__ = "0.1.0"

from .griddist import (
    Axis,
    AxisKind,
    CountsMap,
    Density,
    JointDistribution,
    OpticsConfig,
    convert_detector_coords,
    load_coincidence_csv,
    marginal,
    normalize_counts,
    save_coincidence_csv,
    variance_of,
)
from .modular import ModularConfig, ModularJoint, decompose_momentum, decompose_position, fold_joint
from .spectral import EigenReport, constant_c
from .states import FarFieldMode, SlitSpec, ideal_far_field, ideal_near_field
from .witnesses import Criterion, ScanCurve, WitnessResult, evaluate, poisson_uncertainty, scan_ell
