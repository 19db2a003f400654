"""Closed characteristics on star-shaped hypersurfaces: search, indices and identity checks."""

from .dynamics import FlowResult, SymplecticPath, flow, linearized_path
from .errors import CharflowError
from .identities import OrbitDossier, VerdictEntry, VerdictReport
from .maslov import IndexRecord, index_sequence, iterate_index_formula, maslov_index, mean_index_formula
from .orbitfinder import ClosedCharacteristic, analytic_ellipsoid_orbits, distinct, shoot, survey
from .spectral import CaseTag, FloquetData, floquet, normal_form_case, rotation_angle
from .surface import Ellipsoid, PerturbedGauge, SurfaceMetrics, metrics, surface_from_config

__version__ = "0.1.0"

__all__ = [
    "CaseTag", "CharflowError", "ClosedCharacteristic", "Ellipsoid", "FloquetData", "FlowResult",
    "IndexRecord", "OrbitDossier", "PerturbedGauge", "SurfaceMetrics", "SymplecticPath",
    "VerdictEntry", "VerdictReport", "analytic_ellipsoid_orbits", "distinct", "floquet", "flow",
    "index_sequence", "iterate_index_formula", "linearized_path", "maslov_index",
    "mean_index_formula", "metrics", "normal_form_case", "rotation_angle", "shoot",
    "surface_from_config", "survey",
]
