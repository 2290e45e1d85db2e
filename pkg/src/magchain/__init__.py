"""Design and analysis toolkit for magnetically actuated magnet-spring chain
catheters: kinetostatic shape solving, gradient stiffness design, spring
catalog matching, and pivot-stability sweeps."""

__version__ = "0.1.0"

from .config import (CatheterSpec, EnvironmentSpec, MagnetSpec, SpringSpec,
                     default_spec, load_spec, save_spec, save_si_json,
                     spec_to_document, to_si_dict)
from .errors import (ConfigError, DesignError, DomainError, GeometryError,
                     SolverError)
from .magnetics import (Dipole, WrenchPair, dipole_field, dipole_force_on,
                        dipole_torque_on, dipole_wrench_on, equivalent_torque)
from .kinematics import (ChainConfiguration, SegmentPose, chain_configuration,
                         compose_world_poses, field_vector, lumen_center,
                         segment_transform, target_direction)
from .equilibrium import (ResidualVector, SolveOptions, initial_values,
                          scaled_residual, solve_field_sweep,
                          solve_shape_aligned, solve_shape_for_field,
                          spring_torque_sum, torque_scale)
from .design import (DesignStep, DesignTable, design_all, design_k1, design_k2,
                     design_kn, load_design_table_csv)
from .catalog import (CatalogEntry, SpringGeometry, SpringMatch, default_catalog,
                      kb_from_geometry, kb_from_kc, kc_from_geometry,
                      load_catalog_csv, match_catalog, save_catalog_csv,
                      stiffness_errors)
from .analysis import (AdvancementTrace, PivotMetrics, SweepRecord, TraceState,
                       advancement_trace, bending_efficiency,
                       bending_efficiency_stats, nonoptimized_profile,
                       pivot_metrics, propulsion_efficiency, shape_error, sweep)
