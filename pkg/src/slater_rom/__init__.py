"""Nonlinear reduced-order modeling of 1D point-interaction Schrodinger
ground states.

The ground state of a Hamiltonian with attractive Dirac wells is a mixture
of exponential (Slater) densities sharing one decay scale.  This package
solves such problems exactly, equips the mixtures with transport geometry,
compresses a parametric family into a few snapshots by greedy selection,
and answers new queries by minimizing a reduced energy over barycentric
weights.  A width laboratory quantifies why linear compression of the same
families is slow while the transport parametrization is fast.

Layers, bottom up: slater (densities and barycenters), exact (closed-form
and fixed-point solvers), transport (couplings and mixture distances),
greedy (offline compression), online (reduced energy descent), widths
(empirical spectral decay), experiments/config (campaign drivers),
service + cli (HTTP and command-line frontends).
"""

from .config import (CONFIG_SCHEMA_VERSION, DimerFamilyParams,
                     ExperimentConfig, HeatmapParams, Interval, OnlineParams,
                     TranslateFamilyParams, WidthsParams, dump_config,
                     load_config, preset, preset_names)
from .errors import (ConfigError, DomainError, NumericalError, SchemaError,
                     VertexBudgetError)
from .exact import (GroundState, grid_eigensolver, lambert_w0,
                    solve_ground_state, solve_symmetric_dimer)
from .experiments import (HeatmapResult, OnlineRecord, OnlineSweep,
                          SolveTable, WidthReport, run_heatmap, run_offline,
                          run_online, run_solve, run_widths)
from .greedy import (ARTIFACT_SCHEMA_VERSION, ProjectionResult, ReducedBasis,
                     Snapshot, basis_from_dict, basis_to_dict,
                     build_reduced_basis, greedy_select, load_basis,
                     projection_error, save_basis)
from .online import (OnlineConfig, OnlineResult, ReducedEnergyModel,
                     energy_gradient, low_discrepancy_starts, online_minimize,
                     reduced_energy, smoothed_abs, smoothed_abs_prime)
from .slater import (ExtendedWeightDomain, Slater, SlaterMixture,
                     slater_barycenter, symmetric_dimer_icdf, w2_slater,
                     w2_slater_sq)
from .transport import (MultiMarginalPlan, TransportPlan, enumerate_vertices,
                        multimarginal_plan, mw2, solve_transportation_lp,
                        two_column_vertices)
from .widths import (SnapshotGrid, WidthCurve, discretized_translation_spectrum,
                     icdf_snapshot_grid, l2_snapshot_grid, pod_width_curve,
                     translation_kernel, translation_spectrum,
                     translation_zeros)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "ConfigError", "DomainError", "NumericalError", "SchemaError",
    "VertexBudgetError",
    # densities and geometry
    "Slater", "SlaterMixture", "ExtendedWeightDomain", "slater_barycenter",
    "symmetric_dimer_icdf", "w2_slater", "w2_slater_sq",
    # exact solvers
    "GroundState", "grid_eigensolver", "lambert_w0", "solve_ground_state",
    "solve_symmetric_dimer",
    # transport
    "MultiMarginalPlan", "TransportPlan", "enumerate_vertices",
    "multimarginal_plan", "mw2", "solve_transportation_lp",
    "two_column_vertices",
    # offline
    "ARTIFACT_SCHEMA_VERSION", "ProjectionResult", "ReducedBasis", "Snapshot",
    "basis_from_dict", "basis_to_dict", "build_reduced_basis", "greedy_select",
    "load_basis", "projection_error", "save_basis",
    # online
    "OnlineConfig", "OnlineResult", "ReducedEnergyModel", "energy_gradient",
    "low_discrepancy_starts", "online_minimize", "reduced_energy",
    "smoothed_abs", "smoothed_abs_prime",
    # widths
    "SnapshotGrid", "WidthCurve", "discretized_translation_spectrum",
    "icdf_snapshot_grid", "l2_snapshot_grid", "pod_width_curve",
    "translation_kernel", "translation_spectrum", "translation_zeros",
    # configuration and campaigns
    "CONFIG_SCHEMA_VERSION", "DimerFamilyParams", "ExperimentConfig",
    "HeatmapParams", "Interval", "OnlineParams", "TranslateFamilyParams",
    "WidthsParams", "dump_config", "load_config", "preset", "preset_names",
    "HeatmapResult", "OnlineRecord", "OnlineSweep", "SolveTable",
    "WidthReport", "run_heatmap", "run_offline", "run_online", "run_solve",
    "run_widths",
]
