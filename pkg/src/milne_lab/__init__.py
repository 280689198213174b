"""Numerical laboratory for kinetic matter near an expanding attractor.

The package studies small perturbations of a linearly expanding vacuum
cosmology coupled to collisionless kinetic matter, in nondimensional
variables that turn the background into a fixed point.  Modules:

* :mod:`milne_lab.geometry` — background chart, time frames, rescaling,
  connection blocks and the energy-correction constants;
* :mod:`milne_lab.massshell` — the mass-shell root, pointwise momentum
  estimates, and derivatives of the momentum functions;
* :mod:`milne_lab.transport` — characteristic (geodesic) transport with
  mass-shell-conservation diagnostics and the momentum-support envelope;
* :mod:`milne_lab.matter` — kinetic moments, their continuity system and
  the Cauchy-Schwarz moment bounds;
* :mod:`milne_lab.modes` — linear perturbation oscillators and corrected
  energy decay;
* :mod:`milne_lab.homogeneous` — the reduced homogeneous isotropic
  system with constraint and consistency diagnostics;
* :mod:`milne_lab.energies` — energy functionals, decay fits and the
  run monitors;
* :mod:`milne_lab.harness` — scenario configuration, orchestration,
  persistence and the ``milne-lab`` CLI.
"""

from .geometry import (BACKGROUND_LAPSE, BackgroundChart, CorrectionConstants,
                       LocalGeometry, TimeFrame, background_geometry,
                       correction_constants, make_time_frame,
                       rescale_state, rescaled_christoffels,
                       time_frame_from_tau)
from .massshell import (MomentumPoint, SingularShiftError, compute_p0,
                        mass_shell_residual, normalization_report,
                        pointwise_estimates_check)
from .matter import (MatterMoments, ParticleEnsemble, RadialDistribution,
                     UnsupportedModeError, continuity_rhs, continuity_step,
                     eta_direct, moment_bound_check,
                     moments_from_distribution,
                     pressure_time_derivative_reduced, rescale_moment)
from .modes import (ModeTrajectory, corrected_energy, energy_decay_check,
                    integrate_mode, mode_sweep)
from .homogeneous import (ConstraintSingularError, HomogeneousRun,
                          evolve_homogeneous, hamiltonian_constraint_b,
                          solve_lapse_algebraic)
from .energies import (DecayFit, EnergyReport, decay_fit, monitors,
                       rho_energy, sasaki_energy, total_energy)
from .harness import (ConfigError, ScenarioConfig, emit_report, main,
                      run_scenario, validate_config)

__version__ = "0.1.0"

__all__ = [
    "BACKGROUND_LAPSE", "BackgroundChart", "CorrectionConstants",
    "LocalGeometry", "TimeFrame", "background_geometry",
    "correction_constants", "make_time_frame", "rescale_state",
    "rescaled_christoffels", "time_frame_from_tau",
    "MomentumPoint", "SingularShiftError", "compute_p0",
    "mass_shell_residual", "normalization_report",
    "pointwise_estimates_check",
    "MatterMoments", "ParticleEnsemble", "RadialDistribution",
    "UnsupportedModeError", "continuity_rhs", "continuity_step",
    "eta_direct", "moment_bound_check", "moments_from_distribution",
    "pressure_time_derivative_reduced", "rescale_moment",
    "ModeTrajectory", "corrected_energy", "energy_decay_check",
    "integrate_mode", "mode_sweep",
    "ConstraintSingularError", "HomogeneousRun", "evolve_homogeneous",
    "hamiltonian_constraint_b", "solve_lapse_algebraic",
    "DecayFit", "EnergyReport", "decay_fit", "monitors", "rho_energy",
    "sasaki_energy", "total_energy",
    "ConfigError", "ScenarioConfig", "emit_report", "main", "run_scenario",
    "validate_config",
    "__version__",
]
