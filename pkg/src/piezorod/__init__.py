"""piezorod: 1D thermo-piezoelectric rod oscillations with temperature-
dependent hysteresis.

The package splits into five layers: play-operator hysteresis (`hysteresis`),
weight densities with analytic primitives (`density`), the feedback inversion
(`inversion`), the spectral Galerkin rod solver (`solver`) and the scenario
harness (`config`, `cli`, `loops`, `studies`).  The admissibility checker
lives in `hypotheses`.
"""

from .density import (CanonicalDensity, TabulatedDensity, UniformTestDensity,
                      density_eval, load_tabulated_density,
                      make_canonical_density, threshold_grid)
from .errors import (BracketError, CapabilityError, ConfigError,
                     ConvergenceError, DensityConstructionError,
                     GridMismatchError, InvalidInitialDataError,
                     InvalidMaterialError, InvalidThresholdError,
                     PiezorodError, SolverError)
from .hypotheses import HypothesisReport, SamplingSpec, hypothesis_report
from .hysteresis import (HystOutputs, PlayBank, PlayState, bank_advance,
                         dissipation_increment, eval_P, eval_U,
                         eval_theta_derivs, hyst_outputs, play_init,
                         play_update, step_energy_identity_check)
from .inversion import (FeedbackCoeffs, LipschitzCertificate,
                        estimate_inversion_constants, feedback_coeffs,
                        lipschitz_certificate, solve_q)
from .materials import MaterialParams
from .config import (ScenarioConfig, config_from_preset, config_hash,
                     parse_config, validate_config)
from .solver import (Discretization, Fields, GalerkinState, RodSolver,
                     SimulationResult, StepDiagnostics, TraceRecord,
                     load_checkpoint, run_simulation, save_checkpoint,
                     stress_bracket, thermal_sources)
from .loops import loop_area, q_loop_trace, strain_loop_trace, triangle_drive
from .studies import converge_study

__version__ = "0.1.0"
