"""Perceptual grouping from the neurogeometry of the primary visual cortex.

The package estimates the SE(2) Fokker-Planck connectivity kernel by Monte
Carlo, builds affinity matrices over oriented stimuli, extracts perceptual
units as dominant eigenvectors and simulates the mean-field activity
equation restricted to the stimulated domain.
"""
from .kernel import (FPParams, GridSpec, KernelGrid, accumulate_gamma, distance_estimate,
                     estimate_gamma, estimate_omega, eval_omega, omega_matrix, sample_paths,
                     smooth, symmetrize)
from .lifting import (ContourSpec, FilterBank, StimulusSet, arc_through, fhh_scene, gabor_at,
                      generate_fhh_stimulus, lift_image, two_unit_scene)
from .meanfield import (ForcingForm, MeanFieldParams, check_weak_connectivity,
                        outside_domain_stays_zero, simulate_nonlinear, simulate_reduced,
                        stability_threshold, stationary_state, transfer)
from .se2 import (AngleMode, CorticalPoint, angle_distance, compose, inverse, reflect,
                  relative_displacement)
from .spectral import (AffinityMatrix, ConvergenceError, PerceptualUnit, SpectralResult,
                       build_affinity, extract_units, full_spectrum, rank_one_approx,
                       top_eigenpair)

__version__ = "0.1.0"
