"""Eigenspace-projection channel estimation for RIS-aided multi-user uplinks."""

from .array_geometry import (PlanarArrayGeometry, angle_grid, beam_matrix, sampling_angles,
                             ula_matrix, ula_response, upa_matrix, upa_response)
from .baselines import LsDesign, LsSolver, OverheadParams, fourier_design, ls_estimate, overhead_table
from .channel_model import (ClusterProfile, CovarianceModel, axis_bin_masses, beam_power_profile,
                            build_cluster_models, build_covariance, resolve_beam_conflicts,
                            ris_bs_channel, sample_covariance, sample_ris_bs_channel,
                            sample_user_channel, sample_user_channels, truncate_eigenspace,
                            truncated_laplacian_pdf)
from .config import ExperimentConfig, default_config, dump_config, load_config, parse_config
from .ep_estimator import (SumEigenspace, build_reflection_schedule, build_sum_eigenspace,
                           compute_combiner, estimate_all, mmse_gain, mmse_project,
                           reconstruct_and_split)
from .errors import (ConfigurationError, DegenerateDesignError, DegenerateInputError,
                     DegenerateScheduleError, ExportError, InfeasibleConfigurationError,
                     InvalidArgumentError, RisEpError)
from .harness import (MetricRecord, Simulation, cascaded_nmse, direct_nmse, export_records,
                      read_records, run_experiment, snr_to_noise)
from .pilot_protocol import (make_frame_plan, make_pilot_book, matched_filter,
                             matched_filter_all, transmit_frame)

__version__ = "0.1.0"
