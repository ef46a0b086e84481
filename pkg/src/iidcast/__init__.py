"""Broadcast capacity and flooding-delay toolkit for cell-partitioned IID mobility."""
from ._backend import BACKEND
from .analytics import (BoundReport, capacity_upper_bound, delay_lower_bound,
                        delay_lower_bound_best, flooding_bound_expander,
                        flooding_bound_geometric, flooding_bound_hybrid, iid_flooding_bound,
                        scaling_class)
from .harness import (CSV_COLUMNS, CalibrationRecord, FitResult, SweepSpec, calibrate_un,
                      fit_scaling, read_config, run_sweep)
from .meg import (ConfigurationError, ExpanderSegment, FloodingResult, FloodingState,
                  GraphSnapshot, flood_step, flood_until_complete, is_expander_exact)
from .mobility import (BINOMIAL, OCCUPANCY, NetworkConfig, exact_expected_flooding_time,
                       flood_times, make_config, newly_informed_distribution,
                       newly_informed_pmf, simulate_single_packet_flood)
from .schemes import (FcfsConfig, InstabilityError, QueueStats, md1_wait, simulate_fcfs,
                      simulate_single_hop, single_hop_rate, single_hop_wait)

__version__ = "0.1.0"
