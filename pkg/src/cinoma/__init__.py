"""Constructive-interference multiple access (CoMA) versus NOMA and OMA for a
two-user MISO downlink pair: precoder design, symbol-level simulation and
receiver complexity counts."""

from .channel import (ChannelVector, PairScenario, PrecoderPair, PskConstellation,
                      ci_region_residual, coma_snrs, noma_sic_sinr, noma_sinrs, order_pair,
                      relative_phases, sample_channel)
from .errors import InfeasibleError, RandomizationError, SolverError
from .powermin import (NomaDesign, ScaState, coma_constraint_slack, noma_constraint_slack,
                       solve_power_min_coma, solve_power_min_noma, solve_power_min_oma,
                       taylor_lower_bound)
from .receiver import (ComplexityReport, SimReport, ci_receive, complexity_coma, complexity_noma,
                       complexity_report, ml_detect, monte_carlo_ser, sic_receive)
from .sermin import (FractionalPieces, MaxMinState, ci_snr, coma_min_snr, noma_min_snr,
                     ser_from_snr, sermin_coma_sweep, solve_sermin_coma, solve_sermin_noma,
                     update_y)

__version__ = "0.1.0"
