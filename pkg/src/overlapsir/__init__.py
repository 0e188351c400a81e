"""SIR final-outcome engine for populations with two overlapping group structures.

Households of size h sit inside workplaces of size w = d*h; each individual
is independently a mover with probability theta and movers are reallocated
uniformly onto the vacated workplace spots, so theta tunes the overlap
between the two partitions.  The package simulates final outcomes directly,
and computes the limiting major-outbreak probability, final size and the
threshold parameters through branching-process fixed points over
within-complex offspring tables.
"""

from .params import (ModelParams, SeedSpec, ConfigError, from_reparam,
                     to_reparam, parse_config_text, load_config)
from .periods import InfectiousPeriod
from .population import Population, Complex, generate, extract_complexes
from .simulate import (Outcome, BatchSummary, simulate_final, run_batch,
                       estimate_rho_z, clump_susset_census, default_cutoff)
from .structure import (SeededComplexStructure, sample_structure,
                        enumerate_structures, rate_matrix, fine_type_probs)
from .engine import (run_within_complex, susset_within_complex,
                     run_complex_batch, WithinComplexOutcome)
from .exact import exact_outcome_pmf, exact_coarse_pmf, final_state_pmf
from .tables import (CoarseTable, TableSet, FineLibrarySet, build_table_set,
                     build_coarse_table, exact_coarse_table,
                     build_fine_libraries)
from .analytics import (AnalyticsReport, analyze, compute_R_L, compute_R_star,
                        solve_final_size_z, compute_rho, solve_pi_g0,
                        solve_progeny_pair, f_S, f_C, perron_root_2x2,
                        NonConvergence)

__version__ = "0.1.0"
