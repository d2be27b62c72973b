"""Information conservation for repeated quantum measurements.

Finite-dimensional instruments and POVMs, the post-processing preorder
decided by linear programming, the photon-counting and quantum-counter
detector models, and Monte Carlo sampling of measurement sequences.
"""

from .conservation import (conservation_check, conservation_invariance_check, consistency_table,
                           finite_composition, kolmogorov_consistency, minimality_witness)
from .errors import *  # noqa: F401,F403
from .instrument import Instrument, compose, compose_povm, induced_povm, n_fold
from .models import (ModelParams, number_povm, p_pc, p_pc_k, p_qc, p_qc_intensity,
                     photon_counting_instrument, quantum_counter_instrument, x_povm)
from .outcomes import MarkovKernel, OutcomeSpace, product_space
from .povm import Povm, check_equivalent, find_post_processing, is_fuzzier, post_process
from .simulate import FockChain, ensemble_stats, sample_trajectory

__version__ = "0.1.0"
