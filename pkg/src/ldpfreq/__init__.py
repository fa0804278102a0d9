"""Multiple frequency estimation under local differential privacy."""

from .audit import compose, enumerate_channel, realized_epsilon
from .harness import ExperimentConfig, ExperimentResult, gen_dataset, run_experiment
from .long_multidim import LongMdimConfig, LongMdimSolution
from .longitudinal import LongProtocol, make_dbit, solve_l_grr, solve_l_ue
from .multidim import MdimConfig, MdimSolution, amplify
from .oracles import Oracle, estimate_pure, make_grr, make_lh, make_ss, make_ue

__version__ = "0.1.0"
