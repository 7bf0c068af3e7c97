"""Coding tools for compound and arbitrarily varying classical-quantum channels."""

from .avcq import Avcq, DiscreteRandomCode, is_m_symmetrizable, robustify, worst_case_eval
from .channels import CqChannel, InputDistribution
from .coding import Code, Povm, compound_code, eval_code
from .compound import CompoundSet, compound_capacity, minimax_check
from .measures import DIVERGENT, holevo, relative_entropy, von_neumann_entropy
from .zero_error import KrausChannel, damping_channel, zero_error_size

__version__ = "0.1.0"
