"""Temporal-logic causal diagrams for faster tabular reinforcement learning.

Compile a causal diagram to a DFA, classify task x causal configurations as
causally accepting or rejecting, and stop Q-learning episodes early on them.
"""

from .automata import Alphabet, Dfa, compile_ltlf, minimize, product
from .causal import Configuration, Verdict, check_compatibility, classify, classify_all
from .environments import LabeledMdp, load_environment
from .learner import LearnerConfig, QFunctionBank, train
from .ltlf import evaluate, parse_formula, timing_profile
from .tlcd import CausalEdge, TlCd, parse_tlcd, to_causal_dfa, to_formula, validate

__all__ = [
    "Alphabet", "Dfa", "compile_ltlf", "minimize", "product",
    "Configuration", "Verdict", "check_compatibility", "classify", "classify_all",
    "LabeledMdp", "load_environment",
    "LearnerConfig", "QFunctionBank", "train",
    "evaluate", "parse_formula", "timing_profile",
    "CausalEdge", "TlCd", "parse_tlcd", "to_causal_dfa", "to_formula", "validate",
]
