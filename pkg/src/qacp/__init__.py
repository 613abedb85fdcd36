"""qACP with the shadow constant and entanglement merge.

Modules: ``terms``/``parser``/``model`` (term language and specification
files), ``quantum`` (density matrices, Kraus operations), ``sos`` (transition
rules and LTS construction), ``bisim`` (strong, branching and rooted
branching bisimilarity), ``rewrite`` (directed axioms modulo AC of +),
``e91`` (the E91 protocol model) and ``cli``.
"""

from .bisim import (
    EquivalenceResult, branching_bisim, compare, rooted_branching_bisim, strong_bisim,
)
from .e91 import build_e91, verify_e91
from .model import CommunicationFunction, Model, RecursionSpec
from .parser import ParseError, format_spec, parse_spec, parse_term
from .quantum import DensityMatrix, QuantumOperationDef, apply_operation, bell_state
from .rewrite import ac_canonical, normal_form, rewrite_step, weight
from .sos import Configuration, Lts, build_lts, step
from .terms import render

__version__ = "0.1.0"

__all__ = [
    "EquivalenceResult", "branching_bisim", "compare", "rooted_branching_bisim", "strong_bisim",
    "build_e91", "verify_e91", "CommunicationFunction", "Model", "RecursionSpec", "ParseError",
    "format_spec", "parse_spec", "parse_term", "DensityMatrix", "QuantumOperationDef",
    "apply_operation", "bell_state", "ac_canonical", "normal_form", "rewrite_step", "weight",
    "Configuration", "Lts", "build_lts", "step", "render",
]
