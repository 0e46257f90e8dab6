"""Parameter synthesis for parametric Bayesian networks via parametric Markov chains."""

from .algebra import Parameter, ParameterSpace, Polynomial, RationalFunction, Region
from .bn import Assignment, Pbn, Query, classify_subclass, instantiate, joint_oracle, topological_order, validate_pbn
from .pbif_io import load_pbn, parse_pbif, parse_query, render_pbif
from .pmc import conditional_function, query_prob, sensitivity_function, sensitivity_value
from .transform import build_evidence_pmc, build_pmc

__version__ = "0.1.0"


def data_path(name: str) -> str:
    """Path of a bundled example model."""
    from importlib import resources

    return str(resources.files(__package__) / "data" / name)
