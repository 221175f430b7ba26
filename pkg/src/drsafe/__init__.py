"""Distributionally robust safe-stabilizing control synthesis with fast feasibility certificates."""

from .dro import AmbiguityConfig, SampleSet, SynthesisProblem, cvar_empirical, radius_schedule, reduce_to_soc
from .exceptions import DrsafeError
from .feasibility import (
    FeasibilityVerdict,
    SlackCertificate,
    VerdictKind,
    check_necessary,
    check_sufficient_single,
    check_sufficient_slack,
)
from .model import (
    CertificateFunction,
    CertificateKind,
    ConstraintData,
    UncertainAffineModel,
    assemble_constraint,
    eval_G,
    unicycle_model,
)
from .socp.synthesis import ControlResult, Form, synthesize

__version__ = "0.1.0"

__all__ = [
    "AmbiguityConfig",
    "CertificateFunction",
    "CertificateKind",
    "ConstraintData",
    "ControlResult",
    "DrsafeError",
    "FeasibilityVerdict",
    "Form",
    "SampleSet",
    "SlackCertificate",
    "SynthesisProblem",
    "UncertainAffineModel",
    "VerdictKind",
    "assemble_constraint",
    "check_necessary",
    "check_sufficient_single",
    "check_sufficient_slack",
    "cvar_empirical",
    "eval_G",
    "radius_schedule",
    "reduce_to_soc",
    "synthesize",
    "unicycle_model",
]
