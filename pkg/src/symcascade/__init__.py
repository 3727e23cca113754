"""Exact constrained MAP inference and adversarial cascade analysis for
factorized discrete models restricted by a logical/arithmetic constraint."""

from ._version import __version__
from .adversary import (
    AttackResult,
    CascadeFinding,
    CascadeReport,
    Norm,
    Perturbation,
    Stability,
    apply_perturbation,
    cascade_report,
    is_adversarial,
    minimal_flip_radius,
    search_cascades,
    stability_radius,
)
from .errors import (
    ArityError,
    DistSumError,
    DuplicateName,
    FileSyntaxError,
    FormulaSyntaxError,
    IntegerOverflow,
    ModelError,
    ModelMismatch,
    ParseDiagnostic,
    SimplexViolation,
    SymcascadeError,
    UnknownVariable,
    ZeroPartition,
)
from .estimator import ConstrainedMAP
from .formula import Formula, enumerate_models, evaluate, parse, to_text
from .inference import (
    PartitionValue,
    PosteriorResult,
    joint_unconstrained,
    map_constrained,
    map_unconstrained,
    marginal_constrained,
    partition_z,
    posterior,
)
from .io import dump_model, load_model, model_digest, read_model
from .model import (
    CategoricalDist,
    DomainSpec,
    Model,
    VariableDecl,
    assignments,
    build_model,
    declare,
)

__all__ = [name for name in dir() if not name.startswith("_")]
