"""Spatio-temporal trigger DSL: parser, evaluator, and attacker matching."""

from importlib import resources

from .dsl import (
    Atom,
    BoolOp,
    Command,
    Formula,
    Ite,
    Ref,
    TriggerError,
    TriggerIndexError,
    TriggerSemanticError,
    TriggerSpec,
    TriggerSyntaxError,
    format_trigger,
    formula_atoms,
    formula_offsets,
)
from .parser import parse_trigger
from .runtime import attacker_step, earliest_atoms, eval_phi, match_precondition, xi_feasible

BUNDLED_TRIGGERS = (
    "highway_merge_brake",
    "highway_weave_brake",
    "twoway_surge_brake",
    "roundabout_feint",
)


def load_bundled(name: str) -> TriggerSpec:
    """Parse one of the triggers shipped with the package."""
    if name not in BUNDLED_TRIGGERS:
        raise KeyError(f"unknown bundled trigger {name!r}; have {BUNDLED_TRIGGERS}")
    text = resources.files(__package__).joinpath("files", f"{name}.trg").read_text("utf-8")
    return parse_trigger(text)


def bundled_path(name: str) -> str:
    return str(resources.files(__package__).joinpath("files", f"{name}.trg"))


__all__ = [
    "Atom",
    "BoolOp",
    "Command",
    "Formula",
    "Ite",
    "Ref",
    "TriggerError",
    "TriggerIndexError",
    "TriggerSemanticError",
    "TriggerSpec",
    "TriggerSyntaxError",
    "format_trigger",
    "formula_atoms",
    "formula_offsets",
    "parse_trigger",
    "eval_phi",
    "earliest_atoms",
    "match_precondition",
    "xi_feasible",
    "attacker_step",
    "BUNDLED_TRIGGERS",
    "load_bundled",
    "bundled_path",
]
