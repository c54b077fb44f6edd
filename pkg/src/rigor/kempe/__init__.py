"""Kempe-style linkages: multiple-angle forms, gadgets, assembly and tracing."""

from .builder import AngleBar, Builder, ConstructionError
from .drive import DriveError, Mechanism
from .expand import DegreeError, MultiAngleForm, Term, TrigPoly, angle_expand, form_from_terms, grid_check, parse_trig
from .gadgets import GADGET_TOL, KINDS, Gadget, GadgetError, certify, make_gadget
from .linkage import (
    GadgetRecord,
    Linkage,
    LinkageError,
    TraceError,
    TraceResult,
    assemble_curve_linkage,
    evaluate,
    fourier_linkage,
    partial_sum,
    tail_bound,
    term_linkage,
    trace,
)

__all__ = [
    "AngleBar",
    "Builder",
    "ConstructionError",
    "DegreeError",
    "DriveError",
    "GADGET_TOL",
    "Gadget",
    "GadgetError",
    "GadgetRecord",
    "KINDS",
    "Linkage",
    "LinkageError",
    "Mechanism",
    "MultiAngleForm",
    "Term",
    "TraceError",
    "TraceResult",
    "TrigPoly",
    "angle_expand",
    "assemble_curve_linkage",
    "certify",
    "evaluate",
    "form_from_terms",
    "fourier_linkage",
    "grid_check",
    "make_gadget",
    "parse_trig",
    "partial_sum",
    "tail_bound",
    "term_linkage",
    "trace",
]
