"""Encode metric structures as pure metric spaces and decode them back.

Exact rational arithmetic throughout; see :mod:`metcodec.transforms` for the
normalization pipeline, :mod:`metcodec.encoder` / :mod:`metcodec.decoder` for
the encoding itself and :mod:`metcodec.verifier` for checking.
"""

from .decoder import decode, find_tag, recover_structure
from .encoder import EncodedSpace, encode, encode_finite_sorts, rescale
from .numerics import IntervalValue, PLFunction, as_rational, format_rational
from .structures import FinitePresentation, OraclePresentation, Signature, load_structure, validate_structure
from .transforms import invert_pipeline, normalize_pipeline
from .verifier import check_theory, check_triangle

__version__ = "0.1.0"

__all__ = [
    "EncodedSpace", "FinitePresentation", "IntervalValue", "OraclePresentation", "PLFunction", "Signature",
    "as_rational", "check_theory", "check_triangle", "decode", "encode", "encode_finite_sorts", "find_tag",
    "format_rational", "invert_pipeline", "load_structure", "normalize_pipeline", "recover_structure",
    "rescale", "validate_structure",
]
