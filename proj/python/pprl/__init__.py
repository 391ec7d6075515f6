"""Bloom-filter record encoding, similarity matching and evaluation."""

from ._pprl import (
    AttributeMismatch,
    BitVector,
    DecodeError,
    EncodingScheme,
    SchemeError,
    allocate_hash_counts,
    build_scheme,
    encode,
    encode_many,
    estimate_weights,
    evaluate_counts,
    generate,
    jaccard,
    match,
    preprocess,
    sweep,
    tokenize,
)

DEFAULT_ATTRIBUTES = ("first_name", "last_name", "gender", "birth_date", "city")

__all__ = [
    "AttributeMismatch",
    "BitVector",
    "DEFAULT_ATTRIBUTES",
    "DecodeError",
    "EncodingScheme",
    "SchemeError",
    "allocate_hash_counts",
    "build_scheme",
    "encode",
    "encode_many",
    "estimate_weights",
    "evaluate_counts",
    "generate",
    "jaccard",
    "match",
    "preprocess",
    "sweep",
    "tokenize",
]
