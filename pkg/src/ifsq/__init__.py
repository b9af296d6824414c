"""Finite scalar quantization with distribution-matched bounding."""

from .quantizer import (
    IFSQ,
    TANH,
    BoundParams,
    LevelSpec,
    QuantizedLatent,
    bound,
    bound_derivative,
    codebook_size,
    decode_index,
    dequantize,
    encode_index,
    quantize,
    quantize_ste,
)

__all__ = [
    "IFSQ",
    "TANH",
    "BoundParams",
    "LevelSpec",
    "QuantizedLatent",
    "bound",
    "bound_derivative",
    "codebook_size",
    "decode_index",
    "dequantize",
    "encode_index",
    "quantize",
    "quantize_ste",
]
