from .key import StegoKey
from .rs import RS_31_15, RSCode, RSDecodeError
from .stc import (
    EmbeddingError, StcKey, binary_embed, binary_extract, parity_check_matrix,
    stc_embed, stc_extract, ternary_embed, ternary_extract,
)

__all__ = [
    "StegoKey", "RS_31_15", "RSCode", "RSDecodeError", "EmbeddingError", "StcKey",
    "binary_embed", "binary_extract", "parity_check_matrix", "stc_embed",
    "stc_extract", "ternary_embed", "ternary_extract",
]
