"""Model-driven arithmetic coding for block intra prediction modes."""

from .codec import DecodeResult, EncodeResult, decode_image, encode_image
from .errors import (
    ArmDivergenceError,
    ChecksumError,
    CorruptStreamError,
    FormatError,
    MacodecError,
    StreamExhaustedError,
)
from .intra import (
    MODE_COUNT,
    References,
    binarize_mode,
    build_references,
    debinarize_mode,
    derive_mpm,
    mode_decision,
    predict,
)
from .nn import forward, softmax
from .pipeline import TrainingRecord, evaluate, extract_records, read_macd, write_macd
from .rangecoder import (
    PROB_BITS,
    PROB_SCALE,
    BinaryContext,
    FrequencyTable,
    RangeDecoder,
    RangeEncoder,
    bit_cost,
    quantize_dist,
    uniform_table,
)
from .weights import ModelWeights, load_weights, save_weights

__all__ = [
    "ArmDivergenceError",
    "ChecksumError",
    "CorruptStreamError",
    "FormatError",
    "MacodecError",
    "StreamExhaustedError",
    "PROB_BITS",
    "PROB_SCALE",
    "MODE_COUNT",
    "BinaryContext",
    "FrequencyTable",
    "RangeDecoder",
    "RangeEncoder",
    "References",
    "ModelWeights",
    "TrainingRecord",
    "EncodeResult",
    "DecodeResult",
    "bit_cost",
    "quantize_dist",
    "uniform_table",
    "binarize_mode",
    "debinarize_mode",
    "derive_mpm",
    "build_references",
    "mode_decision",
    "predict",
    "forward",
    "softmax",
    "encode_image",
    "decode_image",
    "evaluate",
    "extract_records",
    "read_macd",
    "write_macd",
    "load_weights",
    "save_weights",
]

__version__ = "0.1.0"
