from ._fsp import (
    DataError,
    NumericalError,
    decode_wav,
    default_config_json,
    extract_features,
    generate_corpus,
    mismatch,
    mix,
    read_wav,
    run_experiment,
    word_accuracy,
    write_wav,
)

__all__ = [
    "DataError",
    "NumericalError",
    "decode_wav",
    "default_config_json",
    "extract_features",
    "generate_corpus",
    "mismatch",
    "mix",
    "read_wav",
    "run_experiment",
    "word_accuracy",
    "write_wav",
]
