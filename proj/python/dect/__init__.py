"""Python bindings for the dect decoder library."""

from ._dect import (
    CalibrationDegenerate,
    CalibrationRecord,
    DecoderKind,
    DecoderModel,
    DectError,
    FeatureRecord,
    FeatureSet,
    MissingClassError,
    NumericsError,
    ParseError,
    SchemaError,
    ScoreSpace,
    SyntheticSpec,
    TrainingConfig,
    TrainResult,
    TrialReport,
    calibrate,
    evaluate,
    fuse_and_softmax,
    load_calibration_file,
    load_feature_file,
    make_synthetic,
    predict,
    run_trial,
    score,
    train,
)

__version__ = "0.1.0"
