"""Gaze-contingent attention pooling for search-target prediction.

Converts eye-fixation logs into density maps over convolutional feature
grids, weights the features by them, classifies per image, and
integrates evidence across the images of a collage. Ships an evaluation
harness, a synthetic planted-signal dataset generator, binary tensor
and manifest file formats, heatmap export, and a CLI.
"""

from gazepool.collage import (
    AttributeCollageResult,
    CollageResult,
    ImageEvidence,
    IntegrationConfig,
    integrate,
    run_collage,
    run_collage_attributes,
)
from gazepool.encoding import (
    EncodingConfig,
    FixationAssignment,
    GridFixations,
    assign_fixations,
    build_density_map,
    render_fixation,
    uniform_density_map,
)
from gazepool.errors import FormatError, GazePoolError, PipelineError
from gazepool.evaluation import (
    EvalCondition,
    EvalReport,
    Trial,
    fixation_count_curve,
    inject_noise,
    noise_sweep,
    run_condition,
    run_condition_grid,
    sigma_sweep,
    topn_accuracy,
)
from gazepool.kernels import backend_name
from gazepool.pooling import (
    AttendedClassActivationMap,
    GazeWeightedFeatureMap,
    acam,
    classify,
    gaze_weighted_feature_map,
    global_average_pool,
    pooled_features,
    predict_image,
    present_probability,
    rank_attributes,
    softmax,
)
from gazepool.synth import SynthDataset, SynthSpec, generate_dataset
from gazepool.types import (
    ClassifierHead,
    CollageEntry,
    CollageLayout,
    FeatureMap,
    Fixation,
    FixationDensityMap,
    FixationLog,
    PredictionResult,
    SearchTask,
    validate,
)

__version__ = "0.1.0"
