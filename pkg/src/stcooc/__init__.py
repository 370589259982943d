"""Action classification from labeled spatio-temporal interest points.

The toolkit turns each video's cloud of labeled interest points into four
complementary characterizations — a word histogram, a bag of correlations,
texture statistics of the co-occurrence matrices, and a PCA projection of the
full co-occurrence vector — and classifies them with a multi-channel
exponential-kernel SVM.  It also builds video-word vocabularies with k-means
and reduces them by greedily merging the word pair whose fusion sacrifices
the least mutual information with the class labels, scoring reduced sizes
with an accuracy/size trade-off factor.

Entry points: :func:`fit_pipeline` / :func:`predict_videos` for library use,
``stcooc`` (see :mod:`stcooc.cli`) on the command line.
"""

__version__ = "0.1.0"

from .errors import BundleError, ConfigError, FeatureFileError, StcoocError
from .datamodel import (
    Dataset,
    InterestPoint,
    LabeledVideo,
    PairRule,
    SynthClass,
    SynthSpec,
    label_points,
    load_dataset,
    save_dataset,
    synth_dataset,
    synth_spec_from_json,
)
from .vocabulary import (
    CountMatrix,
    TradeoffRow,
    Vocabulary,
    build_vocabulary,
    class_word_counts,
    kmeans,
    label_map,
    merge_loss,
    mutual_information,
    reduce_vocabulary,
    reduction_schedule,
    tradeoff_factor,
)
from .correlogram import (
    Correlogram,
    CorrelogramElement,
    KernelSet,
    brute_force_correlogram,
    correlogram,
    counting_backend,
    local_histogram,
    make_kernels,
)
from .characterize import (
    CHANNELS,
    ChannelFeatures,
    Correlations,
    PcaModel,
    boc,
    bovw,
    correlation_profiles,
    fit_correlations,
    fit_pca,
    haralick_slice,
    haralick_vector,
    pca_cooc,
)
from .classify import (
    ChannelConfig,
    EvalReport,
    PairwiseSvm,
    SvmModel,
    chi2_distance,
    combined_kernel,
    dual_objective,
    evaluate,
    fit_normalizers,
    gram_matrix,
    kernel_rows,
    l2_distance,
    svm_dual_oracle,
    svm_predict,
    svm_train,
)
from .config import PipelineConfig, SplitConfig, load_config
from .pipeline import (
    FeatureExtractor,
    FittedPipeline,
    cross_validate,
    featurize,
    fit_pipeline,
    make_folds,
    predict_videos,
    sweep_tradeoff,
)
from .bundle import (
    ModelBundle,
    bundle_from_pipeline,
    load_bundle,
    pipeline_from_bundle,
    save_bundle,
)

__all__ = [
    "__version__",
    # errors
    "StcoocError", "ConfigError", "FeatureFileError", "BundleError",
    # data model
    "InterestPoint", "LabeledVideo", "Dataset",
    "load_dataset", "save_dataset", "label_points",
    "PairRule", "SynthClass", "SynthSpec", "synth_spec_from_json", "synth_dataset",
    # vocabulary
    "Vocabulary", "CountMatrix", "TradeoffRow",
    "kmeans", "build_vocabulary", "class_word_counts", "mutual_information",
    "merge_loss", "reduce_vocabulary", "reduction_schedule", "label_map",
    "tradeoff_factor",
    # correlograms
    "KernelSet", "make_kernels", "Correlogram", "CorrelogramElement",
    "correlogram", "brute_force_correlogram", "local_histogram", "counting_backend",
    # characterizations
    "CHANNELS", "ChannelFeatures", "bovw",
    "Correlations", "correlation_profiles", "fit_correlations", "boc",
    "haralick_slice", "haralick_vector",
    "PcaModel", "fit_pca", "pca_cooc",
    # classification
    "ChannelConfig", "chi2_distance", "l2_distance", "fit_normalizers",
    "combined_kernel", "kernel_rows", "gram_matrix",
    "PairwiseSvm", "SvmModel", "svm_train", "svm_predict",
    "svm_dual_oracle", "dual_objective",
    "EvalReport", "evaluate",
    # configuration and orchestration
    "PipelineConfig", "SplitConfig", "load_config",
    "FeatureExtractor", "FittedPipeline", "fit_pipeline", "featurize",
    "predict_videos", "make_folds", "cross_validate", "sweep_tradeoff",
    # persistence
    "ModelBundle", "bundle_from_pipeline", "pipeline_from_bundle",
    "save_bundle", "load_bundle",
]
