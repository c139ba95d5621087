"""gliomorph: tumor shape morphometry from 3D segmentation masks.

Covers the computational pipeline around a segmentation model: volume and
manifest IO, preprocessing to a common frame and intensity scale,
training-set oversampling plans, largest-component post-processing, the
ASD/BEVR/MF shape features, Dice-based evaluation with reproducible folds,
and Fisher-exact radiogenomic association testing.
"""

__version__ = "0.1.0"

from .components import (
    ComponentLabeling,
    LargestComponentFilter,
    keep_largest_component,
    label_components_6,
)
from .contours import (
    BoundaryContour,
    RadialProfile,
    normalized_radial_distances,
    radial_profile_of_points,
    trace_boundary,
)
from .ellipsoid import Ellipsoid, min_bounding_ellipsoid
from .errors import (
    ConvergenceError,
    DegenerateGeometryError,
    DegenerateInputError,
    GliomorphError,
    InsufficientBoundaryError,
    InsufficientDataError,
    ManifestError,
    VolumeFormatError,
)
from .evaluation import FoldPlan, ScoreSummary, dice, make_folds, pool_and_score
from .features import (
    ShapeFeatureExtractor,
    ShapeFeatureRecord,
    angular_standard_deviation,
    asd_from_profile,
    bounding_ellipsoid_volume_ratio,
    extract_features,
    margin_fluctuation,
    mf_from_signal,
    representative_slice,
    tumor_ellipsoid,
)
from .manifest import (
    SUBTYPE_SCHEMES,
    CaseManifest,
    CaseRecord,
    load_manifest,
    save_manifest,
    validate_manifest,
)
from .phantoms import generate_phantoms
from .pipeline import PipelineConfig, PipelineResult, run_pipeline
from .preprocessing import (
    DatasetStats,
    VolumeRescaler,
    WindowLevelNormalizer,
    ZScoreNormalizer,
    compute_dataset_stats,
    rescale_to_reference,
    window_level_normalize,
    zscore,
)
from .stats import (
    HYPOTHESES,
    ContingencyTable,
    FisherResult,
    HypothesisReport,
    HypothesisSpec,
    QuartileBinner,
    bonferroni,
    build_table,
    fisher_exact,
    quartile_bin,
    run_hypotheses,
)
from .trainprep import (
    AugmentationPlan,
    SlicePlanEntry,
    Transform,
    apply_transform,
    assemble_channels,
    build_plan,
    channel_layout,
    filter_empty_slices,
    plan_oversampling,
)
from .volume import (
    KIND_INTENSITY,
    KIND_MASK,
    VoxelVolume,
    load_slice_stack,
    load_volume,
    read_volume_header,
    write_volume,
)
