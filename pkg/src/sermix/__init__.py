"""sermix: a small self-attention emotion classifier for variable-length
sequences, trained with length-adaptive label mixing and an argmax-gated
center loss, plus a leave-one-session-out evaluation harness.

The encoder hot kernels run on a compiled core when the extension is built
and fall back to pure numpy otherwise; see :mod:`sermix.kernels`.
"""

from .augment import (
    AugmentChain,
    ClippingDistortion,
    Gain,
    GaussianNoise,
    PolarityInversion,
    TimeMask,
)
from .augment import apply as apply_augment
from .data import (
    DEFAULT_EMOTIONS,
    EmotionSet,
    Manifest,
    ManifestEntry,
    SoftLabel,
    SpeechSample,
    SynthSpec,
    generate_synthetic,
    load_manifest,
    one_hot,
    read_signal,
    write_manifest,
    write_signal,
)
from .errors import NumericError, ValidationError
from .evaluate import (
    ConfusionMatrix,
    FoldPlan,
    FoldResult,
    LosoResult,
    evaluate_model,
    make_loso_folds,
    predict,
    run_loso,
    unweighted_accuracy,
    weighted_accuracy,
)
from .gradcheck import GradcheckReport, run_gradcheck
from .losses import (
    CenterBank,
    LossConfig,
    center_loss,
    joint_loss,
    recognition_loss,
    update_centers,
)
from .mixup import (
    MixedSample,
    MixupPolicy,
    adaptive_label_weight,
    mix_batch,
    mix_labels_adaptive,
    mix_labels_conventional,
    mix_signals,
)
from .model import (
    FeatureSequence,
    ModelConfig,
    PooledFeature,
    Prediction,
    StridedFrontend,
    backward,
    count_params,
    forward,
    init_params,
    load_params,
    save_params,
)
from .training import Adam, EpochRecord, TrainConfig, TrainReport, TrainResult, lr_at_epoch, train

__version__ = "0.1.0"
