"""quantaudit: membership-inference privacy auditing of post-training quantizers.

The toolkit trains small dense models on synthetic Gaussian-mixture tasks,
records quantized per-sample losses along each training trajectory, scores
every quantizer's privacy from the loss-gap statistics, cross-validates the
scores against a discriminator-based attack baseline and an exact
enumeration oracle, and ranks quantizers with stability statistics.
"""

from .datasets import (
    Dataset,
    MixtureSpec,
    augment_dataset,
    augment_features,
    make_mixture_spec,
    sample_dataset,
    split,
)
from .estimators import DenseNetClassifier, DenseNetRegressor
from .exceptions import QuantAuditError
from .nets import (
    AdamState,
    ModelParams,
    NetArchitecture,
    TrainConfig,
    Trajectory,
    adam_step,
    forward,
    forward_batch,
    gradient,
    per_sample_loss,
    per_sample_losses,
    train,
)
from .privacy_score import (
    REstimate,
    TrajectoryLossRecord,
    aggregate_runs,
    compute_r,
    dedup_records,
    lambda_profile,
    probe_trajectory,
    record_epoch,
)
from .quantizers import (
    PAPER_QUANTIZERS,
    QuantizedParams,
    QuantizerSpec,
    quantize,
    quantize_sign,
    quantize_ternary,
    quantize_uniform_bits,
)

__version__ = "0.1.0"
