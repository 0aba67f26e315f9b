"""Order-restricted soft labels for knowledge distillation on mixed samples."""

from .augment import PatchBox, cutmix, mixup, sample_gamma
from .diagnostics import (ViolationReport, calibrate_fraction, kendall_tau_known,
                          top2_contains_original, violation_report)
from .isotonic import BlockPartition, IsotonicResult, adapted_irt, brute_force_projection, count_violations
from .losses import (DistillConfig, Mode, cross_entropy, kd_aug_loss, kd_i_loss, kd_loss, kd_p_loss,
                     softmax_t)
from .penalty import order_penalty, order_penalty_gradient
from .types import (LabelDistribution, MixedHardLabel, OrderTree, SampleTensor, Space,
                    build_order_tree, expand_hard_label)

__version__ = "0.1.0"
