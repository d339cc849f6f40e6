"""Comparison methods: adversarial keypoint matching and kinematic
retargeting with demonstration-guided policy optimization."""

from .adversarial import (Discriminator, DiscriminatorConfig,
                          adversarial_reward, make_windows,
                          train_discriminator)
from .demo_guided import (DemoGuidedConfig, DemoSet, assemble_demo_set,
                          demo_guided_update)
from .retarget import (RetargetedTrajectory, RetargetError, RetargetResult,
                       read_retargeted, retarget_dataset, retarget_frame,
                       write_retargeted)

__all__ = [
    "DemoGuidedConfig",
    "DemoSet",
    "Discriminator",
    "DiscriminatorConfig",
    "RetargetError",
    "RetargetResult",
    "RetargetedTrajectory",
    "adversarial_reward",
    "assemble_demo_set",
    "demo_guided_update",
    "make_windows",
    "read_retargeted",
    "retarget_dataset",
    "retarget_frame",
    "train_discriminator",
    "write_retargeted",
]
