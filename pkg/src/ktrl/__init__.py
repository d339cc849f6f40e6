"""ktrl: keypoint-tracking rewards for dexterous manipulation RL, desk scale.

A self-contained numpy stack: a small reverse-mode autodiff core, simplified
anthropomorphic hand kinematics, a synthetic human grasp-trajectory generator,
a goal-conditioned causal-transformer motion predictor, quasi-static
manipulation environments, and PPO driven by a composed
``r_track + lambda * r_task - beta * energy`` reward.
"""

__version__ = "0.1.0"
