from planner.merge_rules import Policy
from policy.base import ObstaclePolicy


class NonCooperativePolicy(ObstaclePolicy):
    """Always answers, always refuses."""

    policy = Policy.NON_COOPERATIVE
