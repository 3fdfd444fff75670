from planner.merge_rules import Policy
from policy.base import ObstaclePolicy


class CooperativePolicy(ObstaclePolicy):
    """Adjusts speed on request when the needed change is reachable within the cooperation window."""

    policy = Policy.COOPERATIVE
