from planner.merge_rules import Policy
from policy.base import ObstaclePolicy


class SilentPolicy(ObstaclePolicy):
    """No V2V unit: requests go unanswered and the ego has to time out."""

    policy = Policy.SILENT
