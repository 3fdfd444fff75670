from __future__ import annotations

from typing import TYPE_CHECKING, ClassVar

from planner.merge_rules import obstacle_respond

if TYPE_CHECKING:
    from planner.domain import RssParams, VehicleState
    from planner.merge_rules import CoopMessage, CoopResponse, Policy


class ObstaclePolicy:
    """Driver of one obstacle vehicle; subclasses pick the cooperation policy ``obstacle_respond`` applies."""

    policy: ClassVar[Policy]

    def respond(  # noqa: PLR0913
        self,
        msg: CoopMessage,
        obstacle: VehicleState,
        obstacle_params: RssParams,
        *,
        rho_c: float,
        rho_m: float,
        v_max: float,
        now: float,
    ) -> CoopResponse:
        """Answer a cooperation request addressed to ``obstacle``."""
        return obstacle_respond(
            msg, obstacle, self.policy, obstacle_params, rho_c=rho_c, rho_m=rho_m, v_max=v_max, now=now
        )

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"
