"""Fixed-step scenario engine: ego planner, obstacle drivers, V2V channel and vehicle dynamics."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from logging_config import get_logger
from planner.domain import VehicleState, bumper_gap
from planner.merge_rules import (
    MERGING_MODES,
    CoopMessage,
    CoopReply,
    Gap,
    MergeContext,
    MergeDecision,
    Mode,
    NegotiationStatus,
    Request,
    ResponseKind,
    decide,
)
from planner.potential_field import FieldMode, Scene, field_grid, force_arrows
from planner.rss import longitudinal_safe_distance, safe_distances
from planner.sigmoid_planner import (
    TAIL_SPAN,
    CpInfeasibleError,
    SigmoidPath,
    generate_path,
    plan_crossing,
    select_cp,
    select_kappa,
    straight_path,
)
from sim.channel import Envelope, channel_step
from sim.metrics import Metrics, SettlementDetector, compute_metrics
from sim.trace import DecisionRecord, FieldDump, MessageEvent, PathDump, StepRecord, Trace, VehicleSpec
from utils import build_policy
from vehicle.control import LOOKAHEAD_MAX, speed_controller, track_path
from vehicle.model import step_dynamics

if TYPE_CHECKING:
    from config.schema import ScenarioConfig, VehicleConfig
    from planner.domain import RssParams
    from policy.base import ObstaclePolicy

logger = get_logger(__name__)

RUN_OUT_AFTER_SETTLE = 2.0
STRAIGHT_HORIZON = 400.0
TIME_EPS = 1e-9
FIELD_COLUMNS = 81
FIELD_ROWS = 36
FORCE_COLUMNS = 21
FORCE_ROWS = 5


@dataclass(frozen=True, slots=True)
class CoopProfile:
    """Speed an accepting obstacle settles at, reached at a constant rate."""

    v_target: float
    accel_limit: float
    request: Request


class ScenarioRun:
    """Mutable state of one run. ``run_scenario`` is the entry point."""

    def __init__(self, config: ScenarioConfig) -> None:
        self.config = config
        self.lane = config.lane
        self.dt = config.dt
        delay = config.channel.delay
        self.vehicle_cfg: dict[str, VehicleConfig] = {v.vid: v for v in config.vehicles}
        self.rss: dict[str, RssParams] = {v.vid: v.params.rss.with_lag(delay) for v in config.vehicles}
        self.policies: dict[str, ObstaclePolicy] = {v.vid: build_policy(v.policy) for v in config.obstacles}
        self.states: dict[str, VehicleState] = {v.vid: v.initial for v in config.vehicles}
        self.ego_id = config.ego.vid
        self.context = MergeContext(v_cruise=config.ego.cruise_speed)
        self.profiles: dict[str, CoopProfile] = {}
        self.pending: list[Envelope] = []
        self.seq = 0
        self.rng = np.random.default_rng(config.channel.seed)
        self.pending_events = list(config.events)
        self.path = straight_path(config.ego.initial.x, self.lane.side_center, STRAIGHT_HORIZON, config.planner.spacing)
        self.path_key: tuple[Mode, str | None, str | None] | None = None
        self.last_decision: MergeDecision | None = None
        self.trace = Trace(
            scenario=config.name,
            dt=config.dt,
            ego_id=self.ego_id,
            lane=self.lane,
            vehicles={
                v.vid: VehicleSpec(length=v.initial.length, width=v.initial.width, rss=self.rss[v.vid])
                for v in config.vehicles
            },
        )
        self.settlement = SettlementDetector(self.lane.main_center)

    @property
    def ego(self) -> VehicleState:
        return self.states[self.ego_id]

    def obstacles(self) -> list[VehicleState]:
        return sorted((s for vid, s in self.states.items() if vid != self.ego_id), key=lambda s: s.x)

    # -- events and channel -------------------------------------------------

    def _apply_events(self, t: float) -> None:
        while self.pending_events and self.pending_events[0].t <= t + TIME_EPS:
            event = self.pending_events.pop(0)
            for vid in event.despawn:
                if self.states.pop(vid, None) is not None:
                    self.profiles.pop(vid, None)
                    logger.info("Despawned %s at %.2f s", vid, t)

    def _send(self, payload: CoopMessage | CoopReply, t: float) -> None:
        envelope = Envelope(payload=payload, sent_at=t, seq=self.seq)
        self.seq += 1
        self.pending.append(envelope)
        self.trace.messages.append(MessageEvent(t=t, event="sent", payload=envelope.to_dict()))
        logger.info("Sent %s #%d from %s to %s", envelope.kind, envelope.seq, payload.sender_id, payload.receiver_id)

    def _exchange(self, t: float) -> None:
        channel = self.config.channel
        result = channel_step(self.pending, t, channel.delay, channel.drop_probability, self.rng)
        self.pending = result.pending
        for envelope in result.dropped:
            self.trace.messages.append(MessageEvent(t=t, event="dropped", payload=envelope.to_dict()))
        for envelope in result.delivered:
            self.trace.messages.append(MessageEvent(t=t, event="delivered", payload=envelope.to_dict()))
            if isinstance(envelope.payload, CoopMessage):
                self._answer(envelope.payload, t)
            else:
                self._receive_reply(envelope.payload)

    def _answer(self, msg: CoopMessage, t: float) -> None:
        obstacle = self.states.get(msg.receiver_id)
        if obstacle is None:
            return
        merge = self.config.merge
        response = self.policies[msg.receiver_id].respond(
            msg,
            obstacle,
            self.rss[msg.receiver_id],
            rho_c=merge.rho_c,
            rho_m=merge.rho_m,
            v_max=self.vehicle_cfg[msg.receiver_id].params.v_max,
            now=t,
        )
        logger.info("%s answered %s: %s", msg.receiver_id, msg.request, response.kind)
        if response.kind is ResponseKind.NO_REPLY:
            return
        if response.kind is ResponseKind.ACCEPT and response.v_obs_star is not None:
            self.profiles[msg.receiver_id] = CoopProfile(
                v_target=response.v_obs_star, accel_limit=response.accel_limit or 0.0, request=msg.request
            )
        reply = CoopReply(
            sender_id=msg.receiver_id,
            receiver_id=msg.sender_id,
            kind=response.kind,
            v_obs_star=response.v_obs_star,
            timestamp=t,
        )
        self._send(reply, t)

    def _receive_reply(self, reply: CoopReply) -> None:
        ctx = self.context
        if ctx.status is not NegotiationStatus.PENDING or reply.sender_id != ctx.target_id:
            return
        if reply.kind is ResponseKind.ACCEPT:
            self.context = replace(ctx, status=NegotiationStatus.ACCEPTED, v_obs_star=reply.v_obs_star)
        else:
            self.context = replace(ctx, status=NegotiationStatus.REJECTED)

    # -- ego planning -------------------------------------------------------

    def _cp_check(self, gap: Gap, v_star: float) -> bool:
        merge, settings = self.config.merge, self.config.planner
        fixed = None
        if self.path_key == (Mode.MERGE_NON_COOP, *gap.key) and self.path.w != 0:
            fixed = self.path.p_c
        plan = plan_crossing(
            self.ego, v_star, gap.follower, gap.leader, self.rss, merge.rho_m, self.lane, settings, fixed=fixed
        )
        return plan.feasible

    def _decide(self, t: float) -> MergeDecision:
        ego_cfg = self.vehicle_cfg[self.ego_id]
        return decide(
            self.ego,
            self.obstacles(),
            self.config.merge,
            self.rss,
            self.lane,
            t,
            self.config.coop_enabled,
            self.context,
            v_max=ego_cfg.params.v_max,
            a_lat_comfort=self.config.planner.a_lat_comfort,
            cp_check=self._cp_check,
        )

    def _update_context(self, decision: MergeDecision, t: float) -> None:
        ctx = self.context
        merge = self.config.merge
        if decision.message is not None:
            msg = decision.message
            ctx = replace(
                ctx,
                status=NegotiationStatus.PENDING,
                first_sent=t,
                target_id=msg.receiver_id,
                request=msg.request,
                coop_follower_id=decision.follower_id,
                coop_leader_id=decision.leader_id,
                p_c=msg.p_c,
                d_rss_star=msg.d_rss_star,
                v_start=self.ego.speed_long,
            )
            self._send(msg, t)
        elif (
            ctx.status is NegotiationStatus.PENDING
            and decision.mode is not Mode.NEGOTIATE_COOP
            and ctx.first_sent is not None
            and t - ctx.first_sent >= merge.rho_c - TIME_EPS
        ):
            logger.info("Negotiation with %s timed out after %.2f s", ctx.target_id, t - ctx.first_sent)
            ctx = replace(ctx, status=NegotiationStatus.REJECTED)

        if decision.mode in MERGING_MODES:
            ctx = replace(
                ctx,
                committed_mode=decision.mode,
                committed_follower_id=decision.follower_id,
                committed_leader_id=decision.leader_id,
                infeasible_since=None,
            )
        elif decision.mode is Mode.ABORT:
            logger.warning("Merge into gap %s aborted at %.2f s", decision.target_gap, t)
            ctx = replace(ctx, committed_mode=None, committed_follower_id=None, committed_leader_id=None)
        if decision.mode in {Mode.LANE_KEEP, Mode.ABORT, Mode.NEGOTIATE_COOP} and t >= merge.t_m_dec - TIME_EPS:
            if ctx.infeasible_since is None:
                ctx = replace(ctx, infeasible_since=t)
        if decision.mode is Mode.HALT and not ctx.halted:
            remaining = self.lane.side_lane_end_x - self.ego.x
            logger.warning("Halting at x=%.1f m, %.1f m before the side-lane end", self.ego.x, remaining)
            ctx = replace(ctx, halted=True)
        self.context = ctx

    def _scene(self) -> Scene:
        ego = self.ego
        obstacles = tuple(self.obstacles())
        return Scene(
            lane=self.lane,
            obstacles=obstacles,
            mode=FieldMode.LANE_MERGING,
            target_lane_y=self.lane.main_center,
            safe_distances=tuple(safe_distances(ego, o, self.rss[ego.vid], self.rss[o.vid]) for o in obstacles),
            ego_width=ego.width,
        )

    def _dump_field(self, t: float, scene: Scene, p_c: float, x_end: float) -> None:
        lane = self.lane
        params = self.config.field_params
        xs = np.linspace(self.ego.x, x_end, FIELD_COLUMNS)
        grid = field_grid(scene, params, xs, np.linspace(lane.y_right, lane.y_left, FIELD_ROWS))
        margin = scene.ego_width
        force_ys = np.linspace(lane.y_right + margin, lane.y_left - margin, FORCE_ROWS)
        forces = force_arrows(scene, params, np.linspace(self.ego.x, x_end, FORCE_COLUMNS), force_ys)
        self.trace.fields.append(FieldDump(t=t, p_c=p_c, grid=grid, forces=forces))

    def _merge_path(self, decision: MergeDecision, t: float) -> SigmoidPath | None:
        ego = self.ego
        lane = self.lane
        settings = self.config.planner
        w = lane.lane_offset
        b = lane.side_center
        v_star = max(decision.v_ego_star or ego.speed_long, 0.1)
        scene = self._scene()
        if decision.mode is Mode.MERGE_COOP and decision.cp_hint is not None:
            kappa = select_kappa(v_star, w, settings.a_lat_comfort)
            p_c = decision.cp_hint
        else:
            by_id = {s.vid: s for s in self.obstacles()}
            follower = by_id.get(decision.follower_id) if decision.follower_id else None
            leader = by_id.get(decision.leader_id) if decision.leader_id else None
            plan = plan_crossing(ego, v_star, follower, leader, self.rss, self.config.merge.rho_m, lane, settings)
            kappa = plan.kappa
            try:
                p_c = select_cp(
                    plan.interval,
                    ego,
                    scene,
                    self.config.field_params,
                    settings.grid_step,
                    kappa=kappa,
                    w=w,
                    b=b,
                    spacing=settings.spacing,
                    candidates=plan.candidates,
                    ego_speed=v_star,
                )
            except CpInfeasibleError:
                logger.warning("No admissible crossing point for gap %s; keeping the side lane", decision.target_gap)
                return None
        self._dump_field(t, scene, p_c, p_c + TAIL_SPAN / kappa)
        horizon = max(p_c - ego.x, 0.0) + TAIL_SPAN / kappa + LOOKAHEAD_MAX
        logger.info("Planned merge into gap %s: P_c=%.1f m, kappa=%.3f", decision.target_gap, p_c, kappa)
        return generate_path(ego, w, kappa, p_c, b, horizon, settings.spacing)

    def _update_path(self, decision: MergeDecision, t: float) -> None:
        key = (decision.mode, decision.follower_id, decision.leader_id)
        if key == self.path_key:
            return
        self.path_key = key
        path = None
        if decision.mode in MERGING_MODES:
            path = self._merge_path(decision, t)
        if path is None:
            if self.context.committed_mode is not None and self.lane.in_main_lane(self.ego.y):
                return
            path = straight_path(self.ego.x, self.lane.side_center, STRAIGHT_HORIZON, self.config.planner.spacing)
        self.path = path
        self.trace.paths.append(PathDump(t=t, mode=str(decision.mode), path=path))

    def _ego_accel(self, decision: MergeDecision) -> float:
        ego = self.ego
        params = self.vehicle_cfg[self.ego_id].params
        rss = self.rss[self.ego_id]
        if decision.mode is Mode.HALT:
            remaining = self.lane.side_lane_end_x - ego.x - self.config.merge.halt_margin
            if ego.speed_long <= 0:
                return 0.0
            decel = rss.a_brake_max if remaining <= 0 else ego.speed_long**2 / (2 * remaining)
            return -min(max(decel, rss.a_brake_min), rss.a_brake_max)
        if decision.mode is Mode.ABORT or decision.v_ego_star is None:
            return speed_controller(ego, self.context.v_cruise, params)
        cooperating = decision.mode in {Mode.NEGOTIATE_COOP, Mode.MERGE_COOP}
        behind_role = cooperating and self.context.request is Request.SPEED_UP
        if behind_role and not self.lane.in_main_lane(ego.y):
            return speed_controller(ego, decision.v_ego_star, params, gain=1 / self.dt, accel_limit=rss.a_brake_min)
        return speed_controller(ego, decision.v_ego_star, params)

    # -- obstacles ----------------------------------------------------------

    def _obstacle_accel(self, obstacle: VehicleState, traffic: list[VehicleState]) -> tuple[float, str]:
        cfg = self.vehicle_cfg[obstacle.vid]
        profile = self.profiles.get(obstacle.vid)
        if profile is not None:
            accel = speed_controller(
                obstacle,
                profile.v_target,
                cfg.params,
                response=profile.request,
                gain=1 / self.dt,
                accel_limit=profile.accel_limit,
            )
            label = "Cooperate"
        else:
            accel = speed_controller(obstacle, cfg.cruise_speed, cfg.params)
            label = "Cruise"
        ahead = [s for s in traffic if s.x > obstacle.x and s.vid != obstacle.vid]
        if ahead:
            leader = min(ahead, key=lambda s: s.x)
            rss = self.rss[obstacle.vid]
            d_long = longitudinal_safe_distance(
                obstacle.speed_long,
                leader.speed_long,
                rss,
                self.rss[leader.vid].a_brake_max,
                obstacle.length,
                leader.length,
            )
            if bumper_gap(obstacle, leader) < d_long and accel > -rss.a_brake_min:
                accel = -rss.a_brake_min
                label = "RssBrake"
        return accel, label

    # -- main loop ----------------------------------------------------------

    def _record(self, t: float, state: VehicleState, accel: float, steer: float, mode: str) -> None:
        self.trace.records.append(
            StepRecord(
                t=t,
                vid=state.vid,
                x=state.x,
                y=state.y,
                psi=state.heading,
                beta=state.sideslip,
                r=state.yaw_rate,
                v=state.speed_long,
                accel=accel,
                steer=steer,
                mode=mode,
            )
        )

    def step(self, k: int) -> bool:
        """Advance one step; returns False once the run should stop."""
        t = k * self.dt
        self._apply_events(t)
        self._exchange(t)

        decision = self._decide(t)
        self._update_context(decision, t)
        if self.last_decision is None or decision.mode is not self.last_decision.mode:
            logger.info("t=%.2f s: %s", t, decision.mode)
        self.last_decision = decision
        self.trace.decisions.append(
            DecisionRecord(
                t=t,
                mode=str(decision.mode),
                target_gap=decision.target_gap,
                v_ego_star=decision.v_ego_star,
                v_obs_star=decision.v_obs_star,
                cp_hint=decision.cp_hint,
                follower_id=decision.follower_id,
                leader_id=decision.leader_id,
            )
        )
        self._update_path(decision, t)

        ego = self.ego
        ego_params = self.vehicle_cfg[self.ego_id].params
        ego_steer = track_path(ego, self.path, ego_params)
        ego_accel = self._ego_accel(decision)

        traffic = self.obstacles()
        if self.lane.in_main_lane(ego.y):
            traffic = [*traffic, ego]
        commands: dict[str, tuple[float, float, str]] = {self.ego_id: (ego_steer, ego_accel, str(decision.mode))}
        for obstacle in self.obstacles():
            accel, label = self._obstacle_accel(obstacle, traffic)
            commands[obstacle.vid] = (0.0, accel, label)

        for vcfg in self.config.vehicles:
            state = self.states.get(vcfg.vid)
            if state is None:
                continue
            steer, accel, label = commands[vcfg.vid]
            self._record(t, state, accel, steer, label)
        for vid, (steer, accel, _) in commands.items():
            self.states[vid] = step_dynamics(self.states[vid], steer, accel, self.dt, self.vehicle_cfg[vid].params)

        settled_at = None
        if self.context.committed_mode is not None:
            settled_at = self.settlement.update(t, ego.y, ego.sideslip)
        return settled_at is None or t < settled_at + RUN_OUT_AFTER_SETTLE - TIME_EPS

    def run(self) -> Trace:
        logger.info("Running scenario %s: %d steps of %.3f s", self.config.name, self.config.steps, self.dt)
        k = 0
        while k < self.config.steps:
            keep_going = self.step(k)
            k += 1
            if not keep_going:
                break
        t_end = k * self.dt
        mode = str(self.last_decision.mode) if self.last_decision is not None else str(Mode.LANE_KEEP)
        for vcfg in self.config.vehicles:
            state = self.states.get(vcfg.vid)
            if state is not None:
                label = mode if vcfg.vid == self.ego_id else "Cruise"
                self._record(t_end, state, 0.0, 0.0, label)
        return self.trace


def run_scenario(config: ScenarioConfig) -> tuple[Trace, Metrics]:
    """Simulate ``config`` to its duration, or 2 s past merge settlement, and summarize the run."""
    trace = ScenarioRun(config).run()
    metrics = compute_metrics(trace)
    logger.info(
        "Scenario %s finished: completed=%s merge_time=%s rss_violations=%d",
        config.name,
        metrics.completed,
        "n/a" if metrics.merge_time is None else f"{metrics.merge_time:.2f}",
        metrics.rss_violations,
    )
    return trace, metrics


def final_state(trace: Trace, vid: str) -> StepRecord:
    records = trace.for_vehicle(vid)
    if not records:
        msg = f"no records for vehicle {vid!r}"
        raise KeyError(msg)
    return records[-1]


def decision_times(trace: Trace, mode: Mode) -> list[float]:
    return [d.t for d in trace.decisions if d.mode == mode]

