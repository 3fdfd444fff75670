"""Delayed, lossy V2V channel."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from logging_config import get_logger
from planner.domain import PreconditionError
from planner.merge_rules import CoopReply

if TYPE_CHECKING:
    import numpy as np

    from planner.merge_rules import CoopMessage

logger = get_logger(__name__)

DELIVERY_EPS = 1e-9


@dataclass(frozen=True, slots=True)
class Envelope:
    payload: CoopMessage | CoopReply
    sent_at: float
    seq: int

    @property
    def kind(self) -> str:
        return "reply" if isinstance(self.payload, CoopReply) else "request"

    def to_dict(self) -> dict[str, Any]:
        return {"seq": self.seq, "sent_at": self.sent_at, "kind": self.kind, **self.payload.to_dict()}


@dataclass(slots=True)
class ChannelResult:
    delivered: list[Envelope] = field(default_factory=list)
    dropped: list[Envelope] = field(default_factory=list)
    pending: list[Envelope] = field(default_factory=list)


def channel_step(
    pending: list[Envelope],
    t: float,
    delay: float,
    drop_probability: float,
    rng: np.random.Generator,
) -> ChannelResult:
    """
    Release every envelope whose send time plus ``delay`` has been reached by ``t``.

    Due envelopes are handled in send order and each is dropped independently with
    ``drop_probability``, drawing from ``rng`` only when the probability is strictly between 0 and 1.
    """
    if delay < 0:
        msg = f"delay must be >= 0, got {delay}"
        raise PreconditionError(msg)
    result = ChannelResult()
    for envelope in sorted(pending, key=lambda e: (e.sent_at, e.seq)):
        if envelope.sent_at + delay > t + DELIVERY_EPS:
            result.pending.append(envelope)
            continue
        if drop_probability >= 1.0 or (drop_probability > 0.0 and rng.random() < drop_probability):
            logger.info("Dropped %s #%d sent at %.2f s", envelope.kind, envelope.seq, envelope.sent_at)
            result.dropped.append(envelope)
        else:
            logger.debug("Delivered %s #%d at %.2f s", envelope.kind, envelope.seq, t)
            result.delivered.append(envelope)
    return result
