"""
Deterministic discrete-event scheduler.

Events are ordered by (time, priority, seq); seq is the insertion counter, so
two runs that schedule the same events in the same order execute them in the
same order on every platform.
"""
import heapq
import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, List, Optional, Tuple

from models.core import NodeId, SimTime

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    TX_END = "TX_END"
    RX_DELIVER = "RX_DELIVER"
    TIMER_FIRE = "TIMER_FIRE"
    TX_START = "TX_START"
    APP_GENERATE = "APP_GENERATE"
    ATTACKER_ACTIVATE = "ATTACKER_ACTIVATE"
    SAMPLE_ENERGY = "SAMPLE_ENERGY"


# Lower runs first at equal time: a frame ends and is delivered before anything
# reacts to the channel at that instant.
EVENT_PRIORITY = {
    EventKind.TX_END: 0,
    EventKind.RX_DELIVER: 1,
    EventKind.TIMER_FIRE: 2,
    EventKind.TX_START: 3,
    EventKind.APP_GENERATE: 4,
    EventKind.ATTACKER_ACTIVATE: 5,
    EventKind.SAMPLE_ENERGY: 6,
}


@dataclass(slots=True, eq=False)
class Event:
    time: SimTime
    priority: int
    seq: int
    kind: EventKind
    target: NodeId
    payload: Any = None
    tag: Any = None
    cancelled: bool = False


class Scheduler:
    """Priority queue of events bounded by the scenario end time"""

    def __init__(self, end: SimTime, keep_log: bool = False):
        self.end = end
        self.now: SimTime = 0
        self.executed = 0
        self._queue: List[Tuple[SimTime, int, int, Event]] = []
        self._seq = itertools.count()
        self.log: Optional[List[Tuple[SimTime, str, NodeId]]] = [] if keep_log else None

    def schedule(
        self,
        time: SimTime,
        kind: EventKind,
        target: NodeId,
        payload: Any = None,
        tag: Any = None
    ) -> Optional[Event]:
        """
        Queue an event.

        Returns None when the event falls after the end of the run; it is
        discarded and never executes.
        """
        if time < self.now:
            raise ValueError(f"Cannot schedule {kind.value} at {time} before now={self.now}")
        if time > self.end:
            return None
        event = Event(time, EVENT_PRIORITY[kind], next(self._seq), kind, target, payload, tag)
        heapq.heappush(self._queue, (event.time, event.priority, event.seq, event))
        return event

    @staticmethod
    def cancel(event: Optional[Event]):
        if event is not None:
            event.cancelled = True

    def pending(self) -> int:
        return sum(1 for *_, e in self._queue if not e.cancelled)

    def run(self, dispatch: Callable[[Event], None]) -> int:
        """Execute events in order until the queue drains; returns the count executed."""
        while self._queue:
            _, _, _, event = heapq.heappop(self._queue)
            if event.cancelled:
                continue
            self.now = event.time
            if self.log is not None:
                self.log.append((event.time, event.kind.value, event.target))
            dispatch(event)
            self.executed += 1
        self.now = max(self.now, self.end)
        return self.executed
