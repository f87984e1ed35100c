"""Deterministic discrete-event kernel: clock, calendar, and FIFO server pools.

Events fire in non-decreasing time order with FIFO tie-breaking by insertion
sequence.  Pools hand out servers in strict request order, record every
waiting time, and integrate queue length over time so long-run queue
statistics (Little's law checks) come for free.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

__all__ = ["EventCalendar", "ResourcePool", "PoolRequest", "TimeInPastError"]


class TimeInPastError(ValueError):
    """Attempt to schedule an event before the current clock."""


class EventCalendar:
    """Pending events ordered by (time, insertion sequence)."""

    def __init__(self) -> None:
        self.now = 0.0
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = 0

    def schedule(self, at_time: float, action: Callable[[], None]) -> None:
        """Fire `action` at exactly `at_time` (>= current clock)."""
        if at_time < self.now:
            raise TimeInPastError(f"schedule at {at_time} < clock {self.now}")
        heapq.heappush(self._heap, (at_time, self._seq, action))
        self._seq += 1

    def schedule_in(self, delay: float, action: Callable[[], None]) -> None:
        self.schedule(self.now + delay, action)

    def step(self) -> bool:
        """Fire the next event; returns False when the calendar is empty."""
        if not self._heap:
            return False
        at_time, _, action = heapq.heappop(self._heap)
        self.now = at_time
        action()
        return True

    def run(self, stop: Callable[[], bool] | None = None) -> None:
        """Run until the calendar empties or `stop()` turns true."""
        while self._heap:
            if stop is not None and stop():
                return
            self.step()

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class PoolRequest:
    pool: "ResourcePool" = field(repr=False)
    entity_id: object = None
    enqueue_time: float = 0.0
    on_grant: Callable[[], None] = field(default=None, repr=False)
    cancelled: bool = False
    granted: bool = False

    def cancel(self) -> None:
        if not self.granted and not self.cancelled:
            self.cancelled = True
            self.pool._waiting -= 1


@dataclass
class ResourcePool:
    """Multi-server FIFO pool with immediate grants and no preemption.

    Capacity increases take effect immediately (queued requests are granted);
    decreases take effect as busy servers release.  Buffers are unbounded --
    any loss behaviour belongs to the callers via timeout events.
    """

    calendar: EventCalendar
    name: str
    capacity: int
    busy: int = 0
    queue: deque = field(default_factory=deque)
    waits: list = field(default_factory=list)
    served: int = 0
    _waiting: int = 0
    _queue_area: float = 0.0
    _busy_area: float = 0.0
    _last_t: float = 0.0

    def _advance_areas(self) -> None:
        now = self.calendar.now
        dt = now - self._last_t
        if dt > 0:
            self._queue_area += dt * self._waiting
            self._busy_area += dt * self.busy
            self._last_t = now

    def request(
        self, entity_id: object, on_grant: Callable[[], None]
    ) -> PoolRequest:
        """Ask for one server; `on_grant` runs (possibly immediately) when one
        is assigned.  Returns a handle usable for cancellation."""
        self._advance_areas()
        req = PoolRequest(self, entity_id, self.calendar.now, on_grant)
        self.queue.append(req)
        self._waiting += 1
        self._drain()
        return req

    def release(self) -> None:
        """Return one server and hand it to the queue head, FIFO."""
        self._advance_areas()
        if self.busy <= 0:
            raise RuntimeError(f"pool {self.name!r}: release without busy server")
        self.busy -= 1
        self._drain()

    def resize(self, new_capacity: int) -> None:
        if new_capacity < 0:
            raise ValueError("capacity must be >= 0")
        self._advance_areas()
        self.capacity = new_capacity
        self._drain()

    def _drain(self) -> None:
        while self.busy < self.capacity and self.queue:
            req = self.queue.popleft()
            if req.cancelled:
                continue
            self._waiting -= 1
            self._grant(req)

    def _grant(self, req: PoolRequest) -> None:
        req.granted = True
        self.busy += 1
        self.served += 1
        self.waits.append((req.entity_id, self.calendar.now - req.enqueue_time))
        req.on_grant()

    def queued_count(self) -> int:
        return self._waiting

    def average_queue_length(self) -> float:
        self._advance_areas()
        return self._queue_area / self._last_t if self._last_t > 0 else 0.0

    def average_wait(self) -> float:
        return sum(w for _, w in self.waits) / len(self.waits) if self.waits else 0.0
