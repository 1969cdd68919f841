"""CSMA/CA broadcast MAC: two EDCA access categories, per-node queues, channel-load windows."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .phy import Frame, PacketType

SLOT_US = 13
SIFS_US = 32


@dataclass(frozen=True)
class AccessCategory:
    name: str
    aifsn: int
    cw_min: int
    cw_max: int

    def __post_init__(self):
        if self.cw_min > self.cw_max:
            raise ValueError("cw_min must be <= cw_max")

    @property
    def aifs_us(self) -> int:
        return SIFS_US + self.aifsn * SLOT_US


# 802.11p-style constants; the contention window never doubles for broadcast.
BEST_EFFORT = AccessCategory("BestEffort", aifsn=6, cw_min=15, cw_max=1023)
BACKGROUND = AccessCategory("Background", aifsn=9, cw_min=15, cw_max=1023)

AC_BEST_EFFORT = 0
AC_BACKGROUND = 1
AC_FOR_PTYPE = {PacketType.CAM: AC_BEST_EFFORT,
                PacketType.CPM: AC_BACKGROUND,
                PacketType.LDM: AC_BACKGROUND}


@dataclass
class MacConfig:
    slot_us: int = SLOT_US
    queue_cap: int = 32
    access_categories: tuple[AccessCategory, AccessCategory] = (BEST_EFFORT, BACKGROUND)


@dataclass
class ChannelLoadWindow:
    """One 100 ms carrier-sense occupancy window for a single node."""

    window_start: int
    busy_us: int = 0
    window_us: int = 100_000


def cbr(window: ChannelLoadWindow) -> float:
    """Fraction of the window during which the channel was sensed busy."""
    if not 0 <= window.busy_us <= window.window_us:
        raise ValueError("busy_us outside window")
    return window.busy_us / window.window_us


_WAIT_IDLE = 0
_AIFS = 1
_COUNTDOWN = 2


class _Contention:
    __slots__ = ("state", "remaining", "handle", "countdown_start", "done_time")

    def __init__(self, remaining: int):
        self.state = _WAIT_IDLE
        self.remaining = remaining
        self.handle = None
        self.countdown_start = 0
        self.done_time = -1


class NodeMac:
    """EDCA transmit path of one node, driven by kernel events and channel toggles.

    A frame arriving to an idle channel that has been idle for at least AIFS is
    transmitted directly; otherwise a uniform backoff over [0, cw_min] is drawn
    and counted down in whole idle slots after each AIFS of contiguous idle.
    """

    def __init__(self, node: int, kernel, ledger, rng, cfg: MacConfig, commit_tx):
        self.node = node
        self.kernel = kernel
        self.ledger = ledger
        self.rng = rng
        self.cfg = cfg
        self.commit_tx = commit_tx          # callable(node, frame, now) -> None
        self.queues = (deque(), deque())
        self.contention: list[_Contention | None] = [None, None]
        self.drops = 0
        self.tx_count = 0
        self.register_contending = None     # wired by the engine
        self.unregister_contending = None

    # -- queueing ------------------------------------------------------------

    def enqueue(self, frame: Frame, ac_idx: int, now: int) -> None:
        q = self.queues[ac_idx]
        if len(q) >= self.cfg.queue_cap:
            q.popleft()
            self.drops += 1
        q.append(frame)
        if self.contention[ac_idx] is None and len(q) == 1:
            self._start_contention(ac_idx, now, fresh=True)

    def pending(self) -> int:
        return len(self.queues[0]) + len(self.queues[1])

    # -- contention machinery --------------------------------------------------

    def _ac(self, ac_idx: int) -> AccessCategory:
        return self.cfg.access_categories[ac_idx]

    def _draw(self, ac_idx: int) -> int:
        return int(self.rng.integers(0, self._ac(ac_idx).cw_min + 1))

    def _start_contention(self, ac_idx: int, now: int, fresh: bool) -> None:
        if fresh and not self.ledger.busy[self.node] \
                and self.ledger.idle_duration(self.node, now) >= self._ac(ac_idx).aifs_us:
            self._commit(ac_idx, now)
            return
        c = _Contention(self._draw(ac_idx))
        self.contention[ac_idx] = c
        if self.register_contending:
            self.register_contending(self.node)
        if self.ledger.busy[self.node]:
            c.state = _WAIT_IDLE
        else:
            self._enter_aifs(ac_idx, c, now)

    def _enter_aifs(self, ac_idx: int, c: _Contention, now: int) -> None:
        c.state = _AIFS
        target = int(self.ledger.idle_since[self.node]) + self._ac(ac_idx).aifs_us
        if target <= now:
            self._enter_countdown(ac_idx, c, now)
        else:
            c.handle = self.kernel.schedule(
                target, lambda: self._aifs_done(ac_idx), "mac_aifs", self.node)

    def _aifs_done(self, ac_idx: int) -> None:
        c = self.contention[ac_idx]
        c.handle = None
        self._enter_countdown(ac_idx, c, self.kernel.now)

    def _enter_countdown(self, ac_idx: int, c: _Contention, now: int) -> None:
        c.state = _COUNTDOWN
        c.countdown_start = now
        c.done_time = now + c.remaining * self.cfg.slot_us
        if c.remaining == 0:
            self._backoff_done(ac_idx)
        else:
            c.handle = self.kernel.schedule(
                c.done_time, lambda: self._backoff_done(ac_idx), "mac_backoff", self.node)

    def _backoff_done(self, ac_idx: int) -> None:
        now = self.kernel.now
        c = self.contention[ac_idx]
        c.handle = None
        if self.ledger.busy[self.node]:
            # A same-time transmission elsewhere was committed first.
            c.state = _WAIT_IDLE
            c.remaining = max(0, c.remaining)
            return
        # EDCA internal collision: a higher-priority category completing in the
        # same slot wins; this one redraws and re-contends.
        for higher in range(ac_idx):
            ch = self.contention[higher]
            if ch is not None and ch.state == _COUNTDOWN and ch.done_time == now:
                c.remaining = self._draw(ac_idx)
                c.state = _WAIT_IDLE
                return
        self._commit(ac_idx, now)

    def _commit(self, ac_idx: int, now: int) -> None:
        frame = self.queues[ac_idx].popleft()
        self.contention[ac_idx] = None
        self.tx_count += 1
        self.commit_tx(self.node, frame, now)
        for other in range(len(self.queues)):
            if self.queues[other] and self.contention[other] is None:
                self._start_contention(other, now, fresh=False)
        self._sync_registration()

    def _sync_registration(self) -> None:
        if all(c is None for c in self.contention):
            if self.unregister_contending:
                self.unregister_contending(self.node)

    # -- channel toggles -------------------------------------------------------

    def notify_busy(self, now: int) -> None:
        for ac_idx, c in enumerate(self.contention):
            if c is None:
                continue
            if c.state == _AIFS:
                if c.handle is not None:
                    self.kernel.cancel(c.handle)
                    c.handle = None
                c.state = _WAIT_IDLE
            elif c.state == _COUNTDOWN:
                consumed = (now - c.countdown_start) // self.cfg.slot_us
                c.remaining = max(0, c.remaining - int(consumed))
                if c.handle is not None:
                    self.kernel.cancel(c.handle)
                    c.handle = None
                c.state = _WAIT_IDLE

    def notify_idle(self, now: int) -> None:
        for ac_idx, c in enumerate(self.contention):
            if c is not None and c.state == _WAIT_IDLE:
                self._enter_aifs(ac_idx, c, now)

    def notify_toggle(self, now: int, busy: bool) -> None:
        if busy:
            self.notify_busy(now)
        else:
            self.notify_idle(now)
