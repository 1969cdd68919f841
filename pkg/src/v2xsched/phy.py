"""Broadcast propagation and reception: log-distance path loss, capture, air time."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class PacketType(IntEnum):
    CAM = 0
    CPM = 1
    LDM = 2


PAYLOAD_BYTES = {PacketType.CAM: 300, PacketType.CPM: 500, PacketType.LDM: 750}


@dataclass
class PhyConfig:
    tx_power_dbm: float = 20.0
    path_loss_exponent: float = 2.8
    ref_loss_db_at_1m: float = 47.86     # free space at 5.9 GHz; 250 m detection range
    preamble_threshold_dbm: float = -95.0
    # -110 dBm keeps the SINR rule interference-limited out to the 250 m
    # detection range; thermal ~-99 dBm would cap clean reception at ~150 m.
    noise_floor_dbm: float = -110.0
    capture_sinr_db: float = 10.0
    data_rate_bps: int = 6_000_000
    preamble_us: int = 40
    overhead_bytes: int = 36

    def __post_init__(self):
        if self.preamble_threshold_dbm <= self.noise_floor_dbm:
            raise ValueError("preamble threshold must exceed the noise floor")
        if self.data_rate_bps <= 0:
            raise ValueError("data_rate_bps must be > 0")


class RxOutcome(IntEnum):
    RECEIVED = 0
    LOST_COLLISION = 1
    BELOW_THRESHOLD = 2


@dataclass
class Frame:
    """One broadcast packet on the air."""

    sender: int
    ptype: PacketType
    payload_bytes: int
    piggyback_bytes: int
    tx_start: int                  # us
    air_time: int                  # us
    tx_pos: tuple[float, float]    # (x, y) at transmission start
    # sender dynamics snapshot carried in CAM payloads (speed, heading, x)
    dynamics: tuple[float, float, float] | None = None
    piggyback_block: bytes = b""
    # engine bookkeeping
    power_mw: np.ndarray | None = field(default=None, repr=False)
    overlappers: list = field(default_factory=list, repr=False)

    @property
    def tx_end(self) -> int:
        return self.tx_start + self.air_time


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(max(mw, 1e-300))


def rx_power_dbm(d_m: float, cfg: PhyConfig) -> float:
    """Log-distance path loss; distances below 1 m clamp to 1 m."""
    d = max(d_m, 1.0)
    return cfg.tx_power_dbm - cfg.ref_loss_db_at_1m - 10.0 * cfg.path_loss_exponent * math.log10(d)


def detection_range_m(cfg: PhyConfig) -> float:
    """Distance at which rx power equals the preamble detection threshold."""
    margin = cfg.tx_power_dbm - cfg.ref_loss_db_at_1m - cfg.preamble_threshold_dbm
    return 10.0 ** (margin / (10.0 * cfg.path_loss_exponent))


def airtime_us(total_bytes: int, cfg: PhyConfig) -> int:
    """Preamble plus payload+overhead serialization, rounded up to 1 us."""
    if total_bytes <= 0:
        raise ValueError("total_bytes must be > 0")
    bits = 8 * (total_bytes + cfg.overhead_bytes)
    return cfg.preamble_us + -(-bits * 1_000_000 // cfg.data_rate_bps)


def frames_overlap(a: Frame, b: Frame) -> bool:
    return a.tx_start < b.tx_end and b.tx_start < a.tx_end


def _dist(pos_a, pos_b, segment_length=None, wrap=False) -> float:
    dx = abs(pos_a[0] - pos_b[0])
    if wrap and segment_length:
        dx = min(dx, segment_length - dx)
    return math.hypot(dx, pos_a[1] - pos_b[1])


def resolve_reception(frame: Frame, receiver_pos, concurrent, cfg: PhyConfig,
                      segment_length=None, wrap=False) -> RxOutcome:
    """Classify reception of frame at receiver_pos against overlapping frames.

    The frame survives only if it stays capture_sinr_db above the strongest
    overlapping interferer plus noise for its whole duration.
    """
    p_sig = rx_power_dbm(_dist(frame.tx_pos, receiver_pos, segment_length, wrap), cfg)
    if p_sig < cfg.preamble_threshold_dbm - 1e-9:
        return RxOutcome.BELOW_THRESHOLD
    overlapping = [g for g in concurrent if g is not frame and frames_overlap(frame, g)]
    interf_mw = 0.0
    for g in overlapping:
        p = rx_power_dbm(_dist(g.tx_pos, receiver_pos, segment_length, wrap), cfg)
        interf_mw = max(interf_mw, dbm_to_mw(p))
    sinr_db = p_sig - mw_to_dbm(interf_mw + dbm_to_mw(cfg.noise_floor_dbm))
    if sinr_db >= cfg.capture_sinr_db - 1e-9:
        return RxOutcome.RECEIVED
    return RxOutcome.LOST_COLLISION if overlapping else RxOutcome.BELOW_THRESHOLD


def carrier_sensed_at(pos, in_flight, cfg: PhyConfig, segment_length=None, wrap=False) -> bool:
    """True iff the summed power of all in-flight frames reaches the detection threshold."""
    total_mw = 0.0
    for f in in_flight:
        total_mw += dbm_to_mw(rx_power_dbm(_dist(f.tx_pos, pos, segment_length, wrap), cfg))
    return total_mw >= dbm_to_mw(cfg.preamble_threshold_dbm) * (1.0 - 1e-9)


class ChannelLedger:
    """Vectorized sensed-power bookkeeping for every node at once.

    Per frame boundary it updates each node's summed in-flight power, derives
    carrier-sense busy flags, accumulates per-node busy time for the 100 ms
    channel-load windows, and reports which nodes toggled so the MAC layer can
    freeze or resume contention.
    """

    def __init__(self, n_nodes: int, cfg: PhyConfig, segment_length: float, wrap: bool = True):
        self.cfg = cfg
        self.n = n_nodes
        self.segment_length = segment_length
        self.wrap = wrap
        self.thr_mw = dbm_to_mw(cfg.preamble_threshold_dbm) * (1.0 - 1e-9)
        self._const_mw = dbm_to_mw(cfg.tx_power_dbm - cfg.ref_loss_db_at_1m)
        self._half_exp = -cfg.path_loss_exponent / 2.0
        self.sensed_mw = np.zeros(n_nodes)
        self.busy = np.zeros(n_nodes, dtype=bool)
        self.busy_since = np.zeros(n_nodes, dtype=np.int64)
        self.idle_since = np.zeros(n_nodes, dtype=np.int64)
        self.busy_accum = np.zeros(n_nodes, dtype=np.int64)
        self.x = np.zeros(n_nodes)
        self.y = np.zeros(n_nodes)
        self.active: list[Frame] = []

    def set_positions(self, x: np.ndarray, y: np.ndarray) -> None:
        self.x = x
        self.y = y

    def power_vector(self, tx_pos) -> np.ndarray:
        """Received power in mW at every node for a transmitter at tx_pos."""
        dx = np.abs(self.x - tx_pos[0])
        if self.wrap:
            np.minimum(dx, self.segment_length - dx, out=dx)
        d2 = dx * dx + (self.y - tx_pos[1]) ** 2
        np.maximum(d2, 1.0, out=d2)
        return self._const_mw * d2 ** self._half_exp

    def _transition(self, t: int) -> np.ndarray:
        new_busy = self.sensed_mw >= self.thr_mw
        changed = new_busy != self.busy
        if not changed.any():
            return np.empty(0, dtype=np.int64)
        idx = np.nonzero(changed)[0]
        went_busy = idx[new_busy[idx]]
        went_idle = idx[~new_busy[idx]]
        self.busy_accum[went_idle] += t - self.busy_since[went_idle]
        self.busy_since[went_busy] = t
        self.idle_since[went_idle] = t
        self.busy = new_busy
        return idx

    def frame_start(self, frame: Frame, t: int) -> np.ndarray:
        """Register a transmission; returns indices of nodes whose busy state toggled."""
        frame.power_mw = self.power_vector(frame.tx_pos)
        for other in self.active:
            other.overlappers.append(frame)
        frame.overlappers = list(self.active)
        self.active.append(frame)
        self.sensed_mw += frame.power_mw
        return self._transition(t)

    def frame_end(self, frame: Frame, t: int) -> np.ndarray:
        self.active.remove(frame)
        self.sensed_mw -= frame.power_mw
        return self._transition(t)

    def rebuild(self) -> None:
        """Recompute the power sums exactly (run at window boundaries: kills float drift)."""
        self.sensed_mw = np.zeros(self.n)
        for f in self.active:
            self.sensed_mw += f.power_mw

    def carrier_sensed(self, node: int) -> bool:
        return bool(self.busy[node])

    def idle_duration(self, node: int, now: int) -> int:
        """Contiguous idle time at node as of now; 0 while busy."""
        if self.busy[node]:
            return 0
        return now - int(self.idle_since[node])

    def close_window(self, t: int, window_us: int) -> np.ndarray:
        """Finish a 100 ms load window: returns per-node busy fraction, resets accumulators."""
        busy_nodes = self.busy
        self.busy_accum[busy_nodes] += t - self.busy_since[busy_nodes]
        self.busy_since[busy_nodes] = t
        cbr = self.busy_accum / float(window_us)
        self.busy_accum[:] = 0
        self.rebuild()
        return cbr
