"""Cost and traffic accounting for local, remote, and bulk memory movement.

Remote accesses cross the coherent chip-to-chip link at the requester's
cacheline granularity; bulk migrations cross it at page granularity.  The
time model is additive serial time: no overlap, no queuing.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .memmodel import Agent, ConfigError, MachineConfig, Tier


class Direction(str, Enum):
    H2D = "h2d"
    D2H = "d2h"


class Op(str, Enum):
    READ = "read"
    WRITE = "write"
    ATOMIC = "atomic"


class ServicedFrom(str, Enum):
    LOCAL_CPU = "local_cpu"
    LOCAL_GPU = "local_gpu"
    REMOTE_OVER_C2C = "remote_over_c2c"


@dataclass
class TrafficCounters:
    """Monotone byte counters for one run.

    c2c_h2d / c2c_d2h carry read-direction cacheline traffic plus bulk
    migration bytes; write data is accounted once, in c2c_writeback.
    """

    gpu_local_read: int = 0
    gpu_local_write: int = 0
    cpu_local_read: int = 0
    cpu_local_write: int = 0
    c2c_h2d: int = 0
    c2c_d2h: int = 0
    c2c_writeback: int = 0
    migrated_h2d: int = 0
    migrated_d2h: int = 0
    requested_bytes: int = 0

    def amplification(self) -> float:
        """Interconnect bytes moved per application byte requested."""
        if self.requested_bytes == 0:
            return 0.0
        return (self.c2c_h2d + self.c2c_d2h + self.c2c_writeback) / self.requested_bytes

    def remote_read_wire(self) -> int:
        """Cacheline read traffic over the link, migrations excluded."""
        return self.c2c_h2d + self.c2c_d2h - self.migrated_h2d - self.migrated_d2h

    def as_dict(self) -> dict[str, int]:
        return {
            "gpu_local_read": self.gpu_local_read,
            "gpu_local_write": self.gpu_local_write,
            "cpu_local_read": self.cpu_local_read,
            "cpu_local_write": self.cpu_local_write,
            "c2c_h2d": self.c2c_h2d,
            "c2c_d2h": self.c2c_d2h,
            "c2c_writeback": self.c2c_writeback,
            "migrated_h2d": self.migrated_h2d,
            "migrated_d2h": self.migrated_d2h,
            "requested_bytes": self.requested_bytes,
        }


@dataclass(slots=True)
class AccessResolution:
    serviced_from: ServicedFrom
    bytes_on_wire: int
    elapsed: float
    wrote_back: int


def wire_bytes(size: int, cacheline: int) -> int:
    """Bytes moved for a remote access: whole cachelines, rounded up."""
    return -(-size // cacheline) * cacheline


def resolve_access(op: Op, size: int, requester: Agent, residency: Tier,
                   cfg: MachineConfig, counters: TrafficCounters) -> AccessResolution:
    """Service one application access and account its traffic.

    Local accesses cost pure bandwidth time.  Remote accesses pay the link
    latency plus cacheline transfer time in the data's direction; remote
    writes are accounted as writeback traffic, remote atomics as one
    cacheline read plus one cacheline writeback.
    """
    counters.requested_bytes += size
    local = (requester is Agent.CPU and residency is Tier.CPU) or \
            (requester is Agent.GPU and residency is Tier.GPU)

    if local:
        if requester is Agent.GPU:
            bw = cfg.gpu_bw
            if op is Op.READ:
                counters.gpu_local_read += size
            elif op is Op.WRITE:
                counters.gpu_local_write += size
            else:
                counters.gpu_local_read += size
                counters.gpu_local_write += size
        else:
            bw = cfg.cpu_bw
            if op is Op.READ:
                counters.cpu_local_read += size
            elif op is Op.WRITE:
                counters.cpu_local_write += size
            else:
                counters.cpu_local_read += size
                counters.cpu_local_write += size
        factor = 2 if op is Op.ATOMIC else 1
        where = ServicedFrom.LOCAL_GPU if requester is Agent.GPU else ServicedFrom.LOCAL_CPU
        return AccessResolution(where, 0, factor * size / bw, 0)

    cacheline = cfg.gpu_cacheline if requester is Agent.GPU else cfg.cpu_cacheline
    wire = wire_bytes(size, cacheline)
    # Data direction of a read: toward the requester.  Writes carry data the
    # other way, toward the home memory.
    if requester is Agent.GPU:
        read_bw, write_bw = cfg.c2c_bw_h2d, cfg.c2c_bw_d2h
        read_counter = "c2c_h2d"
    else:
        read_bw, write_bw = cfg.c2c_bw_d2h, cfg.c2c_bw_h2d
        read_counter = "c2c_d2h"

    if op is Op.READ:
        setattr(counters, read_counter, getattr(counters, read_counter) + wire)
        return AccessResolution(ServicedFrom.REMOTE_OVER_C2C, wire,
                                cfg.c2c_latency + wire / read_bw, 0)
    if op is Op.WRITE:
        counters.c2c_writeback += wire
        return AccessResolution(ServicedFrom.REMOTE_OVER_C2C, wire,
                                cfg.c2c_latency + wire / write_bw, wire)
    # Atomic: one cacheline round-trip.
    setattr(counters, read_counter, getattr(counters, read_counter) + cacheline)
    counters.c2c_writeback += cacheline
    elapsed = cfg.c2c_latency + cacheline / read_bw + cacheline / write_bw
    return AccessResolution(ServicedFrom.REMOTE_OVER_C2C, cacheline, elapsed, cacheline)


def cost_of_migration(nbytes: int, direction: Direction, cfg: MachineConfig,
                      counters: TrafficCounters) -> float:
    """Bulk page movement over the link: fixed cost plus bandwidth time."""
    if nbytes <= 0:
        raise ConfigError(f"migration size must be positive, got {nbytes}")
    if direction is Direction.H2D:
        counters.migrated_h2d += nbytes
        counters.c2c_h2d += nbytes
        bw = cfg.c2c_bw_h2d
    else:
        counters.migrated_d2h += nbytes
        counters.c2c_d2h += nbytes
        bw = cfg.c2c_bw_d2h
    return cfg.migration_fixed_cost + nbytes / bw
