"""Physical memory tiers, virtual allocations, and the two page tables.

The machine has two physical tiers (CPU LPDDR and GPU HBM) joined by a
cache-coherent chip-to-chip link.  Virtual pages live in one of two page
tables: a system-wide table (used by the OS allocator and by CPU-resident
unified allocations) and a GPU-exclusive table (used by device allocations
and by unified allocations while they are GPU-resident).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum

GIB = 1 << 30
MIB = 1 << 20

# Bump allocator origin for virtual addresses; 2 MiB aligned so GPU-sized
# pages never straddle two allocations.
VA_BASE = 0x1_0000_0000


class Agent(str, Enum):
    CPU = "cpu"
    GPU = "gpu"


class Tier(str, Enum):
    CPU = "cpu"
    GPU = "gpu"


class AllocKind(str, Enum):
    SYSTEM = "system"            # OS allocator, lazy first-touch, both tiers
    MANAGED = "managed"          # runtime-managed unified allocation
    DEVICE_ONLY = "device_only"  # eager GPU allocation, never migrated
    HOST_PINNED = "host_pinned"  # eager CPU allocation, never migrated


class Table(str, Enum):
    SYSTEM_WIDE = "system_wide"
    GPU_EXCLUSIVE = "gpu_exclusive"


class UvmError(Exception):
    """Base class for simulator errors."""


class ConfigError(UvmError):
    """Invalid machine, policy, workload, or scenario configuration."""


class UsageError(UvmError):
    """API misuse: double free, mismatched comparison inputs, ..."""


class AllocationError(UvmError):
    """An eager allocation did not fit in its tier."""


class OutOfMemoryError(UvmError):
    """Capacity pressure with nothing left to evict."""


class SimulationError(UvmError):
    """An event could not be processed (unallocated address, bad access)."""


@dataclass(frozen=True)
class MachineConfig:
    """Capacities, bandwidths, and per-operation costs of the simulated machine.

    Bandwidths are bytes/second, costs are seconds.  Defaults describe a
    tightly coupled CPU-GPU superchip at full scale; tests and presets
    usually shrink the capacities.
    """

    cpu_capacity: int = 480 * GIB
    gpu_capacity: int = 96 * GIB
    gpu_reserved_baseline: int = 600 * MIB  # driver-held GPU memory
    cpu_bw: float = 486e9
    gpu_bw: float = 3.4e12
    c2c_bw_h2d: float = 375e9
    c2c_bw_d2h: float = 297e9
    c2c_latency: float = 1e-6
    cpu_cacheline: int = 64
    gpu_cacheline: int = 128
    system_page_size: int = 65536
    gpu_page_size: int = 2 * MIB
    fault_cost_cpu: float = 2e-6
    fault_cost_gpu_first_touch: float = 1.6e-5  # SMMU round-trip + CPU handling
    pte_create_cost: float = 1e-7
    pte_teardown_cost: float = 1e-6
    migration_fixed_cost: float = 2e-5
    notification_cost: float = 1e-5
    gpu_context_init_cost: float = 1e-3

    def __post_init__(self):
        if self.system_page_size not in (4096, 65536):
            raise ConfigError(f"system_page_size must be 4096 or 65536, got {self.system_page_size}")
        if self.gpu_page_size != 2 * MIB:
            raise ConfigError(f"gpu_page_size must be {2 * MIB}, got {self.gpu_page_size}")
        if self.gpu_page_size % self.system_page_size != 0:
            raise ConfigError("gpu_page_size must be a multiple of system_page_size")
        for name in ("cpu_cacheline", "gpu_cacheline"):
            v = getattr(self, name)
            if v <= 0 or v & (v - 1):
                raise ConfigError(f"{name} must be a power of two, got {v}")
        for name in ("cpu_capacity", "gpu_capacity"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("cpu_bw", "gpu_bw", "c2c_bw_h2d", "c2c_bw_d2h"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.gpu_reserved_baseline < 0 or self.gpu_reserved_baseline >= self.gpu_capacity:
            raise ConfigError("gpu_reserved_baseline must be in [0, gpu_capacity)")

    def page_size_for(self, kind: AllocKind) -> int:
        """Translation granularity for an allocation kind.

        Device allocations live in the GPU-exclusive table with its large
        fixed page size; everything else is tracked at the system page size
        (unified allocations move between tables but keep fine-grained
        bookkeeping).
        """
        if kind is AllocKind.DEVICE_ONLY:
            return self.gpu_page_size
        return self.system_page_size


@dataclass(slots=True)
class PageTableEntry:
    vpn: int                       # page start address / system_page_size
    page_bytes: int
    alloc_id: int
    kind: AllocKind
    residency: Tier | None = None  # None = unmapped
    owner_table: Table = Table.SYSTEM_WIDE
    access_counter: int = 0
    dirty: bool = False
    last_touch: float = 0.0
    first_touch_agent: Agent | None = None
    splintered: bool = False       # evicted out of the GPU-exclusive table


@dataclass
class VirtualAllocation:
    alloc_id: int
    base: int
    length: int                    # rounded up to page_size_in_use
    kind: AllocKind
    page_size_in_use: int
    ptes: list[PageTableEntry] = field(repr=False, default_factory=list)

    @property
    def end(self) -> int:
        return self.base + self.length

    @property
    def num_pages(self) -> int:
        return self.length // self.page_size_in_use

    def page_index(self, addr: int) -> int:
        return (addr - self.base) // self.page_size_in_use


@dataclass
class TierUsage:
    """Resident bytes per tier; GPU usage includes the driver baseline."""

    cpu_resident_bytes: int = 0
    gpu_resident_bytes: int = 0


class Translation:
    """Outcome of a virtual-to-physical lookup."""

    __slots__ = ("outcome", "residency")

    HIT = "hit"
    FIRST_TOUCH_FAULT = "first_touch_fault"
    NOT_ALLOCATED = "not_allocated"

    def __init__(self, outcome: str, residency: Tier | None = None):
        self.outcome = outcome
        self.residency = residency

    def __repr__(self):
        return f"Translation({self.outcome}, {self.residency})"


def _round_up(value: int, multiple: int) -> int:
    return -(-value // multiple) * multiple


class MemorySystem:
    """All allocations, page table entries, and tier usage of one simulation."""

    def __init__(self, cfg: MachineConfig):
        self.cfg = cfg
        self.allocations: dict[int, VirtualAllocation] = {}
        self.usage = TierUsage(cpu_resident_bytes=0,
                               gpu_resident_bytes=cfg.gpu_reserved_baseline)
        self._bases: list[int] = []      # sorted allocation bases for lookup
        self._by_base: dict[int, int] = {}
        self._cursor = VA_BASE
        self._next_id = 0
        # GPU-resident pages eligible for eviction, keyed by vpn.
        self.gpu_evictable: dict[int, PageTableEntry] = {}

    # -- capacity ----------------------------------------------------------

    def gpu_free(self) -> int:
        return self.cfg.gpu_capacity - self.usage.gpu_resident_bytes

    def cpu_free(self) -> int:
        return self.cfg.cpu_capacity - self.usage.cpu_resident_bytes

    # -- allocation lifecycle ----------------------------------------------

    def allocate(self, kind: AllocKind, length: int) -> tuple[VirtualAllocation, float]:
        """Create an allocation; returns it with the elapsed creation time.

        System and managed allocations get empty (unmapped) page table
        entries.  Device and host-pinned allocations are mapped eagerly to
        their home tier and charged one CPU-side fault per page for the
        population work.
        """
        if length <= 0:
            raise ConfigError(f"allocation length must be positive, got {length}")
        page = self.cfg.page_size_for(kind)
        length = _round_up(length, page)

        if kind is AllocKind.DEVICE_ONLY and length > self.gpu_free():
            raise AllocationError(
                f"device allocation of {length} bytes exceeds free GPU memory ({self.gpu_free()})")
        if kind is AllocKind.HOST_PINNED and length > self.cpu_free():
            raise AllocationError(
                f"pinned allocation of {length} bytes exceeds free CPU memory ({self.cpu_free()})")

        base = _round_up(self._cursor, self.cfg.gpu_page_size)
        self._cursor = base + length
        alloc = VirtualAllocation(self._next_id, base, length, kind, page)
        self._next_id += 1

        sys_page = self.cfg.system_page_size
        n = alloc.num_pages
        ptes = alloc.ptes
        for i in range(n):
            vpn = (base + i * page) // sys_page
            ptes.append(PageTableEntry(vpn, page, alloc.alloc_id, kind))

        if kind is AllocKind.DEVICE_ONLY:
            for pte in ptes:
                pte.residency = Tier.GPU
                pte.owner_table = Table.GPU_EXCLUSIVE
            self.usage.gpu_resident_bytes += length
            elapsed = n * self.cfg.fault_cost_cpu
        elif kind is AllocKind.HOST_PINNED:
            for pte in ptes:
                pte.residency = Tier.CPU
            self.usage.cpu_resident_bytes += length
            elapsed = n * self.cfg.fault_cost_cpu
        else:
            elapsed = n * self.cfg.pte_create_cost

        self.allocations[alloc.alloc_id] = alloc
        idx = bisect.bisect(self._bases, base)
        self._bases.insert(idx, base)
        self._by_base[base] = alloc.alloc_id
        return alloc, elapsed

    def deallocate(self, alloc: VirtualAllocation) -> float:
        """Destroy an allocation; elapsed is linear in its page count."""
        if alloc.alloc_id not in self.allocations:
            raise UsageError(f"double free of allocation {alloc.alloc_id}")
        for pte in alloc.ptes:
            if pte.residency is Tier.CPU:
                self.usage.cpu_resident_bytes -= pte.page_bytes
            elif pte.residency is Tier.GPU:
                self.usage.gpu_resident_bytes -= pte.page_bytes
                self.gpu_evictable.pop(pte.vpn, None)
        del self.allocations[alloc.alloc_id]
        self._bases.remove(alloc.base)
        del self._by_base[alloc.base]
        return alloc.num_pages * self.cfg.pte_teardown_cost

    # -- lookup --------------------------------------------------------------

    def find_allocation(self, addr: int) -> VirtualAllocation | None:
        idx = bisect.bisect(self._bases, addr)
        if idx == 0:
            return None
        alloc = self.allocations[self._by_base[self._bases[idx - 1]]]
        return alloc if addr < alloc.end else None

    def lookup(self, addr: int) -> tuple[VirtualAllocation, PageTableEntry] | None:
        alloc = self.find_allocation(addr)
        if alloc is None:
            return None
        return alloc, alloc.ptes[alloc.page_index(addr)]

    def translate(self, addr: int, requester: Agent) -> Translation:
        """Resolve an address: mapped hit, first-touch fault, or unallocated."""
        hit = self.lookup(addr)
        if hit is None:
            return Translation(Translation.NOT_ALLOCATED)
        _, pte = hit
        if pte.residency is None:
            return Translation(Translation.FIRST_TOUCH_FAULT)
        return Translation(Translation.HIT, pte.residency)

    # -- page state transitions ----------------------------------------------

    def _owner_for(self, kind: AllocKind, tier: Tier) -> Table:
        # Unified allocations use the GPU-exclusive table only while
        # GPU-resident; device allocations always do; everything else is
        # system-wide.
        if kind is AllocKind.DEVICE_ONLY:
            return Table.GPU_EXCLUSIVE
        if kind is AllocKind.MANAGED and tier is Tier.GPU:
            return Table.GPU_EXCLUSIVE
        return Table.SYSTEM_WIDE

    def map_page(self, pte: PageTableEntry, tier: Tier, toucher: Agent, now: float) -> None:
        """First mapping of an unmapped page into a tier."""
        if pte.residency is not None:
            raise UsageError(f"page {pte.vpn} is already mapped")
        if tier is Tier.GPU:
            if pte.page_bytes > self.gpu_free():
                raise OutOfMemoryError("GPU tier full while mapping page")
            self.usage.gpu_resident_bytes += pte.page_bytes
        else:
            if pte.page_bytes > self.cpu_free():
                raise OutOfMemoryError("CPU tier full while mapping page")
            self.usage.cpu_resident_bytes += pte.page_bytes
        pte.residency = tier
        pte.owner_table = self._owner_for(pte.kind, tier)
        pte.first_touch_agent = toucher
        pte.last_touch = now
        self._track_evictable(pte)

    def migrate_page(self, pte: PageTableEntry, to: Tier, splinter: bool = False) -> None:
        """Move a mapped page between tiers; resets the access counter."""
        src = pte.residency
        if src is None or src is to:
            raise UsageError(f"bad migration of page {pte.vpn}: {src} -> {to}")
        if to is Tier.GPU:
            if pte.page_bytes > self.gpu_free():
                raise OutOfMemoryError("GPU tier full while migrating page in")
            self.usage.gpu_resident_bytes += pte.page_bytes
            self.usage.cpu_resident_bytes -= pte.page_bytes
        else:
            if pte.page_bytes > self.cpu_free():
                raise OutOfMemoryError("CPU tier full while migrating page out")
            self.usage.cpu_resident_bytes += pte.page_bytes
            self.usage.gpu_resident_bytes -= pte.page_bytes
        pte.residency = to
        pte.owner_table = self._owner_for(pte.kind, to)
        pte.access_counter = 0
        pte.dirty = False
        pte.splintered = splinter if to is Tier.CPU else False
        self._track_evictable(pte)

    def _track_evictable(self, pte: PageTableEntry) -> None:
        if pte.residency is Tier.GPU and pte.kind in (AllocKind.SYSTEM, AllocKind.MANAGED):
            self.gpu_evictable[pte.vpn] = pte
        else:
            self.gpu_evictable.pop(pte.vpn, None)

    # -- consistency ---------------------------------------------------------

    def audit(self) -> None:
        """Full-scan check of the residency, ownership, and capacity rules."""
        cpu = 0
        gpu = self.cfg.gpu_reserved_baseline
        for alloc in self.allocations.values():
            for pte in alloc.ptes:
                if pte.residency is None:
                    assert pte.access_counter == 0 and not pte.dirty, \
                        f"unmapped page {pte.vpn} carries state"
                    continue
                if pte.residency is Tier.CPU:
                    cpu += pte.page_bytes
                else:
                    gpu += pte.page_bytes
                expect = self._owner_for(pte.kind, pte.residency)
                assert pte.owner_table is expect, \
                    f"page {pte.vpn}: owner {pte.owner_table} != {expect}"
        assert cpu == self.usage.cpu_resident_bytes, "CPU usage out of sync"
        assert gpu == self.usage.gpu_resident_bytes, "GPU usage out of sync"
        assert gpu <= self.cfg.gpu_capacity, "GPU capacity exceeded"
        assert cpu <= self.cfg.cpu_capacity, "CPU capacity exceeded"
