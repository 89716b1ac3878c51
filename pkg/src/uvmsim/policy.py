"""Fault handling, placement, migration, eviction, and prefetch decisions.

One UvmPolicy instance drives one simulation's memory state.  All
decisions are deterministic: eviction order is (last_touch, vpn), and
every byte moved is accounted through the traffic counters.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .memmodel import (Agent, AllocKind, ConfigError, MachineConfig, MemorySystem,
                       MIB, OutOfMemoryError, PageTableEntry, SimulationError, Tier,
                       VirtualAllocation)
from .workload import AccessEvent
from .xconnect import (AccessResolution, Direction, Op, TrafficCounters,
                       cost_of_migration, resolve_access)


@dataclass(frozen=True)
class PolicyConfig:
    """Knobs for the placement and migration machinery.

    The two granularities default to the machine's GPU page size and
    system page size respectively; `resolved()` fills them in.
    """

    migration_threshold: int = 256
    counters_enabled: bool = True
    eviction: str = "lru"
    prefetch_after_first_touch: bool = False
    prefetch_mode: str = "none"  # none | before_compute | streaming
    prefetch_chunk_bytes: int = 2 * MIB
    managed_migration_granularity: int | None = None
    counter_tracking_granularity: int | None = None

    def resolved(self, cfg: MachineConfig) -> "PolicyConfig":
        pol = replace(
            self,
            managed_migration_granularity=self.managed_migration_granularity
            or cfg.gpu_page_size,
            counter_tracking_granularity=self.counter_tracking_granularity
            or cfg.system_page_size,
        )
        if pol.migration_threshold < 1:
            raise ConfigError("migration_threshold must be >= 1")
        if pol.eviction != "lru":
            raise ConfigError(f"unknown eviction policy {pol.eviction!r}")
        if pol.prefetch_mode not in ("none", "before_compute", "streaming"):
            raise ConfigError(f"unknown prefetch_mode {pol.prefetch_mode!r}")
        if pol.managed_migration_granularity % cfg.system_page_size != 0:
            raise ConfigError("managed migration granularity must be a multiple "
                              "of the system page size")
        if pol.counter_tracking_granularity != cfg.system_page_size:
            raise ConfigError("counter tracking granularity must equal the "
                              "system page size")
        if pol.prefetch_chunk_bytes % cfg.system_page_size != 0:
            raise ConfigError("prefetch chunk must be a multiple of the system "
                              "page size")
        return pol


@dataclass(slots=True)
class MigrationEvent:
    cause: str      # on_demand_fault | access_counter | explicit_prefetch | eviction
    direction: Direction
    vpn_start: int
    vpn_end: int
    pages: int
    bytes: int
    time: float

    def key(self) -> tuple:
        """Identity used when comparing against reference interpreters."""
        return (self.cause, self.direction.value, self.vpn_start, self.vpn_end,
                self.pages, self.bytes)


ON_DEMAND = "on_demand_fault"
ACCESS_COUNTER = "access_counter"
EXPLICIT_PREFETCH = "explicit_prefetch"
EVICTION = "eviction"


class UvmPolicy:
    """Decision procedures over one MemorySystem and one counter sink."""

    def __init__(self, mem: MemorySystem, counters: TrafficCounters,
                 pol: PolicyConfig, cfg: MachineConfig):
        if pol.managed_migration_granularity is None:
            pol = pol.resolved(cfg)
        self.mem = mem
        self.counters = counters
        self.pol = pol
        self.cfg = cfg
        self.stats = {
            "first_touch_cpu": 0,
            "first_touch_gpu": 0,
            "notifications": 0,
            "eviction_events": 0,
            "migration_events": 0,
        }

    # -- access dispatch -----------------------------------------------------

    def handle_access(self, ev: AccessEvent, in_compute: bool, now: float,
                      ) -> tuple[float, list[MigrationEvent], AccessResolution]:
        """Process one application access end to end.

        Returns the elapsed simulated time, the migration events the access
        triggered (in order), and how the access itself was serviced.
        """
        pair = self.mem.lookup(ev.addr)
        if pair is None:
            raise SimulationError(f"access to unallocated address {ev.addr:#x}")
        alloc, pte = pair
        kind = alloc.kind
        events: list[MigrationEvent] = []
        elapsed = 0.0
        cfg = self.cfg
        pol = self.pol

        if pte.residency is None:
            elapsed += self._first_touch(alloc, pte, ev.agent, now, events)
            res = resolve_access(ev.op, ev.size, ev.agent, pte.residency, cfg,
                                 self.counters)
        elif (ev.agent is Agent.GPU) == (pte.residency is Tier.GPU):
            res = resolve_access(ev.op, ev.size, ev.agent, pte.residency, cfg,
                                 self.counters)
        elif kind is AllocKind.DEVICE_ONLY:
            raise SimulationError(
                f"CPU access to device-only allocation at {ev.addr:#x}")
        elif kind is AllocKind.HOST_PINNED:
            res = resolve_access(ev.op, ev.size, ev.agent, pte.residency, cfg,
                                 self.counters)
        elif kind is AllocKind.SYSTEM:
            res = resolve_access(ev.op, ev.size, ev.agent, pte.residency, cfg,
                                 self.counters)
            if ev.agent is Agent.GPU and pol.counters_enabled:
                pte.access_counter += 1
                if pte.access_counter > pol.migration_threshold:
                    self.stats["notifications"] += 1
                    elapsed += cfg.notification_cost
                    elapsed += self._counter_migration(alloc, ev.addr, now, events)
        else:  # managed allocation, requester on the opposite tier
            if ev.agent is Agent.GPU:
                elapsed += self._managed_gpu_access(alloc, pte, ev.addr, in_compute,
                                                    now, events)
                res = resolve_access(ev.op, ev.size, ev.agent, pte.residency, cfg,
                                     self.counters)
            else:
                elapsed += self._managed_cpu_retrieval(alloc, ev.addr, now, events)
                res = resolve_access(ev.op, ev.size, ev.agent, Tier.CPU, cfg,
                                     self.counters)
        elapsed += res.elapsed
        pte.last_touch = now
        if ev.op is not Op.READ:
            pte.dirty = True
        return elapsed, events, res

    # -- first touch -----------------------------------------------------------

    def _first_touch(self, alloc: VirtualAllocation, pte: PageTableEntry,
                     toucher: Agent, now: float, events: list) -> float:
        cfg = self.cfg
        if toucher is Agent.CPU:
            # Handled entirely on the CPU side: cheap fault, page lands local.
            self.stats["first_touch_cpu"] += 1
            self.mem.map_page(pte, Tier.CPU, Agent.CPU, now)
            return cfg.fault_cost_cpu

        self.stats["first_touch_gpu"] += 1
        if alloc.kind is AllocKind.MANAGED:
            # The runtime materializes the whole device-sized chunk in the
            # GPU-exclusive table on one driver fault; no system-table work.
            chunk = [p for p in self._chunk_pages(alloc, pte)
                     if p.residency is None]
            elapsed = self._evict_for(sum(p.page_bytes for p in chunk), now, events)
            for p in chunk:
                self.mem.map_page(p, Tier.GPU, Agent.GPU, now)
            return elapsed + cfg.fault_cost_cpu

        # System page: the fault is raised by the system MMU and resolved on
        # the CPU, which is what makes GPU-side initialization expensive.
        elapsed = self._evict_for(pte.page_bytes, now, events)
        self.mem.map_page(pte, Tier.GPU, Agent.GPU, now)
        elapsed += cfg.fault_cost_gpu_first_touch
        if self.pol.prefetch_after_first_touch:
            span = self.pol.prefetch_chunk_bytes
            addr = pte.vpn * cfg.system_page_size
            lo = (addr // span) * span
            pf_elapsed, pf_events = self.prefetch_range(alloc, lo, span, Tier.GPU, now)
            elapsed += pf_elapsed
            events.extend(pf_events)
        return elapsed

    # -- managed on-demand paths -------------------------------------------------

    def _chunk_pages(self, alloc: VirtualAllocation, pte: PageTableEntry,
                     ) -> list[PageTableEntry]:
        span = self.pol.managed_migration_granularity
        addr = pte.vpn * self.cfg.system_page_size
        lo = max(alloc.base, (addr // span) * span)
        hi = min(alloc.end, lo + span)
        return alloc.ptes[alloc.page_index(lo):alloc.page_index(hi - 1) + 1]

    def _managed_gpu_access(self, alloc: VirtualAllocation, pte: PageTableEntry,
                            addr: int, in_compute: bool, now: float,
                            events: list) -> float:
        pol = self.pol
        if pol.prefetch_mode == "streaming" and in_compute:
            span = pol.managed_migration_granularity
            lo = (addr // span) * span
            elapsed, pf_events = self.prefetch_range(alloc, lo, span, Tier.GPU, now)
            events.extend(pf_events)
            return elapsed

        if pte.splintered:
            # Evicted pages live in the system-wide table, so the GPU can
            # reach them over the link; they are pulled back one page at a
            # time and only when that costs no further eviction.
            if self.mem.gpu_free() >= pte.page_bytes:
                self.mem.migrate_page(pte, Tier.GPU)
                events.append(self._record(ON_DEMAND, Direction.H2D, [pte], now))
                return cost_of_migration(pte.page_bytes, Direction.H2D, self.cfg,
                                         self.counters)
            return 0.0  # serviced remotely by the caller's resolve

        chunk = [p for p in self._chunk_pages(alloc, pte) if p.residency is Tier.CPU]
        nbytes = sum(p.page_bytes for p in chunk)
        elapsed = self._evict_for(nbytes, now, events)
        for p in chunk:
            self.mem.migrate_page(p, Tier.GPU)
        events.append(self._record(ON_DEMAND, Direction.H2D, chunk, now))
        return elapsed + cost_of_migration(nbytes, Direction.H2D, self.cfg,
                                           self.counters)

    def _managed_cpu_retrieval(self, alloc: VirtualAllocation, addr: int,
                               now: float, events: list) -> float:
        pte = alloc.ptes[alloc.page_index(addr)]
        chunk = [p for p in self._chunk_pages(alloc, pte) if p.residency is Tier.GPU]
        nbytes = sum(p.page_bytes for p in chunk)
        for p in chunk:
            self.mem.migrate_page(p, Tier.CPU, splinter=False)
        events.append(self._record(ON_DEMAND, Direction.D2H, chunk, now))
        return cost_of_migration(nbytes, Direction.D2H, self.cfg, self.counters)

    # -- access-counter migration ---------------------------------------------

    def _counter_migration(self, alloc: VirtualAllocation, addr: int, now: float,
                           events: list) -> float:
        """Threshold crossing: reset the region's counters, promote it if it fits.

        Counter-driven promotion never evicts: pushing resident data out for
        a speculative gain is worse than keeping the remote traffic.
        """
        span = self.pol.managed_migration_granularity
        lo = max(alloc.base, (addr // span) * span)
        hi = min(alloc.end, lo + span)
        region = alloc.ptes[alloc.page_index(lo):alloc.page_index(hi - 1) + 1]
        movable = [p for p in region if p.residency is Tier.CPU]
        for p in region:
            p.access_counter = 0
        nbytes = sum(p.page_bytes for p in movable)
        if nbytes == 0 or nbytes > self.mem.gpu_free():
            return 0.0
        for p in movable:
            self.mem.migrate_page(p, Tier.GPU)
        events.append(self._record(ACCESS_COUNTER, Direction.H2D, movable, now))
        return cost_of_migration(nbytes, Direction.H2D, self.cfg, self.counters)

    # -- eviction -----------------------------------------------------------------

    def _evict_for(self, bytes_needed: int, now: float, events: list) -> float:
        return self.evict_for(bytes_needed, now, events, frozenset())

    def evict_for(self, bytes_needed: int, now: float, events: list,
                  exclude: frozenset[int]) -> float:
        """Evict least-recently-touched pages until bytes_needed fits.

        System pages move individually; managed pages move as whole
        device-sized chunks and are splintered into the system-wide table.
        Pages whose vpn is in `exclude` are untouchable (used by prefetch so
        a range never evicts itself).
        """
        elapsed = 0.0
        mem = self.mem
        chunk_span = self.pol.managed_migration_granularity
        sys_page = self.cfg.system_page_size
        while mem.gpu_free() < bytes_needed:
            best_key = None
            best_pages: list[PageTableEntry] | None = None
            chunks: dict[tuple[int, int], list[PageTableEntry]] = {}
            for vpn, pte in mem.gpu_evictable.items():
                if vpn in exclude:
                    continue
                if pte.kind is AllocKind.SYSTEM:
                    key = (pte.last_touch, vpn)
                    if best_key is None or key < best_key:
                        best_key, best_pages = key, [pte]
                else:
                    cid = (pte.alloc_id, (vpn * sys_page) // chunk_span)
                    chunks.setdefault(cid, []).append(pte)
            for group in chunks.values():
                key = (max(p.last_touch for p in group), min(p.vpn for p in group))
                if best_key is None or key < best_key:
                    best_key, best_pages = key, group
            if best_pages is None:
                raise OutOfMemoryError(
                    f"need {bytes_needed} bytes on GPU but nothing is evictable")
            victims = sorted(best_pages, key=lambda p: p.vpn)
            nbytes = sum(p.page_bytes for p in victims)
            for p in victims:
                mem.migrate_page(p, Tier.CPU, splinter=(p.kind is AllocKind.MANAGED))
            self.stats["eviction_events"] += 1
            events.append(self._record(EVICTION, Direction.D2H, victims, now))
            elapsed += cost_of_migration(nbytes, Direction.D2H, self.cfg,
                                         self.counters)
        return elapsed

    # -- prefetch --------------------------------------------------------------

    def prefetch_range(self, alloc: VirtualAllocation, addr: int, length: int,
                       dest: Tier, now: float,
                       ) -> tuple[float, list[MigrationEvent]]:
        """Make a range resident at dest via one bulk movement.

        Unmapped pages are mapped at dest with no per-page fault cost;
        already-resident pages are skipped; everything else moves in one
        migration-priced transfer.  Idempotent on fully resident ranges.
        """
        lo = max(alloc.base, addr)
        hi = min(alloc.end, addr + length)
        if lo >= hi:
            raise SimulationError("prefetch range outside its allocation")
        if alloc.kind in (AllocKind.DEVICE_ONLY, AllocKind.HOST_PINNED):
            return 0.0, []
        page = alloc.page_size_in_use
        lo = (lo // page) * page
        span = alloc.ptes[alloc.page_index(lo):alloc.page_index(hi - 1) + 1]
        to_map = [p for p in span if p.residency is None]
        to_move = [p for p in span if p.residency not in (None, dest)]
        if not to_map and not to_move:
            return 0.0, []

        events: list[MigrationEvent] = []
        elapsed = 0.0
        needed = sum(p.page_bytes for p in to_map + to_move)
        if dest is Tier.GPU:
            elapsed += self.evict_for(needed, now, events,
                                      frozenset(p.vpn for p in span))
        agent = Agent.GPU if dest is Tier.GPU else Agent.CPU
        for p in to_map:
            self.mem.map_page(p, dest, agent, now)
        for p in to_move:
            self.mem.migrate_page(p, dest, splinter=False)
        moved = sum(p.page_bytes for p in to_move)
        direction = Direction.H2D if dest is Tier.GPU else Direction.D2H
        pages = sorted(to_map + to_move, key=lambda p: p.vpn)
        ev = MigrationEvent(EXPLICIT_PREFETCH, direction, pages[0].vpn,
                            pages[-1].vpn, len(pages), moved, now)
        self.stats["migration_events"] += 1
        events.append(ev)
        if moved:
            elapsed += cost_of_migration(moved, direction, self.cfg, self.counters)
        else:
            elapsed += self.cfg.migration_fixed_cost  # API work, no data moved
        return elapsed, events

    # -- helpers ------------------------------------------------------------------

    def _record(self, cause: str, direction: Direction,
                pages: list[PageTableEntry], now: float) -> MigrationEvent:
        self.stats["migration_events"] += 1
        vpns = sorted(p.vpn for p in pages)
        nbytes = sum(p.page_bytes for p in pages)
        return MigrationEvent(cause, direction, vpns[0], vpns[-1], len(pages),
                              nbytes, now)
