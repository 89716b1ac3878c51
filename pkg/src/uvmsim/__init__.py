"""uvmsim: deterministic simulator of a cache-coherent CPU-GPU memory system.

Two physical tiers, two page tables, first-touch placement, cacheline-
granular remote access over a coherent link, on-demand and access-counter
page migration, eviction under oversubscription, and a sampling memory
profiler, all driven by a logical clock for reproducible runs.
"""

from .memmodel import (Agent, AllocKind, AllocationError, ConfigError, GIB,
                       MIB, MachineConfig, MemorySystem, OutOfMemoryError,
                       PageTableEntry, SimulationError, Table, Tier,
                       TierUsage, Translation, UsageError, UvmError,
                       VirtualAllocation)
from .xconnect import (AccessResolution, Direction, Op, ServicedFrom,
                       TrafficCounters, cost_of_migration, resolve_access,
                       wire_bytes)
from .policy import MigrationEvent, PolicyConfig, UvmPolicy
from .workload import (AccessEvent, OversubscriptionSetup, Pattern,
                       PrefetchEvent, TraceParseError, TraceSpec,
                       WorkloadSpec, bfs_like, gen_workload, hotspot_like,
                       irregular, load_trace, mixed, parse_trace_lines,
                       qiskit_like, regular, setup_oversubscription,
                       srad_like, statevector_bytes)
from .engine import (MemoryUsageSample, PhaseTimings, SimulationReport,
                     compare, run, write_compare_csv)

__all__ = [
    "Agent", "AllocKind", "AllocationError", "ConfigError", "GIB", "MIB",
    "MachineConfig", "MemorySystem", "OutOfMemoryError", "PageTableEntry",
    "SimulationError", "Table", "Tier", "TierUsage", "Translation",
    "UsageError", "UvmError", "VirtualAllocation",
    "AccessResolution", "Direction", "Op", "ServicedFrom", "TrafficCounters",
    "cost_of_migration", "resolve_access", "wire_bytes",
    "MigrationEvent", "PolicyConfig", "UvmPolicy",
    "AccessEvent", "OversubscriptionSetup", "Pattern", "PrefetchEvent",
    "TraceParseError", "TraceSpec", "WorkloadSpec", "bfs_like",
    "gen_workload", "hotspot_like", "irregular", "load_trace", "mixed",
    "parse_trace_lines", "qiskit_like", "regular", "setup_oversubscription",
    "srad_like", "statevector_bytes",
    "MemoryUsageSample", "PhaseTimings", "SimulationReport", "compare",
    "run", "write_compare_csv",
]

__version__ = "0.1.0"
