"""Oversubscription: remote access vs migrate-and-evict.

A device reservation shrinks usable GPU memory below the working set.
OS-allocated memory keeps reading over the link at unchanged cost, while
managed memory evicts and re-migrates; the gap widens with the pressure.
"""

from uvmsim import (AllocKind, MIB, MachineConfig, PolicyConfig, hotspot_like,
                    run, setup_oversubscription)

machine = MachineConfig()
WS = 64 * MIB

print("ratio   t_system_ms   t_managed_ms   system/managed speedup   evictions")
for ratio in (1.0, 1.1, 1.2, 1.3, 1.4, 1.5):
    setup = setup_oversubscription(ratio, WS, machine)
    rs = run(hotspot_like(working_set=WS, iterations=4), machine,
             PolicyConfig(counters_enabled=False), setup, sampling_period=0,
             seed=7)
    rm = run(hotspot_like(working_set=WS, iterations=4, kind=AllocKind.MANAGED),
             machine, PolicyConfig(counters_enabled=False), setup,
             sampling_period=0, seed=7)
    print(f"{setup.r_oversub:5.2f}  {rs.total_time_s * 1e3:12.2f}"
          f"  {rm.total_time_s * 1e3:13.2f}"
          f"  {rm.total_time_s / rs.total_time_s:22.4f}"
          f"  {rm.event_counts['eviction_events']:9d}")
