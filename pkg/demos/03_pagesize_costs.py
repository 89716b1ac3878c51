"""System page size vs page-table costs.

Deallocation tears down one entry per page, so 64 KiB pages are 16x
cheaper to release than 4 KiB pages.  GPU-side first touch pays a CPU
round-trip per page, so initialization shrinks the same way.
"""

from uvmsim import (AllocKind, GIB, MachineConfig, MemorySystem, PolicyConfig,
                    qiskit_like, run)

print("1 GiB allocation lifecycle:")
print("page_size  pages     alloc_ms  dealloc_ms")
times = {}
for page in (4096, 65536):
    machine = MachineConfig(system_page_size=page)
    mem = MemorySystem(machine)
    alloc, t_alloc = mem.allocate(AllocKind.SYSTEM, 1 * GIB)
    t_dealloc = mem.deallocate(alloc)
    times[page] = t_dealloc
    print(f"{page:9d}  {1 * GIB // page:8d}  {t_alloc * 1e3:8.3f}  "
          f"{t_dealloc * 1e3:10.3f}")
print(f"dealloc ratio 4k/64k: {times[4096] / times[65536]:.1f}x\n")

print("GPU-initialized statevector (16 MiB), init phase by page size:")
spec = qiskit_like(21, shots=2)
for page in (4096, 65536):
    rep = run(spec, MachineConfig(system_page_size=page),
              PolicyConfig(counters_enabled=False), sampling_period=0, seed=7)
    print(f"  {page:5d}: init={rep.timings.t_init * 1e3:7.2f} ms "
          f"({rep.event_counts['first_touch_gpu']} GPU faults)")
