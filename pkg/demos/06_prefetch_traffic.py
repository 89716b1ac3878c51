"""Explicit prefetch turns remote reads into local reads under pressure.

A GPU-initialized managed statevector that exceeds usable GPU memory ends
up partly evicted; without help the compute phase reads the evicted part
over the link forever.  Streaming prefetch pulls each chunk back just
before use, so reads come from local memory at the cost of bulk moves.
"""

from uvmsim import (AllocKind, MIB, MachineConfig, PolicyConfig, qiskit_like,
                    run, setup_oversubscription)

machine = MachineConfig()
spec = qiskit_like(23, shots=4, kind=AllocKind.MANAGED)   # 64 MiB statevector
setup = setup_oversubscription(1.3, spec.working_set(), machine)
print(f"working set {spec.working_set() / MIB:.0f} MiB, usable GPU memory "
      f"{setup.m_gpu / MIB:.0f} MiB (ratio {setup.r_oversub:.2f})\n")

for label, pol in (
    ("on-demand only", PolicyConfig(counters_enabled=False)),
    ("streaming prefetch", PolicyConfig(counters_enabled=False,
                                        prefetch_mode="streaming")),
):
    rep = run(spec, machine, pol, setup, sampling_period=0, seed=7)
    link_reads = sum(r["c2c_read_bytes"] for r in rep.per_iteration)
    local_reads = sum(r["gpu_local_read_bytes"] for r in rep.per_iteration)
    print(f"{label:18s}: compute link reads {link_reads / MIB:7.1f} MiB, "
          f"local reads {local_reads / MIB:7.1f} MiB, "
          f"migrated {rep.traffic['migrated_h2d'] / MIB:7.1f} MiB H2D, "
          f"total {rep.total_time_s * 1e3:6.1f} ms")
