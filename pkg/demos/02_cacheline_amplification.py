"""Wire amplification of small remote accesses over the coherent link.

A remote access always moves whole cachelines: 128 bytes per line when the
GPU requests, 64 when the CPU does.  Tiny accesses therefore amplify.
"""

from uvmsim import (Agent, MachineConfig, Op, Tier, TrafficCounters,
                    resolve_access)

cfg = MachineConfig()

print("requester  op      size  wire_bytes  amplification")
for agent, residency in ((Agent.GPU, Tier.CPU), (Agent.CPU, Tier.GPU)):
    for size in (1, 4, 8, 64, 128, 256, 1024):
        c = TrafficCounters()
        res = resolve_access(Op.READ, size, agent, residency, cfg, c)
        print(f"{agent.value:9s}  read  {size:5d}  {res.bytes_on_wire:10d}"
              f"  {res.bytes_on_wire / size:6.1f}x")

print("\nremote writes are accounted once, as writeback traffic:")
c = TrafficCounters()
resolve_access(Op.WRITE, 8, Agent.GPU, Tier.CPU, cfg, c)
print(f"  8-byte GPU write -> writeback={c.c2c_writeback} bytes, "
      f"read-direction traffic={c.c2c_h2d}")

c = TrafficCounters()
resolve_access(Op.ATOMIC, 8, Agent.GPU, Tier.CPU, cfg, c)
print(f"  8-byte GPU atomic -> one line each way: "
      f"read={c.c2c_h2d}, writeback={c.c2c_writeback}")
