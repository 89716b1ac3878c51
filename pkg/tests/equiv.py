"""Bridge between raw trace tuples, the engine, and the reference oracle."""

from uvmsim import (AccessEvent, Agent, AllocKind, MachineConfig, Op,
                    OutOfMemoryError, OversubscriptionSetup, PolicyConfig,
                    PrefetchEvent, TraceSpec, run)

from oracle import run_oracle

_AGENT = {"cpu": Agent.CPU, "gpu": Agent.GPU}
_OP = {"r": Op.READ, "w": Op.WRITE, "a": Op.ATOMIC}


def to_engine_events(events):
    out = []
    for ev in events:
        if ev[0] == "prefetch":
            _, dest, addr, length, phase = ev
            out.append(PrefetchEvent(_AGENT[dest], addr, length, phase))
        else:
            _, agent, op, addr, size, phase = ev
            out.append(AccessEvent(_AGENT[agent], _OP[op], addr, size, phase))
    return out


def machine_dict(cfg: MachineConfig) -> dict:
    return {
        "system_page_size": cfg.system_page_size,
        "gpu_page_size": cfg.gpu_page_size,
        "cpu_cacheline": cfg.cpu_cacheline,
        "gpu_cacheline": cfg.gpu_cacheline,
        "gpu_capacity": cfg.gpu_capacity,
        "cpu_capacity": cfg.cpu_capacity,
        "gpu_reserved_baseline": cfg.gpu_reserved_baseline,
    }


def policy_dict(pol: PolicyConfig, cfg: MachineConfig) -> dict:
    return {
        "threshold": pol.migration_threshold,
        "counters_enabled": pol.counters_enabled,
        "chunk_bytes": pol.managed_migration_granularity or cfg.gpu_page_size,
        "prefetch_chunk": pol.prefetch_chunk_bytes,
        "prefetch_after_first_touch": pol.prefetch_after_first_touch,
        "prefetch_mode": pol.prefetch_mode,
    }


def run_engine_raw(buffers, events, cfg: MachineConfig, pol: PolicyConfig,
                   reserved: int = 0) -> dict:
    spec = TraceSpec("equiv", [(AllocKind(k), length) for k, length in buffers],
                     to_engine_events(events))
    setup = None
    if reserved:
        setup = OversubscriptionSetup(reserved_bytes=reserved, m_peak=1,
                                      m_gpu=1, r_oversub=1.0)
    try:
        report = run(spec, cfg, pol, setup, sampling_period=0)
    except OutOfMemoryError as exc:
        return {"migrations": None, "counters": None,
                "oom": getattr(exc, "event_index", -1)}
    migrations = [(m["cause"], m["direction"], m["vpn_start"], m["vpn_end"],
                   m["pages"], m["bytes"]) for m in report.migrations]
    return {"migrations": migrations, "counters": report.traffic, "oom": None}


def assert_equivalent(buffers, events, cfg: MachineConfig, pol: PolicyConfig,
                      reserved: int = 0, tag: str = ""):
    got = run_engine_raw(buffers, events, cfg, pol, reserved)
    want = run_oracle(buffers, events, machine_dict(cfg), policy_dict(pol, cfg),
                      reserved_bytes=reserved)
    if want["oom"] is not None or got["oom"] is not None:
        assert got["oom"] == want["oom"], \
            f"{tag}: oom mismatch: engine={got['oom']} oracle={want['oom']}"
        return
    assert got["migrations"] == want["migrations"], (
        f"{tag}: migration sequences differ\n"
        f"engine: {got['migrations']}\noracle: {want['migrations']}")
    assert got["counters"] == want["counters"], (
        f"{tag}: counters differ\nengine: {got['counters']}\n"
        f"oracle: {want['counters']}")
