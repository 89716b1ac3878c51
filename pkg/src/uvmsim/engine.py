"""Event-driven simulation loop, logical clock, sampling profiler, reports.

The engine owns all mutable state of one run: it allocates the workload's
buffers, feeds the event stream through the policy layer, advances a
logical clock by every elapsed cost, samples memory usage on clock-period
boundaries, and assembles an immutable report.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

from .memmodel import (Agent, AllocKind, MachineConfig, MemorySystem,
                       OutOfMemoryError, SimulationError, Tier, UsageError)
from .policy import MigrationEvent, PolicyConfig, UvmPolicy
from .workload import (AccessEvent, OversubscriptionSetup, PrefetchEvent,
                       TraceSpec, WorkloadSpec, gen_workload, parse_phase)
from .xconnect import Op, ServicedFrom, TrafficCounters


@dataclass
class PhaseTimings:
    t_alloc: float = 0.0
    t_init: float = 0.0
    t_compute: float = 0.0
    t_dealloc: float = 0.0
    per_iteration: list[float] = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.t_alloc + self.t_init + self.t_compute + self.t_dealloc


@dataclass(slots=True)
class MemoryUsageSample:
    logical_time: float
    cpu_rss: int
    gpu_used: int


TRAFFIC_ORDER = ("gpu_local_read", "gpu_local_write", "cpu_local_read",
                 "cpu_local_write", "c2c_h2d", "c2c_d2h", "c2c_writeback",
                 "migrated_h2d", "migrated_d2h", "requested_bytes")


@dataclass
class SimulationReport:
    """Immutable result of one run; serializes deterministically."""

    name: str
    seed: int
    sampling_period_s: float
    machine: dict
    policy: dict
    workload: dict
    workload_identity: dict
    oversubscription: dict | None
    timings: PhaseTimings
    traffic: dict
    amplification: float
    per_iteration: list[dict]
    migrations: list[dict]
    timeline: list[MemoryUsageSample]
    event_counts: dict
    total_time_s: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "sampling_period_s": self.sampling_period_s,
            "machine": self.machine,
            "policy": self.policy,
            "workload": self.workload,
            "workload_identity": self.workload_identity,
            "oversubscription": self.oversubscription,
            "timings": {
                "t_alloc_s": self.timings.t_alloc,
                "t_init_s": self.timings.t_init,
                "t_compute_s": self.timings.t_compute,
                "t_dealloc_s": self.timings.t_dealloc,
                "per_iteration_s": self.timings.per_iteration,
            },
            "traffic": self.traffic,
            "amplification": self.amplification,
            "per_iteration": self.per_iteration,
            "migrations": self.migrations,
            "timeline": [{"time_s": s.logical_time, "cpu_rss_bytes": s.cpu_rss,
                          "gpu_used_bytes": s.gpu_used} for s in self.timeline],
            "event_counts": self.event_counts,
            "total_time_s": self.total_time_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationReport":
        t = d["timings"]
        timings = PhaseTimings(t["t_alloc_s"], t["t_init_s"], t["t_compute_s"],
                               t["t_dealloc_s"], list(t["per_iteration_s"]))
        timeline = [MemoryUsageSample(s["time_s"], s["cpu_rss_bytes"],
                                      s["gpu_used_bytes"]) for s in d["timeline"]]
        return cls(
            name=d["name"], seed=d["seed"],
            sampling_period_s=d["sampling_period_s"], machine=d["machine"],
            policy=d["policy"], workload=d["workload"],
            workload_identity=d["workload_identity"],
            oversubscription=d["oversubscription"], timings=timings,
            traffic=d["traffic"], amplification=d["amplification"],
            per_iteration=d["per_iteration"], migrations=d["migrations"],
            timeline=timeline, event_counts=d["event_counts"],
            total_time_s=d["total_time_s"],
        )

    @classmethod
    def load_json(cls, path) -> "SimulationReport":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    def write_csvs(self, outdir) -> None:
        from pathlib import Path
        out = Path(outdir)
        with open(out / "timeline.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time_s", "cpu_rss_bytes", "gpu_used_bytes"])
            for s in self.timeline:
                w.writerow([repr(s.logical_time), s.cpu_rss, s.gpu_used])
        with open(out / "iterations.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "time_s", "gpu_local_read_bytes", "c2c_read_bytes",
                        "writeback_bytes"])
            for row in self.per_iteration:
                w.writerow([row["iter"], repr(row["time_s"]),
                            row["gpu_local_read_bytes"], row["c2c_read_bytes"],
                            row["writeback_bytes"]])
        with open(out / "traffic.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["counter", "bytes"])
            for key in TRAFFIC_ORDER:
                w.writerow([key, self.traffic[key]])


def _machine_dict(cfg: MachineConfig) -> dict:
    return asdict(cfg)


def _policy_dict(pol: PolicyConfig) -> dict:
    return {
        "migration_threshold": pol.migration_threshold,
        "counters_enabled": pol.counters_enabled,
        "eviction": pol.eviction,
        "prefetch_after_first_touch": pol.prefetch_after_first_touch,
        "prefetch_mode": pol.prefetch_mode,
        "prefetch_chunk_bytes": pol.prefetch_chunk_bytes,
        "managed_migration_granularity": pol.managed_migration_granularity,
        "counter_tracking_granularity": pol.counter_tracking_granularity,
    }


class _Run:
    def __init__(self, spec: WorkloadSpec | TraceSpec, machine: MachineConfig,
                 pol: PolicyConfig, setup: OversubscriptionSetup | None,
                 sampling_period: float, seed: int):
        self.spec = spec
        self.cfg = machine
        self.pol = pol.resolved(machine)
        self.setup = setup
        self.period = sampling_period
        self.seed = seed
        self.mem = MemorySystem(machine)
        self.counters = TrafficCounters()
        self.policy = UvmPolicy(self.mem, self.counters, self.pol, machine)
        self.clock = 0.0
        self.t_alloc = 0.0
        self.t_init = 0.0
        self.t_dealloc = 0.0
        self.iter_time: list[float] = []
        self.iter_traffic: list[list[int]] = []  # [local_read, c2c_read, writeback]
        self.migrations: list[MigrationEvent] = []
        self.timeline: list[MemoryUsageSample] = []
        self._next_sample = 1
        self._phase_cache: dict[str, tuple[str, int | None]] = {}
        self._ctx_charged = False
        self._before_compute_pending = self.pol.prefetch_mode == "before_compute"
        self.access_events = 0

    # -- clock ------------------------------------------------------------------

    def _advance(self, dt: float) -> None:
        self.clock += dt
        if self.period > 0:
            usage = self.mem.usage
            while self._next_sample * self.period <= self.clock:
                self.timeline.append(MemoryUsageSample(
                    self._next_sample * self.period,
                    usage.cpu_resident_bytes, usage.gpu_resident_bytes))
                self._next_sample += 1

    def _bucket(self, phase_kind: str, iteration: int | None, dt: float) -> None:
        if phase_kind == "compute":
            self._ensure_iter(iteration)
            self.iter_time[iteration] += dt
        elif phase_kind == "init":
            self.t_init += dt
        elif phase_kind == "alloc":
            self.t_alloc += dt
        else:
            self.t_dealloc += dt

    def _ensure_iter(self, iteration: int) -> None:
        while len(self.iter_time) <= iteration:
            self.iter_time.append(0.0)
            self.iter_traffic.append([0, 0, 0])

    # -- run --------------------------------------------------------------------

    def execute(self) -> SimulationReport:
        spec = self.spec
        allocs = []
        for kind, length in spec.buffers:
            alloc, elapsed = self.mem.allocate(kind, length)
            allocs.append(alloc)
            self.t_alloc += elapsed
            self._advance(elapsed)
        # Runtime-managed allocation APIs initialize the GPU context up
        # front; a pure OS-allocator workload pays for it at first GPU use.
        if any(kind is not AllocKind.SYSTEM for kind, _ in spec.buffers):
            self._charge_context("alloc", None)
        self.workload_allocs = allocs

        reservation = None
        if self.setup is not None and self.setup.reserved_bytes > 0:
            # Environment pressure, present before the application runs and
            # charged no simulated time.
            reservation, _ = self.mem.allocate(AllocKind.DEVICE_ONLY,
                                               self.setup.reserved_bytes)

        if isinstance(spec, WorkloadSpec):
            bases = [a.base for a in allocs]
            stream = gen_workload(spec, bases, self.cfg, self.seed)
        else:
            stream = spec.events

        for index, ev in enumerate(stream):
            try:
                self._one_event(ev)
            except OutOfMemoryError as exc:
                wrapped = OutOfMemoryError(
                    f"{exc} [event index {index}, census {self._census()}]")
                wrapped.event_index = index
                raise wrapped from exc

        for alloc in allocs:
            elapsed = self.mem.deallocate(alloc)
            self.t_dealloc += elapsed
            self._advance(elapsed)
        if reservation is not None:
            self.mem.deallocate(reservation)
        return self._report()

    def _phase(self, tag: str) -> tuple[str, int | None]:
        got = self._phase_cache.get(tag)
        if got is None:
            got = parse_phase(tag)
            self._phase_cache[tag] = got
        return got

    def _one_event(self, ev) -> None:
        # One logical stamp per event: every page touched while handling it
        # (including by the before-compute hook) records the same instant, so
        # eviction order depends only on event order, never on intra-event
        # cost accounting.
        now = self.clock
        phase_kind, iteration = self._phase(ev.phase)
        in_compute = phase_kind == "compute"
        if in_compute and self._before_compute_pending:
            self._before_compute_pending = False
            self._run_before_compute(iteration, now)
        if not self._ctx_charged:
            gpu_involved = isinstance(ev, PrefetchEvent) or ev.agent is Agent.GPU
            if gpu_involved:
                self._charge_context(phase_kind, iteration)

        if isinstance(ev, PrefetchEvent):
            pair = self.mem.lookup(ev.addr)
            if pair is None:
                raise SimulationError(f"prefetch of unallocated address {ev.addr:#x}")
            alloc, _ = pair
            dest = Tier.GPU if ev.dest is Agent.GPU else Tier.CPU
            elapsed, events = self.policy.prefetch_range(alloc, ev.addr, ev.length,
                                                         dest, now)
            self._finish(phase_kind, iteration, elapsed, events, None, None)
            return

        self.access_events += 1
        for piece in self._pieces(ev):
            elapsed, events, res = self.policy.handle_access(piece, in_compute, now)
            self._finish(phase_kind, iteration, elapsed, events, res, piece)

    def _run_before_compute(self, iteration: int | None, now: float) -> None:
        for alloc in self.workload_allocs:
            if alloc.kind in (AllocKind.SYSTEM, AllocKind.MANAGED):
                elapsed, events = self.policy.prefetch_range(
                    alloc, alloc.base, alloc.length, Tier.GPU, now)
                self._finish("compute", iteration, elapsed, events, None, None)

    def _charge_context(self, phase_kind: str, iteration: int | None) -> None:
        self._ctx_charged = True
        dt = self.cfg.gpu_context_init_cost
        self._bucket(phase_kind, iteration if phase_kind == "compute" else None, dt)
        self._advance(dt)

    def _finish(self, phase_kind, iteration, elapsed, events, res, piece) -> None:
        self._bucket(phase_kind, iteration, elapsed)
        self._advance(elapsed)
        self.migrations.extend(events)
        if res is not None and phase_kind == "compute":
            self._ensure_iter(iteration)
            row = self.iter_traffic[iteration]
            if res.serviced_from is ServicedFrom.LOCAL_GPU and piece.op is not Op.WRITE:
                row[0] += piece.size
            elif res.serviced_from is ServicedFrom.REMOTE_OVER_C2C:
                if piece.op is not Op.WRITE:
                    row[1] += res.bytes_on_wire
            row[2] += res.wrote_back

    def _pieces(self, ev: AccessEvent):
        sys_page = self.cfg.system_page_size
        end = ev.addr + ev.size
        if ev.addr // sys_page == (end - 1) // sys_page:
            return (ev,)
        pair = self.mem.lookup(ev.addr)
        if pair is None:
            return (ev,)  # policy raises with context
        page = pair[0].page_size_in_use
        if ev.addr // page == (end - 1) // page:
            return (ev,)
        pieces = []
        addr = ev.addr
        while addr < end:
            stop = min(end, (addr // page + 1) * page)
            pieces.append(AccessEvent(ev.agent, ev.op, addr, stop - addr, ev.phase))
            addr = stop
        return pieces

    def _census(self) -> dict:
        counts: dict[str, int] = {}
        for alloc in self.mem.allocations.values():
            for pte in alloc.ptes:
                tier = pte.residency.value if pte.residency else "unmapped"
                key = f"{alloc.kind.value}/{tier}"
                counts[key] = counts.get(key, 0) + 1
        return counts

    # -- report -------------------------------------------------------------------

    def _report(self) -> SimulationReport:
        spec = self.spec
        iterations = getattr(spec, "iterations", 1)
        self._ensure_iter(max(0, iterations - 1))
        timings = PhaseTimings(self.t_alloc, self.t_init, sum(self.iter_time),
                               self.t_dealloc, list(self.iter_time))
        per_iteration = [
            {"iter": i, "time_s": t,
             "gpu_local_read_bytes": tr[0], "c2c_read_bytes": tr[1],
             "writeback_bytes": tr[2]}
            for i, (t, tr) in enumerate(zip(self.iter_time, self.iter_traffic))
        ]
        migrations = [
            {"cause": m.cause, "direction": m.direction.value,
             "vpn_start": m.vpn_start, "vpn_end": m.vpn_end, "pages": m.pages,
             "bytes": m.bytes, "time_s": m.time}
            for m in self.migrations
        ]
        workload = {
            "kind": "trace" if isinstance(spec, TraceSpec) else "generated",
            "buffers": [[k.value, length] for k, length in spec.buffers],
            **spec.identity(),
        }
        setup = None
        if self.setup is not None:
            setup = {"reserved_bytes": self.setup.reserved_bytes,
                     "m_peak": self.setup.m_peak, "m_gpu": self.setup.m_gpu,
                     "r_oversub": self.setup.r_oversub}
        counts = dict(self.policy.stats)
        counts["access_events"] = self.access_events
        return SimulationReport(
            name=spec.name,
            seed=self.seed,
            sampling_period_s=self.period,
            machine=_machine_dict(self.cfg),
            policy=_policy_dict(self.pol),
            workload=workload,
            workload_identity=spec.identity(),
            oversubscription=setup,
            timings=timings,
            traffic=self.counters.as_dict(),
            amplification=self.counters.amplification(),
            per_iteration=per_iteration,
            migrations=migrations,
            timeline=self.timeline,
            event_counts=counts,
            total_time_s=self.clock,
        )


def run(spec: WorkloadSpec | TraceSpec, machine: MachineConfig | None = None,
        pol: PolicyConfig | None = None,
        setup: OversubscriptionSetup | None = None,
        sampling_period: float = 0.1, seed: int = 0) -> SimulationReport:
    """Simulate one workload or trace and return its report."""
    machine = machine or MachineConfig()
    pol = pol or PolicyConfig()
    return _Run(spec, machine, pol, setup, sampling_period, seed).execute()


def _ratio(baseline: float, value: float) -> float:
    if value > 0:
        return baseline / value
    return 1.0 if baseline == 0 else float("inf")


def compare(reports: list[SimulationReport],
            labels: list[str] | None = None) -> list[dict]:
    """Speedups of each report against the first, per phase and in traffic.

    All reports must describe the same workload shape (allocator kinds may
    differ; that is the point of the comparison).
    """
    if len(reports) < 2:
        raise UsageError("compare needs at least two reports")
    first = reports[0].workload_identity
    for r in reports[1:]:
        if r.workload_identity != first:
            raise UsageError(
                f"mismatched workloads: {first} vs {r.workload_identity}")
    if labels is None:
        labels = [f"report{i}" for i in range(len(reports))]
    base = reports[0]
    base_c2c = base.traffic["c2c_h2d"] + base.traffic["c2c_d2h"] \
        + base.traffic["c2c_writeback"]
    rows = []
    for label, r in zip(labels, reports):
        c2c = r.traffic["c2c_h2d"] + r.traffic["c2c_d2h"] + r.traffic["c2c_writeback"]
        rows.append({
            "label": label,
            "total_time_s": r.total_time_s,
            "speedup_total": _ratio(base.total_time_s, r.total_time_s),
            "speedup_alloc": _ratio(base.timings.t_alloc, r.timings.t_alloc),
            "speedup_init": _ratio(base.timings.t_init, r.timings.t_init),
            "speedup_compute": _ratio(base.timings.t_compute, r.timings.t_compute),
            "speedup_dealloc": _ratio(base.timings.t_dealloc, r.timings.t_dealloc),
            "c2c_bytes_ratio": _ratio(c2c, base_c2c),
        })
    return rows


COMPARE_HEADER = ["label", "total_time_s", "speedup_total", "speedup_alloc",
                  "speedup_init", "speedup_compute", "speedup_dealloc",
                  "c2c_bytes_ratio"]


def write_compare_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_HEADER)
        for row in rows:
            w.writerow([row["label"], repr(row["total_time_s"])]
                       + [repr(row[k]) for k in COMPARE_HEADER[2:]])
